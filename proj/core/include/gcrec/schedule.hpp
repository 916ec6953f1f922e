#pragma once

#include <functional>
#include <vector>

#include "gcrec/rng.hpp"
#include "gcrec/tensor.hpp"

namespace gcrec {

/// Linear-beta noise schedule with the Gamma-process parameters derived
/// so that the centered Gamma noise variance matches the Gaussian one:
/// k_bar_t * theta_t^2 == 1 - alpha_bar_t exactly (telescoping sum).
struct NoiseSchedule {
  int steps = 0;       // T
  double theta0 = 1.0; // initial Gamma scale
  std::vector<double> betas, alphas, alpha_bars, thetas, k_bars;  // [t-1] holds step t

  double beta(int t) const { return betas[static_cast<std::size_t>(t - 1)]; }
  double alpha(int t) const { return alphas[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar(int t) const { return alpha_bars[static_cast<std::size_t>(t - 1)]; }
  double theta(int t) const { return thetas[static_cast<std::size_t>(t - 1)]; }
  double k_bar(int t) const { return k_bars[static_cast<std::size_t>(t - 1)]; }

  void require_step(int t) const;
  /// max_t |k_bar_t * theta_t^2 - (1 - alpha_bar_t)|
  double identity_residual() const;
};

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max, double theta0);

struct ForwardSample {
  Tensor x_t;
  Tensor noise;  // eps for the Gaussian process, centered Gamma otherwise
};

enum class ReverseMode { Ancestral, PaperLiteral };
enum class Process { Gaussian, Gamma };

ForwardSample gaussian_forward(const NoiseSchedule& s, const Tensor& x0, int t, RngStream& rng);
Tensor gaussian_reverse_step(const NoiseSchedule& s, const Tensor& x_t, int t,
                             const Tensor& eps_pred, RngStream& rng,
                             ReverseMode mode = ReverseMode::Ancestral);

ForwardSample gamma_forward(const NoiseSchedule& s, const Tensor& h0, int t, RngStream& rng);
Tensor gamma_reverse_step(const NoiseSchedule& s, const Tensor& h_t, int t,
                          const Tensor& eps_pred, RngStream& rng);

/// Mean squared error losses of the two denoisers (batch-mean reduction).
double sldm_loss(const Tensor& eps, const Tensor& eps_pred);
double lpgdm_loss(const Tensor& noise, const Tensor& eps_pred, int t, const NoiseSchedule& s);

using EpsPredictor = std::function<Tensor(const Tensor& x_t, int t)>;

/// Forward-diffuse to step t_attack, then denoise back to a clean sample.
/// t_attack == 0 returns the input unchanged.
Tensor partial_diffuse_denoise(const NoiseSchedule& s, const Tensor& x0, int t_attack,
                               const EpsPredictor& predictor, RngStream& rng, Process process,
                               ReverseMode mode = ReverseMode::Ancestral);

}  // namespace gcrec
