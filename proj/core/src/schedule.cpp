#include "gcrec/schedule.hpp"

#include <cmath>

namespace gcrec {

void NoiseSchedule::require_step(int t) const {
  if (t < 1 || t > steps)
    throw NumericError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
}

double NoiseSchedule::identity_residual() const {
  double worst = 0.0;
  for (int t = 1; t <= steps; ++t)
    worst = std::max(worst, std::abs(k_bar(t) * theta(t) * theta(t) - (1.0 - alpha_bar(t))));
  return worst;
}

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max, double theta0) {
  if (steps < 1) throw NumericError("schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max)
    throw NumericError("betas must satisfy 0 < beta_min <= beta_max < 1");
  if (!(theta0 > 0.0)) throw NumericError("theta0 must be positive");
  NoiseSchedule s;
  s.steps = steps;
  s.theta0 = theta0;
  s.betas.resize(static_cast<std::size_t>(steps));
  s.alphas.resize(static_cast<std::size_t>(steps));
  s.alpha_bars.resize(static_cast<std::size_t>(steps));
  s.thetas.resize(static_cast<std::size_t>(steps));
  s.k_bars.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  double ksum = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps > 1 ? static_cast<double>(t - 1) / (steps - 1) : 0.0;
    const double beta = beta_min + (beta_max - beta_min) * frac;
    const double alpha = 1.0 - beta;
    prod *= alpha;
    ksum += beta / (prod * theta0 * theta0);
    const std::size_t i = static_cast<std::size_t>(t - 1);
    s.betas[i] = beta;
    s.alphas[i] = alpha;
    s.alpha_bars[i] = prod;
    s.thetas[i] = std::sqrt(prod) * theta0;
    s.k_bars[i] = ksum;
  }
  return s;
}

ForwardSample gaussian_forward(const NoiseSchedule& s, const Tensor& x0, int t, RngStream& rng) {
  s.require_step(t);
  const double ab = s.alpha_bar(t);
  const double ca = std::sqrt(ab), cn = std::sqrt(1.0 - ab);
  ForwardSample out;
  out.noise = rng.gaussian_tensor(x0.shape(), x0.dtype());
  out.x_t = Tensor::zeros(x0.shape(), x0.dtype());
  for (std::int64_t i = 0; i < x0.numel(); ++i)
    out.x_t.set(i, ca * x0.at(i) + cn * out.noise.at(i));
  return out;
}

Tensor gaussian_reverse_step(const NoiseSchedule& s, const Tensor& x_t, int t,
                             const Tensor& eps_pred, RngStream& rng, ReverseMode mode) {
  s.require_step(t);
  if (!x_t.same_shape(eps_pred)) throw ShapeError("reverse step: prediction shape mismatch");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  const double coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
  Tensor out = Tensor::zeros(x_t.shape(), x_t.dtype());
  for (std::int64_t i = 0; i < x_t.numel(); ++i)
    out.set(i, inv_sqrt_alpha * (x_t.at(i) - coef * eps_pred.at(i)));
  if (mode == ReverseMode::Ancestral && t > 1) {
    const double sigma = std::sqrt(s.beta(t));
    for (std::int64_t i = 0; i < out.numel(); ++i) out.set(i, out.at(i) + sigma * rng.gaussian());
  }
  if (!out.all_finite()) throw NumericError("gaussian reverse step produced non-finite values");
  return out;
}

ForwardSample gamma_forward(const NoiseSchedule& s, const Tensor& h0, int t, RngStream& rng) {
  s.require_step(t);
  const double ab = s.alpha_bar(t);
  const double ca = std::sqrt(ab);
  const double k = s.k_bar(t), theta = s.theta(t);
  const double mean = k * theta;
  ForwardSample out;
  out.noise = Tensor::zeros(h0.shape(), h0.dtype());
  out.x_t = Tensor::zeros(h0.shape(), h0.dtype());
  for (std::int64_t i = 0; i < h0.numel(); ++i) {
    const double centered = rng.gamma(k, theta) - mean;
    out.noise.set(i, centered);
    out.x_t.set(i, ca * h0.at(i) + centered);
  }
  return out;
}

Tensor gamma_reverse_step(const NoiseSchedule& s, const Tensor& h_t, int t, const Tensor& eps_pred,
                          RngStream& rng) {
  s.require_step(t);
  if (!h_t.same_shape(eps_pred)) throw ShapeError("reverse step: prediction shape mismatch");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  const double root = std::sqrt(1.0 - s.alpha_bar(t));
  const double coef = s.beta(t) / root;
  Tensor out = Tensor::zeros(h_t.shape(), h_t.dtype());
  for (std::int64_t i = 0; i < h_t.numel(); ++i)
    out.set(i, inv_sqrt_alpha * (h_t.at(i) - coef * eps_pred.at(i)));
  if (t > 1) {
    // stochastic term beta_t (gamma_{t-1} - theta_{t-1} k_bar_{t-1}) / sqrt(1 - abar_t)
    const double kp = s.k_bar(t - 1), thp = s.theta(t - 1);
    const double mean = kp * thp;
    const double scale = s.beta(t) / root;
    for (std::int64_t i = 0; i < out.numel(); ++i)
      out.set(i, out.at(i) + scale * (rng.gamma(kp, thp) - mean));
  }
  if (!out.all_finite()) throw NumericError("gamma reverse step produced non-finite values");
  return out;
}

double sldm_loss(const Tensor& eps, const Tensor& eps_pred) {
  if (!eps.same_shape(eps_pred)) throw ShapeError("loss: shape mismatch");
  double acc = 0.0;
  for (std::int64_t i = 0; i < eps.numel(); ++i) {
    const double d = eps.at(i) - eps_pred.at(i);
    acc += d * d;
  }
  return acc / static_cast<double>(eps.numel());
}

double lpgdm_loss(const Tensor& noise, const Tensor& eps_pred, int t, const NoiseSchedule& s) {
  s.require_step(t);
  if (!noise.same_shape(eps_pred)) throw ShapeError("loss: shape mismatch");
  const double inv = 1.0 / std::sqrt(1.0 - s.alpha_bar(t));
  double acc = 0.0;
  for (std::int64_t i = 0; i < noise.numel(); ++i) {
    const double d = noise.at(i) * inv - eps_pred.at(i);
    acc += d * d;
  }
  return acc / static_cast<double>(noise.numel());
}

Tensor partial_diffuse_denoise(const NoiseSchedule& s, const Tensor& x0, int t_attack,
                               const EpsPredictor& predictor, RngStream& rng, Process process,
                               ReverseMode mode) {
  if (t_attack < 0 || t_attack > s.steps)
    throw NumericError("t_attack outside [0, T]");
  if (t_attack == 0) return x0;
  Tensor x = process == Process::Gaussian ? gaussian_forward(s, x0, t_attack, rng).x_t
                                          : gamma_forward(s, x0, t_attack, rng).x_t;
  for (int t = t_attack; t >= 1; --t) {
    Tensor eps = predictor(x, t);
    x = process == Process::Gaussian ? gaussian_reverse_step(s, x, t, eps, rng, mode)
                                     : gamma_reverse_step(s, x, t, eps, rng);
  }
  return x;
}

}  // namespace gcrec
