#pragma once

#include <cstdint>
#include <random>

#include "gcrec/tensor.hpp"

namespace gcrec {

/// Deterministic pseudorandom stream. Gaussian draws use Box-Muller,
/// Gamma draws use Marsaglia-Tsang with the boosting transform for
/// shape < 1. Each stream belongs to exactly one worker.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Substream for worker `id` under a shared master seed.
  static RngStream forked(std::uint64_t master_seed, std::uint64_t id);

  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  std::int64_t uniform_index(std::int64_t n);  // [0, n)
  double gaussian();                   // N(0, 1)
  double gamma(double shape, double scale);

  Tensor gaussian_tensor(Shape shape, DType dt = DType::F64);
  Tensor gamma_tensor(Shape shape, double k, double theta, DType dt = DType::F64);
  Tensor uniform_tensor(Shape shape, double lo, double hi, DType dt = DType::F64);

  /// Total rejection-loop retries across all gamma draws (diagnostic).
  std::uint64_t gamma_rejections() const { return gamma_rejections_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t gamma_rejections_ = 0;
};

}  // namespace gcrec
