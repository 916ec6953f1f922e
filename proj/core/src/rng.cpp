#include "gcrec/rng.hpp"

#include <cmath>

namespace gcrec {

namespace {
constexpr int kMaxRejections = 10000;
}

RngStream RngStream::forked(std::uint64_t master_seed, std::uint64_t id) {
  // splitmix64 of (seed, id) so worker streams never overlap in practice
  std::uint64_t x = master_seed + 0x9e3779b97f4a7c15ULL * (id + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  x = x ^ (x >> 31);
  return RngStream(x);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t RngStream::uniform_index(std::int64_t n) {
  if (n <= 0) throw NumericError("uniform_index: n must be positive");
  return static_cast<std::int64_t>(uniform() * static_cast<double>(n)) % n;
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

double RngStream::gamma(double shape, double scale) {
  if (shape < 0.0 || scale < 0.0) throw NumericError("gamma: negative parameter");
  if (shape == 0.0) return 0.0;  // degenerate point mass at zero
  if (shape < 1.0) {
    // boost: Gamma(k) = Gamma(k+1) * U^{1/k}
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (int iter = 0; iter < kMaxRejections; ++iter) {
    double x, v;
    do {
      x = gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v * scale;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    ++gamma_rejections_;
  }
  throw NumericError("gamma: rejection loop exceeded bound");
}

Tensor RngStream::gaussian_tensor(Shape shape, DType dt) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, gaussian());
  return t;
}

Tensor RngStream::gamma_tensor(Shape shape, double k, double theta, DType dt) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, gamma(k, theta));
  return t;
}

Tensor RngStream::uniform_tensor(Shape shape, double lo, double hi, DType dt) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, uniform(lo, hi));
  return t;
}

}  // namespace gcrec
