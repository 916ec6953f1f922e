#include "gcrec/optim.hpp"

#include <cmath>

namespace gcrec {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw NumericError("adam: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw NumericError("adam: betas must be in [0, 1)");
}

void Adam::set_lr(double lr) {
  if (lr <= 0.0) throw NumericError("adam: lr must be positive");
  lr_ = lr;
}

void Adam::step(ParamStore& ps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, entry] : ps.entries()) {
    auto it = state_.find(name);
    if (it == state_.end()) {
      Moments mo;
      mo.m = Tensor::zeros(entry.value.shape(), entry.value.dtype());
      mo.v = Tensor::zeros(entry.value.shape(), entry.value.dtype());
      it = state_.emplace(name, std::move(mo)).first;
    }
    Moments& mo = it->second;
    GCREC_DISPATCH(entry.value.dtype(), {
      auto w = entry.value.data<S>();
      auto g = entry.grad.data<S>();
      auto m = mo.m.data<S>();
      auto v = mo.v.data<S>();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi;
        const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        w[i] = static_cast<S>(static_cast<double>(w[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    });
    if (!entry.value.all_finite()) throw NumericError("adam: parameter '" + name + "' became non-finite");
  }
}

}  // namespace gcrec
