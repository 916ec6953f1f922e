#pragma once

#include <cstdint>
#include <map>

#include "gcrec/param_store.hpp"

namespace gcrec {

/// Adam with bias correction. Keeps per-parameter first/second moment
/// state keyed by name; one optimizer per trained store.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// One update from the store's current gradients. Does not clear them.
  void step(ParamStore& ps);
  std::int64_t steps() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr);

 private:
  struct Moments {
    Tensor m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace gcrec
