#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcrec {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Incompatible tensor shapes or out-of-range extents.
struct ShapeError : Error {
  using Error::Error;
};
/// An operation produced NaN/Inf, or numeric preconditions were violated.
struct NumericError : Error {
  using Error::Error;
};

enum class DType : std::uint8_t { F64 = 0, F32 = 1 };

inline std::size_t dtype_size(DType dt) { return dt == DType::F64 ? 8 : 4; }
inline const char* dtype_name(DType dt) { return dt == DType::F64 ? "f64" : "f32"; }

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

/// Dense row-major tensor. 64-bit storage by default, 32-bit selectable
/// per tensor. Binary ops require matching dtypes; mixing is an error.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::F64);
  static Tensor full(Shape shape, double value, DType dt = DType::F64);
  static Tensor scalar(double value, DType dt = DType::F64);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor from32(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return numel_; }
  bool empty() const { return numel_ == 0; }
  DType dtype() const { return dtype_; }

  template <typename S>
  std::span<S> data();
  template <typename S>
  std::span<const S> data() const;

  /// Dtype-dispatched scalar access; convenient for IO and tests, slow in loops.
  double at(std::int64_t i) const;
  void set(std::int64_t i, double v);
  double item() const;  // value of a 1-element tensor

  Tensor reshaped(Shape new_shape) const;
  Tensor cast(DType dt) const;
  Tensor clone() const { return *this; }

  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool bit_equal(const Tensor& o) const;

  void fill(double v);
  std::vector<double> to_vector() const;

 private:
  Shape shape_;
  std::int64_t numel_ = 0;
  DType dtype_ = DType::F64;
  std::vector<double> d64_;
  std::vector<float> d32_;
};

template <>
inline std::span<double> Tensor::data<double>() {
  return {d64_.data(), d64_.size()};
}
template <>
inline std::span<const double> Tensor::data<double>() const {
  return {d64_.data(), d64_.size()};
}
template <>
inline std::span<float> Tensor::data<float>() {
  return {d32_.data(), d32_.size()};
}
template <>
inline std::span<const float> Tensor::data<float>() const {
  return {d32_.data(), d32_.size()};
}

// Dispatch a statement over the runtime dtype with scalar alias S in scope.
#define GCREC_DISPATCH(DT, ...)        \
  do {                                 \
    if ((DT) == ::gcrec::DType::F64) { \
      using S = double;                \
      __VA_ARGS__;                     \
    } else {                           \
      using S = float;                 \
      __VA_ARGS__;                     \
    }                                  \
  } while (0)

}  // namespace gcrec
