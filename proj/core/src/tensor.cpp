#include "gcrec/tensor.hpp"

#include <cmath>
#include <sstream>

namespace gcrec {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, DType dt) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  t.dtype_ = dt;
  if (dt == DType::F64)
    t.d64_.assign(static_cast<std::size_t>(t.numel_), 0.0);
  else
    t.d32_.assign(static_cast<std::size_t>(t.numel_), 0.0f);
  return t;
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value, DType dt) { return full({1}, value, dt); }

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  if (t.numel_ != static_cast<std::int64_t>(values.size()))
    throw ShapeError("from(): " + shape_str(t.shape_) + " wants " +
                     std::to_string(t.numel_) + " values, got " +
                     std::to_string(values.size()));
  t.dtype_ = DType::F64;
  t.d64_ = std::move(values);
  return t;
}

Tensor Tensor::from32(Shape shape, std::vector<float> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  if (t.numel_ != static_cast<std::int64_t>(values.size()))
    throw ShapeError("from32(): element count mismatch");
  t.dtype_ = DType::F32;
  t.d32_ = std::move(values);
  return t;
}

std::int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::at(std::int64_t i) const {
  return dtype_ == DType::F64 ? d64_[static_cast<std::size_t>(i)]
                              : static_cast<double>(d32_[static_cast<std::size_t>(i)]);
}

void Tensor::set(std::int64_t i, double v) {
  if (dtype_ == DType::F64)
    d64_[static_cast<std::size_t>(i)] = v;
  else
    d32_[static_cast<std::size_t>(i)] = static_cast<float>(v);
}

double Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() on tensor of " + std::to_string(numel_) + " elements");
  return at(0);
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel_)
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape));
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

Tensor Tensor::cast(DType dt) const {
  if (dt == dtype_) return *this;
  Tensor t = zeros(shape_, dt);
  for (std::int64_t i = 0; i < numel_; ++i) t.set(i, at(i));
  return t;
}

bool Tensor::all_finite() const {
  if (dtype_ == DType::F64) {
    for (double v : d64_)
      if (!std::isfinite(v)) return false;
  } else {
    for (float v : d32_)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& o) const {
  if (shape_ != o.shape_ || dtype_ != o.dtype_) return false;
  if (dtype_ == DType::F64) return d64_ == o.d64_;
  return d32_ == o.d32_;
}

void Tensor::fill(double v) {
  if (dtype_ == DType::F64)
    d64_.assign(d64_.size(), v);
  else
    d32_.assign(d32_.size(), static_cast<float>(v));
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<std::size_t>(numel_));
  for (std::int64_t i = 0; i < numel_; ++i) out[static_cast<std::size_t>(i)] = at(i);
  return out;
}

}  // namespace gcrec
