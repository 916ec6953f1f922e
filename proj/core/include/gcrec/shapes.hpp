#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcrec/point_cloud.hpp"
#include "gcrec/rng.hpp"

namespace gcrec {

enum class ShapeKind { Sphere, Torus, Capsule, Superquadric, Figure };

ShapeKind shape_kind_from_string(const std::string& s);
std::string shape_kind_to_string(ShapeKind k);

struct ParamRange {
  double lo = 0.0, hi = 0.0;
};

/// Synthetic dataset family: a primitive kind with per-cloud parameters
/// drawn uniformly from the configured ranges. Sampling is deterministic
/// per (seed, index).
struct ShapeFamily {
  ShapeKind kind = ShapeKind::Sphere;
  std::map<std::string, ParamRange> params;
  std::int64_t point_count = 2048;
  double noise_sigma = 0.0;
  std::string color_mode = "none";  // none | height | radial

  std::string to_json_string() const;
  static ShapeFamily from_json_string(const std::string& text);
};

/// One unit-cube-normalized surface sample of the family.
PointCloud gen_shape(const ShapeFamily& family, std::uint64_t seed, std::int64_t index);
std::vector<PointCloud> gen_shapes(const ShapeFamily& family, std::int64_t count,
                                   std::uint64_t seed);

/// Deterministic unit-cube-normalized sphere sample: Fibonacci spiral
/// oversample reduced to n points by farthest-point selection. Colors, when
/// requested, are a constant mid gray.
PointCloud sphere_template(std::int64_t n, int colors);

}  // namespace gcrec
