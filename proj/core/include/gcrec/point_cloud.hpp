#pragma once

#include <vector>

#include "gcrec/geometry.hpp"
#include "gcrec/tensor.hpp"

namespace gcrec {

/// N points with optional RGB colors in [0, 1].
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // empty, or one entry per point

  std::int64_t size() const { return static_cast<std::int64_t>(positions.size()); }
  bool has_colors() const { return !colors.empty(); }
  int channels() const { return 3 + (has_colors() ? 3 : 0); }

  Aabb bounds() const;
  void validate() const;       // throws on empty/non-finite/mismatched colors
  void clamp_colors();

  /// [N, 3+c] tensor view of positions (and colors when present).
  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t, bool with_colors);
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> faces;
  void validate() const;  // index range + degenerate face check
};

struct NormalizeTransform {
  Vec3 offset;         // original-space bbox center
  double scale = 1.0;  // multiply by this to go original -> unit
  bool degenerate = false;

  Vec3 apply(const Vec3& p) const { return (p - offset) * scale + Vec3{0.5, 0.5, 0.5}; }
  Vec3 invert(const Vec3& p) const { return (p - Vec3{0.5, 0.5, 0.5}) / scale + offset; }
};

/// Uniform-scale fit into the unit cube centered at 0.5. A cloud with no
/// spatial extent keeps scale 1 and is flagged degenerate.
NormalizeTransform normalize(PointCloud& cloud);
void denormalize(PointCloud& cloud, const NormalizeTransform& t);

/// Geometry columns of a [N, >=3] tensor.
std::vector<Vec3> positions_from_tensor(const Tensor& t);

}  // namespace gcrec
