#pragma once

#include <memory>

#include "gcrec/kd_tree.hpp"
#include "gcrec/point_cloud.hpp"

namespace gcrec {

/// Moving-least-squares surface over a reference cloud: a Gaussian-weighted
/// plane fit over the k nearest reference points defines a projection
/// operator that is idempotent to tolerance. Colors are carried by
/// nearest-neighbor lookup in the reference.
class MlsSurface {
 public:
  explicit MlsSurface(PointCloud reference, int k = 16);

  Vec3 project(const Vec3& p) const;
  Vec3 color_at(const Vec3& p) const;
  double distance_to_reference(const Vec3& p) const;
  bool has_colors() const { return ref_.has_colors(); }

  const PointCloud& reference() const { return ref_; }
  double mean_spacing() const { return mean_spacing_; }
  /// True when some neighborhood was too degenerate for a plane fit at k
  /// and a doubled neighborhood had to be used.
  bool used_fallback() const { return used_fallback_; }

 private:
  Vec3 project_once(const Vec3& p, int k, bool& degenerate) const;

  PointCloud ref_;
  std::unique_ptr<KdIndex> index_;
  int k_;
  double mean_spacing_ = 0.0;
  mutable bool used_fallback_ = false;
};

}  // namespace gcrec
