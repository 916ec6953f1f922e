#pragma once

#include <cstdint>
#include <vector>

#include "gcrec/geometry.hpp"
#include "gcrec/point_cloud.hpp"

namespace gcrec {

struct BallQueryResult {
  std::vector<std::int64_t> indices;  // exactly `cap` entries, padded by repetition
  std::int64_t real_hits = 0;
};

/// Balanced median-split tree over a fixed point set. Queries are exact.
class KdIndex {
 public:
  explicit KdIndex(std::vector<Vec3> points);
  explicit KdIndex(const PointCloud& cloud) : KdIndex(cloud.positions) {}

  std::int64_t size() const { return static_cast<std::int64_t>(points_.size()); }
  const std::vector<Vec3>& points() const { return points_; }

  std::int64_t nearest(const Vec3& q) const;
  /// k nearest, ascending by distance; ties break toward the lower index.
  std::vector<std::int64_t> knn(const Vec3& q, int k) const;
  /// All points within `radius`, nearest-first, truncated to `cap` and
  /// padded by repeating the first hit. Zero hits fall back to nearest(q).
  BallQueryResult ball_query(const Vec3& q, double radius, int cap) const;
  std::vector<std::int64_t> radius_all(const Vec3& q, double radius) const;

 private:
  struct Node {
    std::int32_t left = -1, right = -1;
    std::int32_t begin = 0, end = 0;  // leaf range in order_
    std::int8_t axis = -1;
    double split = 0.0;
  };
  std::int32_t build(std::int32_t begin, std::int32_t end);

  std::vector<Vec3> points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Farthest point sampling; starts at index 0, ties break low.
std::vector<std::int64_t> fps(const std::vector<Vec3>& points, std::int64_t m);
inline std::vector<std::int64_t> fps(const PointCloud& cloud, std::int64_t m) {
  return fps(cloud.positions, m);
}

}  // namespace gcrec
