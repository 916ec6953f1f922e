#include "gcrec/kd_tree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace gcrec {

namespace {
constexpr std::int32_t kLeafSize = 16;
}

KdIndex::KdIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error("empty cloud");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(points_.size() / kLeafSize * 2 + 2);
  root_ = build(0, static_cast<std::int32_t>(points_.size()));
}

std::int32_t KdIndex::build(std::int32_t begin, std::int32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }
  Aabb box;
  for (std::int32_t i = begin; i < end; ++i) box.extend(points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
  const Vec3 ext = box.extent();
  int axis = 0;
  if (ext.y > ext.x) axis = 1;
  if (ext.z > ext[axis]) axis = 2;
  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     const double va = points_[static_cast<std::size_t>(a)][axis];
                     const double vb = points_[static_cast<std::size_t>(b)][axis];
                     return va < vb || (va == vb && a < b);
                   });
  node.axis = static_cast<std::int8_t>(axis);
  node.split = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
  const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  const std::int32_t l = build(begin, mid);
  const std::int32_t r = build(mid, end);
  nodes_[static_cast<std::size_t>(self)].left = l;
  nodes_[static_cast<std::size_t>(self)].right = r;
  return self;
}

namespace {
// (distance2, index) with deterministic tie-break on index
struct Hit {
  double d2;
  std::int64_t idx;
  bool operator<(const Hit& o) const { return d2 < o.d2 || (d2 == o.d2 && idx < o.idx); }
};
}  // namespace

std::vector<std::int64_t> KdIndex::knn(const Vec3& q, int k) const {
  if (k <= 0 || k > size()) throw ShapeError("knn: k out of range");
  std::priority_queue<Hit> best;  // max-heap on worst kept hit
  auto consider = [&](std::int64_t idx) {
    Hit h{dist2(q, points_[static_cast<std::size_t>(idx)]), idx};
    if (static_cast<int>(best.size()) < k) {
      best.push(h);
    } else if (h < best.top()) {
      best.pop();
      best.push(h);
    }
  };
  // iterative descent with pruning
  std::vector<std::int32_t> stack{root_};
  while (!stack.empty()) {
    const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.axis < 0) {
      for (std::int32_t i = n.begin; i < n.end; ++i)
        consider(order_[static_cast<std::size_t>(i)]);
      continue;
    }
    const double delta = q[n.axis] - n.split;
    const std::int32_t near = delta < 0 ? n.left : n.right;
    const std::int32_t far = delta < 0 ? n.right : n.left;
    if (static_cast<int>(best.size()) < k || delta * delta <= best.top().d2)
      stack.push_back(far);
    stack.push_back(near);
  }
  std::vector<Hit> hits;
  hits.reserve(best.size());
  while (!best.empty()) {
    hits.push_back(best.top());
    best.pop();
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::int64_t> out;
  out.reserve(hits.size());
  for (const Hit& h : hits) out.push_back(h.idx);
  return out;
}

std::int64_t KdIndex::nearest(const Vec3& q) const { return knn(q, 1)[0]; }

std::vector<std::int64_t> KdIndex::radius_all(const Vec3& q, double radius) const {
  if (radius <= 0) throw NumericError("radius must be positive");
  const double r2 = radius * radius;
  std::vector<Hit> hits;
  std::vector<std::int32_t> stack{root_};
  while (!stack.empty()) {
    const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.axis < 0) {
      for (std::int32_t i = n.begin; i < n.end; ++i) {
        const std::int64_t idx = order_[static_cast<std::size_t>(i)];
        const double d2 = dist2(q, points_[static_cast<std::size_t>(idx)]);
        if (d2 <= r2) hits.push_back({d2, idx});
      }
      continue;
    }
    const double delta = q[n.axis] - n.split;
    const std::int32_t near = delta < 0 ? n.left : n.right;
    const std::int32_t far = delta < 0 ? n.right : n.left;
    if (delta * delta <= r2) stack.push_back(far);
    stack.push_back(near);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::int64_t> out;
  out.reserve(hits.size());
  for (const Hit& h : hits) out.push_back(h.idx);
  return out;
}

BallQueryResult KdIndex::ball_query(const Vec3& q, double radius, int cap) const {
  if (cap <= 0) throw ShapeError("ball_query: cap must be positive");
  BallQueryResult res;
  std::vector<std::int64_t> hits = radius_all(q, radius);
  res.real_hits = static_cast<std::int64_t>(hits.size());
  if (hits.empty()) hits.push_back(nearest(q));
  if (static_cast<int>(hits.size()) > cap) hits.resize(static_cast<std::size_t>(cap));
  res.indices = std::move(hits);
  while (static_cast<int>(res.indices.size()) < cap) res.indices.push_back(res.indices[0]);
  return res;
}

std::vector<std::int64_t> fps(const std::vector<Vec3>& points, std::int64_t m) {
  const std::int64_t n = static_cast<std::int64_t>(points.size());
  if (m < 1 || m > n) throw ShapeError("fps: m out of range");
  std::vector<std::int64_t> picked;
  picked.reserve(static_cast<std::size_t>(m));
  std::vector<double> min_d2(static_cast<std::size_t>(n), 1e300);
  std::int64_t cur = 0;
  picked.push_back(cur);
  for (std::int64_t round = 1; round < m; ++round) {
    std::int64_t best = -1;
    double best_d2 = -1.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double d2 = dist2(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(cur)]);
      if (d2 < min_d2[static_cast<std::size_t>(i)]) min_d2[static_cast<std::size_t>(i)] = d2;
      if (min_d2[static_cast<std::size_t>(i)] > best_d2) {
        best_d2 = min_d2[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    cur = best;
    picked.push_back(cur);
  }
  return picked;
}

}  // namespace gcrec
