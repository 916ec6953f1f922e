#include "gcrec/mls_surface.hpp"

#include <cmath>

#include "eig3.hpp"

namespace gcrec {

MlsSurface::MlsSurface(PointCloud reference, int k) : ref_(std::move(reference)), k_(k) {
  ref_.validate();
  if (ref_.size() < k_) throw Error("mls: reference smaller than the neighborhood size");
  index_ = std::make_unique<KdIndex>(ref_);
  double acc = 0;
  for (std::int64_t i = 0; i < ref_.size(); ++i) {
    auto nn = index_->knn(ref_.positions[static_cast<std::size_t>(i)], 2);
    acc += std::sqrt(dist2(ref_.positions[static_cast<std::size_t>(i)],
                           ref_.positions[static_cast<std::size_t>(nn[1])]));
  }
  mean_spacing_ = acc / static_cast<double>(ref_.size());
}

Vec3 MlsSurface::project_once(const Vec3& p, int k, bool& degenerate) const {
  const int kk = static_cast<int>(std::min<std::int64_t>(k, ref_.size()));
  auto nn = index_->knn(p, kk);
  // bandwidth tied to the point spacing, not the k-neighborhood radius: a
  // wider kernel drags curved surfaces toward the chord
  const double h = std::max(1.5 * mean_spacing_, 1e-12);
  double d2min = 1e300;
  for (auto j : nn) d2min = std::min(d2min, dist2(p, ref_.positions[static_cast<std::size_t>(j)]));
  Vec3 centroid{0, 0, 0};
  double wsum = 0;
  std::vector<double> w(nn.size());
  for (std::size_t i = 0; i < nn.size(); ++i) {
    const Vec3& q = ref_.positions[static_cast<std::size_t>(nn[i])];
    // anchored at the nearest neighbor so the weight sum cannot underflow
    w[i] = std::exp(-(dist2(p, q) - d2min) / (h * h));
    centroid += q * w[i];
    wsum += w[i];
  }
  centroid = centroid / wsum;
  double cov[3][3] = {};
  for (std::size_t i = 0; i < nn.size(); ++i) {
    const Vec3 d = ref_.positions[static_cast<std::size_t>(nn[i])] - centroid;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] += w[i] * d[r] * d[c];
  }
  const detail::Eig3 eig = detail::sym_eig3(cov);
  // collinear neighborhood: plane direction not unique
  degenerate = eig.values[1] <= 1e-12 * std::max(eig.values[2], 1e-300);
  const Vec3 n = eig.vectors[0];
  return p - n * (p - centroid).dot(n);
}

Vec3 MlsSurface::project(const Vec3& p) const {
  Vec3 cur = p;
  const double tol = 1e-9 * std::max(ref_.bounds().max_extent(), 1e-12);
  for (int iter = 0; iter < 8; ++iter) {
    bool degenerate = false;
    Vec3 next = project_once(cur, k_, degenerate);
    if (degenerate) {
      used_fallback_ = true;
      next = project_once(cur, 2 * k_, degenerate);
    }
    const double move = (next - cur).norm();
    cur = next;
    if (move < tol) break;
  }
  return cur;
}

Vec3 MlsSurface::color_at(const Vec3& p) const {
  if (!ref_.has_colors()) throw Error("mls: reference has no colors");
  return ref_.colors[static_cast<std::size_t>(index_->nearest(p))];
}

double MlsSurface::distance_to_reference(const Vec3& p) const {
  return std::sqrt(dist2(p, ref_.positions[static_cast<std::size_t>(index_->nearest(p))]));
}

}  // namespace gcrec
