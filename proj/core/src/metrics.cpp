#include "gcrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcrec/kd_tree.hpp"
#include "eig3.hpp"

namespace gcrec {

namespace {

double mean_sq_nn(const PointCloud& from, const KdIndex& to_index) {
  double acc = 0;
  for (const Vec3& p : from.positions)
    acc += dist2(p, to_index.points()[static_cast<std::size_t>(to_index.nearest(p))]);
  return acc / static_cast<double>(from.size());
}

double to_db(double mse, double peak, bool factor3) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  const double num = (factor3 ? 3.0 : 1.0) * peak * peak;
  return 10.0 * std::log10(num / mse);
}

}  // namespace

double cap_db(double db) { return std::isfinite(db) ? std::min(db, kDbCap) : kDbCap; }

double default_peak(const PointCloud& reference) {
  reference.validate();
  return reference.bounds().max_extent();
}

NormalField estimate_normals(const PointCloud& cloud, int k) {
  cloud.validate();
  const std::int64_t n = cloud.size();
  const int kk = static_cast<int>(std::min<std::int64_t>(k, n));
  KdIndex index(cloud);
  Vec3 centroid{0, 0, 0};
  for (const Vec3& p : cloud.positions) centroid += p;
  centroid = centroid / static_cast<double>(n);
  NormalField field;
  field.normals.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
    auto nn = index.knn(p, kk);
    Vec3 mean{0, 0, 0};
    for (auto j : nn) mean += cloud.positions[static_cast<std::size_t>(j)];
    mean = mean / static_cast<double>(nn.size());
    double cov[3][3] = {};
    for (auto j : nn) {
      const Vec3 d = cloud.positions[static_cast<std::size_t>(j)] - mean;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
    }
    Vec3 normal = detail::sym_eig3(cov).vectors[0];
    const double side = normal.dot(p - centroid);
    if (side < 0)
      normal = normal * -1.0;
    else if (side == 0.0) {
      // degenerate orientation: canonical sign on the largest component
      int big = 0;
      for (int a = 1; a < 3; ++a)
        if (std::abs(normal[a]) > std::abs(normal[big])) big = a;
      if (normal[big] < 0) normal = normal * -1.0;
    }
    field.normals[static_cast<std::size_t>(i)] = normal;
  }
  return field;
}

double p2p_psnr(const PointCloud& a, const PointCloud& b, double peak, bool factor3) {
  a.validate();
  b.validate();
  if (!(peak > 0)) throw NumericError("psnr: peak must be positive");
  KdIndex ia(a), ib(b);
  const double mse = std::max(mean_sq_nn(a, ib), mean_sq_nn(b, ia));
  return to_db(mse, peak, factor3);
}

double p2plane_psnr(const PointCloud& a, const PointCloud& b, const NormalField& normals_b,
                    double peak, bool factor3) {
  a.validate();
  b.validate();
  if (!(peak > 0)) throw NumericError("psnr: peak must be positive");
  if (normals_b.normals.size() != b.positions.size())
    throw ShapeError("p2plane: normals not aligned with the reference cloud");
  KdIndex ia(a), ib(b);
  double e_ab = 0;
  for (const Vec3& p : a.positions) {
    const std::int64_t j = ib.nearest(p);
    const Vec3 diff = p - b.positions[static_cast<std::size_t>(j)];
    const double proj = diff.dot(normals_b.normals[static_cast<std::size_t>(j)]);
    e_ab += proj * proj;
  }
  e_ab /= static_cast<double>(a.size());
  double e_ba = 0;
  for (std::int64_t i = 0; i < b.size(); ++i) {
    const Vec3& p = b.positions[static_cast<std::size_t>(i)];
    const std::int64_t j = ia.nearest(p);
    const Vec3 diff = p - a.positions[static_cast<std::size_t>(j)];
    const double proj = diff.dot(normals_b.normals[static_cast<std::size_t>(i)]);
    e_ba += proj * proj;
  }
  e_ba /= static_cast<double>(b.size());
  return to_db(std::max(e_ab, e_ba), peak, factor3);
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  a.validate();
  b.validate();
  KdIndex ia(a), ib(b);
  return mean_sq_nn(a, ib) + mean_sq_nn(b, ia);
}

double color_psnr(const PointCloud& a, const PointCloud& b) {
  a.validate();
  b.validate();
  if (!a.has_colors() || !b.has_colors()) throw Error("color_psnr on colorless clouds");
  KdIndex ia(a), ib(b);
  auto dir = [](const PointCloud& from, const PointCloud& to, const KdIndex& to_index) {
    double acc = 0;
    for (std::int64_t i = 0; i < from.size(); ++i) {
      const std::int64_t j = to_index.nearest(from.positions[static_cast<std::size_t>(i)]);
      acc += dist2(from.colors[static_cast<std::size_t>(i)], to.colors[static_cast<std::size_t>(j)]);
    }
    return acc / (3.0 * static_cast<double>(from.size()));
  };
  const double mse = std::max(dir(a, b, ib), dir(b, a, ia));
  return to_db(mse, 1.0, false);
}

MetricReport evaluate_pair(const PointCloud& candidate, const PointCloud& reference,
                           std::optional<double> peak) {
  MetricReport r;
  r.peak_used = peak.value_or(default_peak(reference));
  r.m1_db = p2p_psnr(candidate, reference, r.peak_used);
  NormalField nf = estimate_normals(reference);
  r.m2_db = p2plane_psnr(candidate, reference, nf, r.peak_used);
  r.chamfer_value = chamfer(candidate, reference);
  if (candidate.has_colors() && reference.has_colors())
    r.color_psnr_db = color_psnr(candidate, reference);
  return r;
}

}  // namespace gcrec
