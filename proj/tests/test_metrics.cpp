#include <cmath>

#include "doctest.h"
#include "gcrec/metrics.hpp"
#include "gcrec/rng.hpp"
#include "gcrec/shapes.hpp"

using namespace gcrec;

namespace {

PointCloud grid_cloud(int side, double spacing) {
  PointCloud pc;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) pc.positions.push_back({i * spacing, j * spacing, 0.0});
  return pc;
}

PointCloud translated(const PointCloud& pc, const Vec3& d) {
  PointCloud out = pc;
  for (Vec3& p : out.positions) p += d;
  return out;
}

PointCloud random_cloud(std::int64_t n, std::uint64_t seed, bool colors = false) {
  RngStream rng(seed);
  PointCloud pc;
  for (std::int64_t i = 0; i < n; ++i)
    pc.positions.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  if (colors)
    for (std::int64_t i = 0; i < n; ++i)
      pc.colors.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  return pc;
}

PointCloud rotated(const PointCloud& pc, double angle, const Vec3& t) {
  const double c = std::cos(angle), s = std::sin(angle);
  PointCloud out = pc;
  for (Vec3& p : out.positions) {
    const Vec3 q{c * p.x - s * p.y, s * p.x + c * p.y, p.z};
    p = q + t;
  }
  return out;
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  auto dir = [](const PointCloud& s, const PointCloud& t) {
    double acc = 0;
    for (const Vec3& p : s.positions) {
      double best = 1e300;
      for (const Vec3& q : t.positions) best = std::min(best, dist2(p, q));
      acc += best;
    }
    return acc / static_cast<double>(s.positions.size());
  };
  return dir(a, b) + dir(b, a);
}

double brute_p2p(const PointCloud& a, const PointCloud& b, double peak) {
  auto dir = [](const PointCloud& s, const PointCloud& t) {
    double acc = 0;
    for (const Vec3& p : s.positions) {
      double best = 1e300;
      for (const Vec3& q : t.positions) best = std::min(best, dist2(p, q));
      acc += best;
    }
    return acc / static_cast<double>(s.positions.size());
  };
  const double mse = std::max(dir(a, b), dir(b, a));
  return 10.0 * std::log10(3.0 * peak * peak / mse);
}

}  // namespace

TEST_CASE("identical clouds hit the infinite sentinel and the cap") {
  PointCloud a = random_cloud(100, 1);
  const double db = p2p_psnr(a, a, 1.0);
  CHECK(std::isinf(db));
  CHECK(cap_db(db) == kDbCap);
}

TEST_CASE("hand-computed grid offset case") {
  PointCloud a = grid_cloud(10, 1.0);
  PointCloud b = translated(a, {0.01, 0, 0});
  const double db = p2p_psnr(a, b, 1.0);
  CHECK(std::abs(db - 10.0 * std::log10(3.0e4)) < 1e-6);
  CHECK(std::abs(db - 44.7712125472) < 1e-6);
}

TEST_CASE("p2p is symmetric in its arguments") {
  PointCloud a = random_cloud(150, 2);
  PointCloud b = random_cloud(180, 3);
  CHECK(p2p_psnr(a, b, 1.0) == doctest::Approx(p2p_psnr(b, a, 1.0)).epsilon(1e-12));
}

TEST_CASE("p2p equals the brute-force oracle") {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    PointCloud a = random_cloud(120, seed);
    PointCloud b = random_cloud(140, seed + 50);
    CHECK(p2p_psnr(a, b, 1.0) == doctest::Approx(brute_p2p(a, b, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("chamfer equals the brute-force double loop") {
  for (std::uint64_t seed : {7u, 8u}) {
    PointCloud a = random_cloud(150, seed);
    PointCloud b = random_cloud(130, seed + 10);
    CHECK(chamfer(a, b) == doctest::Approx(brute_chamfer(a, b)).epsilon(1e-12));
    CHECK(chamfer(a, a) == 0.0);
  }
}

TEST_CASE("in-plane offset is invisible to the plane metric") {
  PointCloud a = grid_cloud(14, 1.0);
  PointCloud b = translated(a, {0.02, 0.015, 0.0});
  NormalField nf = estimate_normals(b);
  const double m1 = p2p_psnr(a, b, 1.0);
  const double m2 = p2plane_psnr(a, b, nf, 1.0);
  CHECK(m2 > m1 + 20.0);  // projection kills the in-plane residual
}

TEST_CASE("offset along the normal makes both metrics agree") {
  PointCloud a = grid_cloud(14, 1.0);
  PointCloud b = translated(a, {0, 0, 0.01});
  NormalField nf = estimate_normals(b);
  const double m1 = p2p_psnr(a, b, 1.0);
  const double m2 = p2plane_psnr(a, b, nf, 1.0);
  CHECK(std::abs(m1 - m2) < 1e-9);
}

TEST_CASE("plane metric dominates the point metric on random pairs") {
  RngStream rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    PointCloud a = random_cloud(80, 100 + static_cast<std::uint64_t>(trial));
    PointCloud b = random_cloud(90, 200 + static_cast<std::uint64_t>(trial));
    NormalField nf = estimate_normals(b);
    CHECK(p2plane_psnr(a, b, nf, 1.0) >= p2p_psnr(a, b, 1.0) - 1e-12);
  }
}

TEST_CASE("metrics are invariant under shared rigid motion") {
  PointCloud a = random_cloud(100, 21);
  PointCloud b = random_cloud(120, 22);
  const double angle = 0.83;
  const Vec3 t{0.4, -1.2, 2.0};
  PointCloud ar = rotated(a, angle, t);
  PointCloud br = rotated(b, angle, t);
  CHECK(p2p_psnr(a, b, 1.0) == doctest::Approx(p2p_psnr(ar, br, 1.0)).epsilon(1e-9));
  CHECK(chamfer(a, b) == doctest::Approx(chamfer(ar, br)).epsilon(1e-9));
  NormalField nf = estimate_normals(b);
  NormalField nfr = estimate_normals(br);
  CHECK(p2plane_psnr(a, b, nf, 1.0) ==
        doctest::Approx(p2plane_psnr(ar, br, nfr, 1.0)).epsilon(1e-9));
}

TEST_CASE("normals of an exact plane are the plane normal") {
  PointCloud a = grid_cloud(12, 0.5);
  NormalField nf = estimate_normals(a);
  for (const Vec3& n : nf.normals) {
    CHECK(std::abs(n.norm() - 1.0) < 1e-9);
    CHECK(std::abs(std::abs(n.z) - 1.0) < 1e-9);
  }
}

TEST_CASE("sphere normals point outward") {
  ShapeFamily fam;
  fam.kind = ShapeKind::Sphere;
  fam.point_count = 600;
  PointCloud pc = gen_shape(fam, 3, 0);
  NormalField nf = estimate_normals(pc);
  Vec3 c{0.5, 0.5, 0.5};
  int outward = 0;
  for (std::size_t i = 0; i < nf.normals.size(); ++i)
    if (nf.normals[i].dot(pc.positions[i] - c) > 0) ++outward;
  CHECK(outward > 590);
}

TEST_CASE("color psnr needs colors and matches on identical clouds") {
  PointCloud a = random_cloud(60, 31, true);
  CHECK(std::isinf(color_psnr(a, a)));
  PointCloud plain = random_cloud(60, 32, false);
  CHECK_THROWS_AS(color_psnr(plain, plain), Error);
  PointCloud b = a;
  for (Vec3& c : b.colors) c.x = std::min(1.0, c.x + 0.1);
  const double db = color_psnr(a, b);
  CHECK(db > 10.0);
  CHECK(db < 40.0);
}

TEST_CASE("report assembles all metrics") {
  PointCloud a = random_cloud(70, 41, true);
  PointCloud b = random_cloud(80, 42, true);
  MetricReport r = evaluate_pair(a, b);
  CHECK(r.peak_used == doctest::Approx(default_peak(b)));
  CHECK(r.m2_db.has_value());
  CHECK(*r.m2_db >= r.m1_db - 1e-12);
  CHECK(r.color_psnr_db.has_value());
  CHECK(r.chamfer_value > 0.0);
}

TEST_CASE("psnr rejects bad peaks and empty clouds") {
  PointCloud a = random_cloud(10, 51);
  CHECK_THROWS_AS(p2p_psnr(a, a, 0.0), NumericError);
  PointCloud empty;
  CHECK_THROWS_AS(p2p_psnr(empty, a, 1.0), Error);
}
