#include <cmath>

#include "doctest.h"
#include "gcrec/metrics.hpp"
#include "gcrec/refine.hpp"
#include "gcrec/shapes.hpp"

using namespace gcrec;

namespace {

PointCloud plane_cloud(int side, double spacing, double z = 0.25) {
  PointCloud pc;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) pc.positions.push_back({i * spacing, j * spacing, z});
  return pc;
}

PointCloud noisy_sphere(std::int64_t n, double sigma, std::uint64_t seed) {
  ShapeFamily fam;
  fam.kind = ShapeKind::Sphere;
  fam.point_count = n;
  fam.noise_sigma = sigma;
  return gen_shape(fam, seed, 0);
}

double min_pairwise(const PointCloud& pc) {
  double best = 1e300;
  for (std::size_t i = 0; i < pc.positions.size(); ++i)
    for (std::size_t j = i + 1; j < pc.positions.size(); ++j)
      best = std::min(best, (pc.positions[i] - pc.positions[j]).norm());
  return best;
}

double sphere_radius_std(const PointCloud& pc) {
  Vec3 c{0, 0, 0};
  for (const Vec3& p : pc.positions) c += p;
  c = c / static_cast<double>(pc.size());
  double mean = 0;
  std::vector<double> rs;
  for (const Vec3& p : pc.positions) {
    rs.push_back((p - c).norm());
    mean += rs.back();
  }
  mean /= static_cast<double>(rs.size());
  double var = 0;
  for (double r : rs) var += (r - mean) * (r - mean);
  return std::sqrt(var / static_cast<double>(rs.size()));
}

}  // namespace

TEST_CASE("mls projection on an exact plane is the orthogonal projection") {
  MlsSurface surface(plane_cloud(20, 0.1), 16);
  RngStream rng(1);
  for (int i = 0; i < 30; ++i) {
    Vec3 p{rng.uniform(0.2, 1.6), rng.uniform(0.2, 1.6), rng.uniform(-0.5, 1.0)};
    Vec3 q = surface.project(p);
    CHECK(std::abs(q.z - 0.25) < 1e-9);
    CHECK(std::abs(q.x - p.x) < 1e-9);
    CHECK(std::abs(q.y - p.y) < 1e-9);
  }
}

TEST_CASE("mls projection is idempotent") {
  PointCloud sphere = noisy_sphere(1500, 0.01, 3);
  MlsSurface surface(sphere, 16);
  const double tol = 1e-6 * sphere.bounds().max_extent();
  RngStream rng(5);
  for (int i = 0; i < 40; ++i) {
    Vec3 p{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
    Vec3 q1 = surface.project(p);
    Vec3 q2 = surface.project(q1);
    CHECK((q2 - q1).norm() < tol);
  }
}

TEST_CASE("mls smooths a noisy sphere") {
  PointCloud noisy = noisy_sphere(2000, 0.01, 7);
  MlsSurface surface(noisy, 16);
  PointCloud projected = noisy;
  for (Vec3& p : projected.positions) p = surface.project(p);
  CHECK(sphere_radius_std(projected) < sphere_radius_std(noisy));
}

TEST_CASE("mls rejects references smaller than the neighborhood") {
  PointCloud tiny;
  for (int i = 0; i < 5; ++i) tiny.positions.push_back({static_cast<double>(i), 0, 0});
  CHECK_THROWS_AS(MlsSurface(tiny, 16), Error);
}

TEST_CASE("poisson disk sample respects the minimum distance") {
  PointCloud sphere = noisy_sphere(1200, 0.0, 11);
  MlsSurface surface(sphere, 16);
  RngStream rng(13);
  const double d = 0.08;
  PointCloud sample = poisson_disk_sample(surface, d, rng);
  CHECK(sample.size() >= 1);
  CHECK(min_pairwise(sample) >= d);
}

TEST_CASE("halving the radius densifies the sample") {
  PointCloud sphere = noisy_sphere(1200, 0.0, 17);
  MlsSurface surface(sphere, 16);
  RngStream r1(19), r2(19);
  PointCloud coarse = poisson_disk_sample(surface, 0.12, r1);
  PointCloud fine = poisson_disk_sample(surface, 0.06, r2);
  CHECK(fine.size() > coarse.size());
}

TEST_CASE("unit square at d=0.5 obeys the packing bounds") {
  MlsSurface surface(plane_cloud(24, 1.0 / 23.0, 0.0), 16);
  RngStream rng(23);
  PointCloud sample = poisson_disk_sample(surface, 0.5, rng);
  CHECK(sample.size() >= 1);
  CHECK(sample.size() <= 9);
}

TEST_CASE("radius larger than the extent still yields a point") {
  MlsSurface surface(plane_cloud(10, 0.05, 0.0), 9);
  RngStream rng(29);
  PointCloud sample = poisson_disk_sample(surface, 10.0, rng);
  CHECK(sample.size() == 1);
}

TEST_CASE("refine terminates, logs shrinking radii, and respects the budget") {
  PointCloud input = noisy_sphere(900, 0.005, 31);
  RefineConfig cfg;
  cfg.max_points = 3000;
  cfg.max_iterations = 6;
  RngStream rng(37);
  RefinedCloud out = refine(input, cfg, rng);
  CHECK(out.cloud.size() >= 1);
  CHECK(out.cloud.size() <= cfg.max_points);
  REQUIRE(!out.log.empty());
  for (std::size_t i = 1; i < out.log.size(); ++i) {
    CHECK(out.log[i].radius == doctest::Approx(out.log[i - 1].radius * cfg.growth));
  }
  CHECK(min_pairwise(out.cloud) >= out.final_radius - 1e-12);
}

TEST_CASE("a budget equal to the first sample stops immediately") {
  PointCloud input = noisy_sphere(700, 0.0, 41);
  RefineConfig probe;
  probe.max_points = 100000;
  probe.max_iterations = 1;
  RngStream r1(43);
  RefinedCloud first = refine(input, probe, r1);

  RefineConfig cfg;
  cfg.max_points = first.cloud.size();
  cfg.max_iterations = 8;
  RngStream r2(43);
  RefinedCloud out = refine(input, cfg, r2);
  CHECK(out.log.size() == 1);
  CHECK(out.cloud.size() == first.cloud.size());
}

TEST_CASE("refining a noisy sphere improves the plane metric to ground truth") {
  // jitter the ground truth in its own frame so the error is pure noise
  PointCloud clean = noisy_sphere(2048, 0.0, 47);
  PointCloud noisy = clean;
  RngStream jitter(48);
  for (Vec3& p : noisy.positions)
    p += Vec3{jitter.gaussian(), jitter.gaussian(), jitter.gaussian()} * 0.004;
  RefineConfig cfg;
  cfg.max_points = 4096;
  cfg.max_iterations = 5;
  RngStream rng(53);
  RefinedCloud refined = refine(noisy, cfg, rng);
  NormalField nf = estimate_normals(clean);
  const double peak = default_peak(clean);
  const double before = p2plane_psnr(noisy, clean, nf, peak);
  const double after = p2plane_psnr(refined.cloud, clean, nf, peak);
  CHECK(after >= before);
}

TEST_CASE("refinement of an exact plane stays on the plane") {
  PointCloud input = plane_cloud(30, 1.0 / 29.0, 0.5);
  RefineConfig cfg;
  cfg.max_points = 2000;
  cfg.max_iterations = 4;
  RngStream rng(59);
  RefinedCloud out = refine(input, cfg, rng);
  for (const Vec3& p : out.cloud.positions) CHECK(std::abs(p.z - 0.5) < 1e-9);
}

TEST_CASE("refine config validation") {
  RefineConfig cfg;
  cfg.growth = 1.5;
  CHECK_THROWS_AS(cfg.validate(), NumericError);
  RefineConfig cfg2;
  cfg2.max_points = 0;
  CHECK_THROWS_AS(cfg2.validate(), NumericError);
}
