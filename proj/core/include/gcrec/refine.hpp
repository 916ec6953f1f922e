#pragma once

#include <vector>

#include "gcrec/mls_surface.hpp"
#include "gcrec/rng.hpp"

namespace gcrec {

/// Dart-throwing Poisson-disk sample of the surface with minimum pairwise
/// distance d. Candidates are jittered reference points projected back to
/// the surface; maximality is best effort via a 30x candidate pool.
PointCloud poisson_disk_sample(const MlsSurface& surface, double d, RngStream& rng);

struct RefineConfig {
  std::int64_t max_points = 100000;    // point budget
  double delta_max_db = 70.0;          // similarity threshold between iterates
  double initial_radius_factor = 2.0;  // d0 = factor * mean spacing of the input
  double growth = 0.7071067811865476;  // radius multiplier per iteration (1/sqrt 2)
  int max_iterations = 12;
  int mls_k = 16;

  void validate() const;
};

struct RefineIteration {
  double radius = 0.0;
  std::int64_t count = 0;
  double psnr_to_last_db = 0.0;  // -inf on the first iteration
};

struct RefinedCloud {
  PointCloud cloud;
  std::vector<RefineIteration> log;
  double final_radius = 0.0;
};

/// Iterative resampling: fit the surface once, then sample at shrinking
/// radius while successive samples still differ (p2plane PSNR below the
/// threshold) and the point budget holds.
RefinedCloud refine(const PointCloud& x_prime, const RefineConfig& cfg, RngStream& rng);

}  // namespace gcrec
