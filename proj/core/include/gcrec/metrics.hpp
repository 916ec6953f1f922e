#pragma once

#include <optional>
#include <string>

#include "gcrec/point_cloud.hpp"

namespace gcrec {

/// Per-point unit normals from k-NN PCA, oriented away from the cloud
/// centroid so the sign is deterministic.
struct NormalField {
  std::vector<Vec3> normals;
};

NormalField estimate_normals(const PointCloud& cloud, int k = 16);

/// Largest bounding-box extent of the reference cloud; the default PSNR peak.
double default_peak(const PointCloud& reference);

/// Symmetric max-of-directions point-to-point PSNR. `factor3` keeps the
/// conventional 3*peak^2 numerator; identical clouds give +infinity.
double p2p_psnr(const PointCloud& a, const PointCloud& b, double peak, bool factor3 = true);

/// Point-to-plane variant: residuals projected on the b-side normals.
double p2plane_psnr(const PointCloud& a, const PointCloud& b, const NormalField& normals_b,
                    double peak, bool factor3 = true);

/// Symmetric mean-of-means squared nearest-neighbor distance.
double chamfer(const PointCloud& a, const PointCloud& b);

/// PSNR over nearest-neighbor-matched RGB with peak 1.0.
double color_psnr(const PointCloud& a, const PointCloud& b);

/// +inf sentinel capped for serialized output.
double cap_db(double db);
constexpr double kDbCap = 999.0;

struct MetricReport {
  double m1_db = 0.0;
  std::optional<double> m2_db;
  double chamfer_value = 0.0;
  std::optional<double> color_psnr_db;
  double peak_used = 0.0;
  std::string directionality = "symmetric-max";
};

MetricReport evaluate_pair(const PointCloud& candidate, const PointCloud& reference,
                           std::optional<double> peak = std::nullopt);

}  // namespace gcrec
