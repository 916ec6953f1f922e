#include "gcrec/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "gcrec/metrics.hpp"

namespace gcrec {

namespace {

// hash grid with cell size d: any two points closer than d share a 3x3x3 block
struct AcceptGrid {
  double cell;
  std::unordered_map<std::int64_t, std::vector<Vec3>> cells;

  explicit AcceptGrid(double d) : cell(d) {}

  std::int64_t key(int ix, int iy, int iz) const {
    return (static_cast<std::int64_t>(ix) * 73856093) ^
           (static_cast<std::int64_t>(iy) * 19349663) ^
           (static_cast<std::int64_t>(iz) * 83492791);
  }

  bool try_insert(const Vec3& p, double d2min) {
    const int ix = static_cast<int>(std::floor(p.x / cell));
    const int iy = static_cast<int>(std::floor(p.y / cell));
    const int iz = static_cast<int>(std::floor(p.z / cell));
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells.find(key(ix + dx, iy + dy, iz + dz));
          if (it == cells.end()) continue;
          for (const Vec3& q : it->second)
            if (dist2(p, q) < d2min) return false;
        }
    cells[key(ix, iy, iz)].push_back(p);
    return true;
  }
};

}  // namespace

PointCloud poisson_disk_sample(const MlsSurface& surface, double d, RngStream& rng) {
  if (!(d > 0)) throw NumericError("poisson disk: d must be positive");
  const PointCloud& ref = surface.reference();
  const double s = surface.mean_spacing();
  const double density_ratio = s / d;
  const std::int64_t expected = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(static_cast<double>(ref.size()) * density_ratio * density_ratio));
  const std::int64_t pool =
      std::min<std::int64_t>(30 * expected + 64, 4'000'000);
  const double jitter = std::max(d, 2.0 * s);

  // surfaces with boundary extrapolate under projection; reject candidates
  // that left the sampled support
  const double support = 3.0 * s;

  AcceptGrid grid(d);
  PointCloud out;
  const bool colors = surface.has_colors();
  for (std::int64_t c = 0; c < pool; ++c) {
    const std::int64_t pick = rng.uniform_index(ref.size());
    Vec3 candidate = ref.positions[static_cast<std::size_t>(pick)] +
                     Vec3{rng.gaussian(), rng.gaussian(), rng.gaussian()} * (0.5 * jitter);
    candidate = surface.project(candidate);
    if (surface.distance_to_reference(candidate) > support) continue;
    if (!grid.try_insert(candidate, d * d)) continue;
    out.positions.push_back(candidate);
    if (colors) out.colors.push_back(surface.color_at(candidate));
  }
  return out;
}

void RefineConfig::validate() const {
  if (max_points < 1 || delta_max_db <= 0 || initial_radius_factor <= 0 || max_iterations < 1 ||
      mls_k < 3)
    throw NumericError("refine config: all quantities must be positive");
  if (!(growth > 0.0 && growth < 1.0)) throw NumericError("refine config: growth must be in (0,1)");
}

RefinedCloud refine(const PointCloud& x_prime, const RefineConfig& cfg, RngStream& rng) {
  cfg.validate();
  MlsSurface surface(x_prime, cfg.mls_k);

  RefinedCloud result;
  double d = cfg.initial_radius_factor * surface.mean_spacing();
  PointCloud accepted;
  bool have_accepted = false;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    PointCloud y = poisson_disk_sample(surface, d, rng);
    double psnr = -std::numeric_limits<double>::infinity();
    if (have_accepted) {
      NormalField nf = estimate_normals(accepted);
      psnr = p2plane_psnr(y, accepted, nf, default_peak(accepted));
    }
    result.log.push_back({d, y.size(), psnr});

    if (y.size() > cfg.max_points) {
      if (!have_accepted) {
        // over budget on the very first sample: keep a budget-sized subset;
        // any subset of a Poisson-disk sample keeps the min-distance bound
        auto order = fps(y, cfg.max_points);
        PointCloud trimmed;
        for (auto idx : order) {
          trimmed.positions.push_back(y.positions[static_cast<std::size_t>(idx)]);
          if (y.has_colors()) trimmed.colors.push_back(y.colors[static_cast<std::size_t>(idx)]);
        }
        accepted = std::move(trimmed);
        have_accepted = true;
        result.final_radius = d;
      }
      break;
    }
    if (psnr <= cfg.delta_max_db) {
      accepted = std::move(y);
      have_accepted = true;
      result.final_radius = d;
      if (accepted.size() >= cfg.max_points) break;  // budget reached
      d *= cfg.growth;
    } else {
      break;  // successive samples agree: converged
    }
  }
  result.cloud = std::move(accepted);
  return result;
}

}  // namespace gcrec
