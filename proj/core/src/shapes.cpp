#include "gcrec/shapes.hpp"

#include <cmath>

#include "gcrec/kd_tree.hpp"
#include "json.hpp"

namespace gcrec {

namespace {

using json = nlohmann::json;

double sample_param(const ShapeFamily& f, const std::string& name, double def, RngStream& rng) {
  auto it = f.params.find(name);
  if (it == f.params.end()) return def;
  const ParamRange& r = it->second;
  if (r.hi < r.lo) throw Error("empty parameter range for '" + name + "'");
  return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

Vec3 random_unit(RngStream& rng) {
  Vec3 v{rng.gaussian(), rng.gaussian(), rng.gaussian()};
  double n = v.norm();
  while (n < 1e-12) {
    v = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    n = v.norm();
  }
  return v / n;
}

Vec3 sphere_point(double r, RngStream& rng) { return random_unit(rng) * r; }

Vec3 torus_point(double major, double tube, RngStream& rng) {
  const double u = rng.uniform(0.0, 2.0 * M_PI);
  // area element scales with (R + r cos v); rejection keeps sampling uniform
  double v;
  for (;;) {
    v = rng.uniform(0.0, 2.0 * M_PI);
    const double w = (major + tube * std::cos(v)) / (major + tube);
    if (rng.uniform() <= w) break;
  }
  const double ring = major + tube * std::cos(v);
  return {ring * std::cos(u), ring * std::sin(u), tube * std::sin(v)};
}

Vec3 capsule_point(double radius, double half_len, RngStream& rng) {
  const double side_area = 2.0 * M_PI * radius * (2.0 * half_len);
  const double cap_area = 4.0 * M_PI * radius * radius;
  if (rng.uniform() < side_area / (side_area + cap_area)) {
    const double u = rng.uniform(0.0, 2.0 * M_PI);
    const double z = rng.uniform(-half_len, half_len);
    return {radius * std::cos(u), radius * std::sin(u), z};
  }
  Vec3 d = random_unit(rng);
  const double zoff = d.z >= 0 ? half_len : -half_len;
  return {radius * d.x, radius * d.y, radius * d.z + zoff};
}

Vec3 superquadric_point(double ax, double ay, double az, double e1, double e2, RngStream& rng) {
  const Vec3 d = random_unit(rng);
  const double tx = std::pow(std::abs(d.x / ax), 2.0 / e2);
  const double ty = std::pow(std::abs(d.y / ay), 2.0 / e2);
  const double tz = std::pow(std::abs(d.z / az), 2.0 / e1);
  const double f = std::pow(tx + ty, e2 / e1) + tz;
  const double s = std::pow(f, -e1 / 2.0);
  return d * s;
}

Vec3 offset_capsule(double radius, double half_len, const Vec3& center, const Vec3& axis,
                    RngStream& rng) {
  Vec3 local = capsule_point(radius, half_len, rng);
  // rotate local z onto axis
  const Vec3 zhat{0, 0, 1};
  Vec3 a = axis.normalized();
  Vec3 v = zhat.cross(a);
  const double c = zhat.dot(a);
  if (v.norm2() < 1e-18) return center + (c > 0 ? local : Vec3{local.x, -local.y, -local.z});
  const double s = v.norm();
  Vec3 k = v / s;
  // Rodrigues rotation
  Vec3 rotated = local * c + k.cross(local) * s + k * (k.dot(local)) * (1.0 - c);
  return center + rotated;
}

Vec3 figure_point(double torso_r, double torso_h, double head_r, double arm_r, double arm_l,
                  RngStream& rng) {
  const double torso_area = 2.0 * M_PI * torso_r * (2.0 * torso_h) + 4.0 * M_PI * torso_r * torso_r;
  const double head_area = 4.0 * M_PI * head_r * head_r;
  const double arm_area = 2.0 * (2.0 * M_PI * arm_r * (2.0 * arm_l) + 4.0 * M_PI * arm_r * arm_r);
  const double total = torso_area + head_area + arm_area;
  const double u = rng.uniform() * total;
  if (u < torso_area) return capsule_point(torso_r, torso_h, rng);
  if (u < torso_area + head_area)
    return sphere_point(head_r, rng) + Vec3{0, 0, torso_h + torso_r * 0.4 + head_r};
  const bool left = rng.uniform() < 0.5;
  const double sgn = left ? -1.0 : 1.0;
  const Vec3 shoulder{sgn * (torso_r + arm_r * 0.5), 0, torso_h * 0.8};
  const Vec3 axis{sgn * 0.55, 0.0, -0.85};
  return offset_capsule(arm_r, arm_l, shoulder + axis.normalized() * arm_l, axis, rng);
}

void apply_colors(PointCloud& pc, const std::string& mode) {
  if (mode == "none" || mode.empty()) return;
  pc.colors.resize(pc.positions.size());
  const Aabb box = pc.bounds();
  const double span = std::max(box.max_extent(), 1e-12);
  if (mode == "height") {
    for (std::size_t i = 0; i < pc.positions.size(); ++i) {
      const double t = (pc.positions[i].z - box.lo.z) / span;
      pc.colors[i] = {t, 1.0 - t, 0.5};
    }
  } else if (mode == "radial") {
    const Vec3 c = box.center();
    for (std::size_t i = 0; i < pc.positions.size(); ++i) {
      const double t = (pc.positions[i] - c).norm() / (0.5 * span);
      pc.colors[i] = {t, 0.2, 1.0 - t};
    }
  } else {
    throw Error("unknown color mode '" + mode + "'");
  }
  pc.clamp_colors();
}

}  // namespace

ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "sphere") return ShapeKind::Sphere;
  if (s == "torus") return ShapeKind::Torus;
  if (s == "capsule") return ShapeKind::Capsule;
  if (s == "superquadric") return ShapeKind::Superquadric;
  if (s == "figure") return ShapeKind::Figure;
  throw Error("unknown shape family '" + s + "'");
}

std::string shape_kind_to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Capsule: return "capsule";
    case ShapeKind::Superquadric: return "superquadric";
    case ShapeKind::Figure: return "figure";
  }
  return "sphere";
}

std::string ShapeFamily::to_json_string() const {
  json j;
  j["family"] = shape_kind_to_string(kind);
  j["N"] = point_count;
  j["noise_sigma"] = noise_sigma;
  j["color_mode"] = color_mode;
  json p = json::object();
  for (const auto& [name, r] : params) p[name] = {r.lo, r.hi};
  j["params"] = p;
  return j.dump(2);
}

ShapeFamily ShapeFamily::from_json_string(const std::string& text) {
  json j = json::parse(text);
  ShapeFamily f;
  f.kind = shape_kind_from_string(j.at("family").get<std::string>());
  f.point_count = j.value("N", std::int64_t{2048});
  f.noise_sigma = j.value("noise_sigma", 0.0);
  f.color_mode = j.value("color_mode", std::string("none"));
  if (j.contains("params"))
    for (auto& [name, r] : j.at("params").items())
      f.params[name] = ParamRange{r.at(0).get<double>(), r.at(1).get<double>()};
  return f;
}

PointCloud gen_shape(const ShapeFamily& family, std::uint64_t seed, std::int64_t index) {
  if (family.point_count < 1) throw Error("point_count must be >= 1");
  RngStream rng = RngStream::forked(seed, static_cast<std::uint64_t>(index));
  PointCloud pc;
  pc.positions.reserve(static_cast<std::size_t>(family.point_count));

  switch (family.kind) {
    case ShapeKind::Sphere: {
      const double r = sample_param(family, "radius", 1.0, rng);
      for (std::int64_t i = 0; i < family.point_count; ++i)
        pc.positions.push_back(sphere_point(r, rng));
      break;
    }
    case ShapeKind::Torus: {
      const double major = sample_param(family, "major", 1.0, rng);
      const double ratio = sample_param(family, "tube_ratio", 0.25, rng);
      for (std::int64_t i = 0; i < family.point_count; ++i)
        pc.positions.push_back(torus_point(major, major * ratio, rng));
      break;
    }
    case ShapeKind::Capsule: {
      const double r = sample_param(family, "radius", 0.3, rng);
      const double h = sample_param(family, "half_length", 0.7, rng);
      for (std::int64_t i = 0; i < family.point_count; ++i)
        pc.positions.push_back(capsule_point(r, h, rng));
      break;
    }
    case ShapeKind::Superquadric: {
      const double ax = sample_param(family, "ax", 1.0, rng);
      const double ay = sample_param(family, "ay", 0.8, rng);
      const double az = sample_param(family, "az", 0.6, rng);
      const double e1 = sample_param(family, "e1", 1.0, rng);
      const double e2 = sample_param(family, "e2", 1.0, rng);
      for (std::int64_t i = 0; i < family.point_count; ++i)
        pc.positions.push_back(superquadric_point(ax, ay, az, e1, e2, rng));
      break;
    }
    case ShapeKind::Figure: {
      const double torso_r = sample_param(family, "torso_r", 0.35, rng);
      const double torso_h = sample_param(family, "torso_h", 0.6, rng);
      const double head_r = sample_param(family, "head_r", 0.22, rng);
      const double arm_r = sample_param(family, "arm_r", 0.12, rng);
      const double arm_l = sample_param(family, "arm_l", 0.45, rng);
      for (std::int64_t i = 0; i < family.point_count; ++i)
        pc.positions.push_back(figure_point(torso_r, torso_h, head_r, arm_r, arm_l, rng));
      break;
    }
  }

  if (family.noise_sigma > 0.0)
    for (Vec3& p : pc.positions)
      p += Vec3{rng.gaussian(), rng.gaussian(), rng.gaussian()} * family.noise_sigma;

  normalize(pc);
  apply_colors(pc, family.color_mode);
  return pc;
}

std::vector<PointCloud> gen_shapes(const ShapeFamily& family, std::int64_t count,
                                   std::uint64_t seed) {
  if (count < 1) throw Error("count must be >= 1");
  std::vector<PointCloud> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(gen_shape(family, seed, i));
  return out;
}

PointCloud sphere_template(std::int64_t n, int colors) {
  if (n < 1) throw Error("template needs n >= 1");
  const std::int64_t dense_n = 4 * n;
  std::vector<Vec3> dense(static_cast<std::size_t>(dense_n));
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::int64_t i = 0; i < dense_n; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(dense_n);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double a = golden * static_cast<double>(i);
    dense[static_cast<std::size_t>(i)] = {r * std::cos(a), y, r * std::sin(a)};
  }
  auto picked = fps(dense, n);
  PointCloud pc;
  pc.positions.reserve(static_cast<std::size_t>(n));
  for (auto idx : picked) pc.positions.push_back(dense[static_cast<std::size_t>(idx)]);
  if (colors > 0) pc.colors.assign(static_cast<std::size_t>(n), Vec3{0.5, 0.5, 0.5});
  normalize(pc);
  return pc;
}

}  // namespace gcrec
