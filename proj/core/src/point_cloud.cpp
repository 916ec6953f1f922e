#include "gcrec/point_cloud.hpp"

#include <algorithm>

namespace gcrec {

Aabb PointCloud::bounds() const {
  Aabb box;
  for (const Vec3& p : positions) box.extend(p);
  return box;
}

void PointCloud::validate() const {
  if (positions.empty()) throw Error("empty cloud");
  for (const Vec3& p : positions)
    if (!p.finite()) throw NumericError("cloud has non-finite position");
  if (!colors.empty()) {
    if (colors.size() != positions.size()) throw ShapeError("color count != point count");
    for (const Vec3& c : colors)
      if (!c.finite() || c.x < 0 || c.x > 1 || c.y < 0 || c.y > 1 || c.z < 0 || c.z > 1)
        throw NumericError("color outside [0,1]");
  }
}

void PointCloud::clamp_colors() {
  for (Vec3& c : colors)
    for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i], 0.0, 1.0);
}

Tensor PointCloud::to_tensor() const {
  const std::int64_t n = size();
  const int ch = channels();
  Tensor t = Tensor::zeros({n, ch});
  auto d = t.data<double>();
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3& p = positions[static_cast<std::size_t>(i)];
    d[i * ch + 0] = p.x;
    d[i * ch + 1] = p.y;
    d[i * ch + 2] = p.z;
    if (ch == 6) {
      const Vec3& c = colors[static_cast<std::size_t>(i)];
      d[i * ch + 3] = c.x;
      d[i * ch + 4] = c.y;
      d[i * ch + 5] = c.z;
    }
  }
  return t;
}

PointCloud PointCloud::from_tensor(const Tensor& t, bool with_colors) {
  if (t.rank() != 2) throw ShapeError("cloud tensor must be [N, 3+c]");
  const std::int64_t n = t.dim(0), ch = t.dim(1);
  if (ch < 3 || (with_colors && ch < 6)) throw ShapeError("cloud tensor has too few channels");
  PointCloud pc;
  pc.positions.resize(static_cast<std::size_t>(n));
  if (with_colors) pc.colors.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    pc.positions[static_cast<std::size_t>(i)] = {t.at(i * ch), t.at(i * ch + 1), t.at(i * ch + 2)};
    if (with_colors)
      pc.colors[static_cast<std::size_t>(i)] = {t.at(i * ch + 3), t.at(i * ch + 4),
                                                t.at(i * ch + 5)};
  }
  if (with_colors) pc.clamp_colors();
  return pc;
}

void Mesh::validate() const {
  const auto v = static_cast<std::int32_t>(vertices.size());
  for (const auto& f : faces) {
    for (int i = 0; i < 3; ++i)
      if (f[static_cast<std::size_t>(i)] < 0 || f[static_cast<std::size_t>(i)] >= v)
        throw ShapeError("face index out of range");
    const Vec3 a = vertices[static_cast<std::size_t>(f[0])];
    const Vec3 b = vertices[static_cast<std::size_t>(f[1])];
    const Vec3 c = vertices[static_cast<std::size_t>(f[2])];
    if ((b - a).cross(c - a).norm2() == 0.0) throw NumericError("degenerate face");
  }
}

NormalizeTransform normalize(PointCloud& cloud) {
  cloud.validate();
  const Aabb box = cloud.bounds();
  NormalizeTransform t;
  t.offset = box.center();
  const double ext = box.max_extent();
  if (ext < 1e-30) {
    t.scale = 1.0;
    t.degenerate = true;
  } else {
    t.scale = 1.0 / ext;
  }
  for (Vec3& p : cloud.positions) p = t.apply(p);
  return t;
}

void denormalize(PointCloud& cloud, const NormalizeTransform& t) {
  for (Vec3& p : cloud.positions) p = t.invert(p);
}

std::vector<Vec3> positions_from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) < 3) throw ShapeError("positions need a [N, >=3] tensor");
  const std::int64_t n = t.dim(0), c = t.dim(1);
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = {t.at(i * c), t.at(i * c + 1), t.at(i * c + 2)};
  return out;
}

}  // namespace gcrec
