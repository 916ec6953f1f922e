#include "gcrec/ply_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace gcrec {

namespace {

struct Property {
  std::string name;
  std::string type;
};

std::size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error("ply: unsupported property type '" + t + "'");
}

double read_binary_value(const char* p, const std::string& t) {
  if (t == "float" || t == "float32") {
    float v;
    std::memcpy(&v, p, 4);
    return v;
  }
  if (t == "double" || t == "float64") {
    double v;
    std::memcpy(&v, p, 8);
    return v;
  }
  if (t == "uchar" || t == "uint8") {
    std::uint8_t v;
    std::memcpy(&v, p, 1);
    return v;
  }
  throw Error("ply: unsupported value type '" + t + "' for vertex data");
}

double dequant_color(double byte_value) { return (byte_value + 0.5) / 256.0; }

std::uint8_t quant_color(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 256.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

}  // namespace

PointCloud load_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line.substr(0, 3) != "ply")
    throw Error("ply: malformed header (missing magic)");
  std::string format;
  std::int64_t vertex_count = -1;
  std::vector<Property> props;
  bool in_vertex = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "format") {
      ls >> format;
    } else if (tok == "element") {
      std::string name;
      std::int64_t count;
      ls >> name >> count;
      in_vertex = (name == "vertex");
      if (in_vertex) vertex_count = count;
      else if (count != 0) throw Error("ply: only vertex elements are supported");
    } else if (tok == "property") {
      if (!in_vertex) continue;
      Property p;
      ls >> p.type;
      if (p.type == "list") throw Error("ply: list properties unsupported on vertices");
      ls >> p.name;
      props.push_back(p);
    } else if (tok == "end_header") {
      break;
    } else if (tok.empty()) {
      continue;
    } else if (tok != "ply") {
      throw Error("ply: malformed header line '" + line + "'");
    }
  }
  if (format != "ascii" && format != "binary_little_endian")
    throw Error("ply: unsupported format '" + format + "'");
  if (vertex_count < 0) throw Error("ply: no vertex element");
  if (vertex_count == 0) throw Error("empty cloud");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    const std::string& n = props[static_cast<std::size_t>(i)].name;
    if (n == "x") ix = i;
    else if (n == "y") iy = i;
    else if (n == "z") iz = i;
    else if (n == "red") ir = i;
    else if (n == "green") ig = i;
    else if (n == "blue") ib = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error("ply: vertex element lacks x/y/z");
  const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;

  PointCloud pc;
  pc.positions.resize(static_cast<std::size_t>(vertex_count));
  if (has_rgb) pc.colors.resize(static_cast<std::size_t>(vertex_count));

  if (format == "ascii") {
    std::vector<double> vals(props.size());
    for (std::int64_t v = 0; v < vertex_count; ++v) {
      for (std::size_t p = 0; p < props.size(); ++p)
        if (!(is >> vals[p])) throw Error("ply: truncated ascii payload");
      pc.positions[static_cast<std::size_t>(v)] = {vals[static_cast<std::size_t>(ix)],
                                                   vals[static_cast<std::size_t>(iy)],
                                                   vals[static_cast<std::size_t>(iz)]};
      if (has_rgb)
        pc.colors[static_cast<std::size_t>(v)] = {dequant_color(vals[static_cast<std::size_t>(ir)]),
                                                  dequant_color(vals[static_cast<std::size_t>(ig)]),
                                                  dequant_color(vals[static_cast<std::size_t>(ib)])};
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(props.size());
    for (std::size_t p = 0; p < props.size(); ++p) {
      offsets[p] = stride;
      stride += type_size(props[p].type);
    }
    std::vector<char> row(stride);
    for (std::int64_t v = 0; v < vertex_count; ++v) {
      is.read(row.data(), static_cast<std::streamsize>(stride));
      if (!is) throw Error("ply: truncated binary payload");
      auto get = [&](int p) {
        return read_binary_value(row.data() + offsets[static_cast<std::size_t>(p)],
                                 props[static_cast<std::size_t>(p)].type);
      };
      pc.positions[static_cast<std::size_t>(v)] = {get(ix), get(iy), get(iz)};
      if (has_rgb)
        pc.colors[static_cast<std::size_t>(v)] = {dequant_color(get(ir)), dequant_color(get(ig)),
                                                  dequant_color(get(ib))};
    }
  }
  pc.validate();
  return pc;
}

void save_ply(const PointCloud& cloud, const std::string& path, PlyFormat format) {
  cloud.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  const bool rgb = cloud.has_colors();
  os << "ply\n";
  os << "format " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  os << "element vertex " << cloud.size() << "\n";
  const char* coord_type = format == PlyFormat::Ascii ? "float" : "double";
  os << "property " << coord_type << " x\n";
  os << "property " << coord_type << " y\n";
  os << "property " << coord_type << " z\n";
  if (rgb) {
    os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  os << "end_header\n";
  if (format == PlyFormat::Ascii) {
    char buf[64];
    auto fmt = [&](double v) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, end);
    };
    for (std::int64_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
      os << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z);
      if (rgb) {
        const Vec3& c = cloud.colors[static_cast<std::size_t>(i)];
        os << ' ' << static_cast<int>(quant_color(c.x)) << ' ' << static_cast<int>(quant_color(c.y))
           << ' ' << static_cast<int>(quant_color(c.z));
      }
      os << '\n';
    }
  } else {
    for (std::int64_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
      os.write(reinterpret_cast<const char*>(&p.x), 8);
      os.write(reinterpret_cast<const char*>(&p.y), 8);
      os.write(reinterpret_cast<const char*>(&p.z), 8);
      if (rgb) {
        const Vec3& c = cloud.colors[static_cast<std::size_t>(i)];
        const std::uint8_t rv = quant_color(c.x), gv = quant_color(c.y), bv = quant_color(c.z);
        os.write(reinterpret_cast<const char*>(&rv), 1);
        os.write(reinterpret_cast<const char*>(&gv), 1);
        os.write(reinterpret_cast<const char*>(&bv), 1);
      }
    }
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

}  // namespace gcrec
