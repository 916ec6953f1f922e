#include "gcrec/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gcrec {

static_assert(std::endian::native == std::endian::little,
              "container IO assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'G', 'C', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("container: truncated read");
  return v;
}
}  // namespace

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = entries_.emplace(name, Entry{});
  if (!inserted) throw Error("ParamStore: duplicate name '" + name + "'");
  it->second.grad = Tensor::zeros(init.shape(), init.dtype());
  it->second.value = std::move(init);
  return it->second.value;
}

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown name '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) { return entry(name).grad; }

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown name '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (auto& [n, _] : entries_) out.push_back(n);
  return out;
}

bool ParamStore::bit_equal_values(const ParamStore& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = o.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (!a->second.value.bit_equal(b->second.value)) return false;
  }
  return true;
}

void ParamStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    if (name.size() > 0xffff) throw Error("parameter name too long");
    write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(e.value.dtype()));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(e.value.rank()));
    for (auto ext : e.value.shape()) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(ext));
    if (e.value.dtype() == DType::F64) {
      auto d = e.value.data<double>();
      os.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(double)));
    } else {
      auto d = e.value.data<float>();
      os.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(float)));
    }
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("'" + path + "' is not a parameter container");
  auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) throw Error("unsupported container version " + std::to_string(version));
  auto count = read_pod<std::uint32_t>(is);
  ParamStore ps;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = read_pod<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto dtype_raw = read_pod<std::uint8_t>(is);
    if (dtype_raw > 1) throw Error("bad dtype byte in container");
    DType dt = static_cast<DType>(dtype_raw);
    auto rank = read_pod<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& ext : shape) ext = static_cast<std::int64_t>(read_pod<std::uint64_t>(is));
    Tensor t = Tensor::zeros(shape, dt);
    if (dt == DType::F64) {
      auto d = t.data<double>();
      is.read(reinterpret_cast<char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
    } else {
      auto d = t.data<float>();
      is.read(reinterpret_cast<char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(float)));
    }
    if (!is) throw Error("container: truncated tensor payload");
    ps.add(name, std::move(t));
  }
  return ps;
}

}  // namespace gcrec
