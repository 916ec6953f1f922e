#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcrec/tensor.hpp"

namespace gcrec {

/// Named parameter tensors with matching gradient buffers.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  /// Registers a parameter; the name must be unused.
  Tensor& add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  Entry& entry(const std::string& name);

  void zero_grad();
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> names() const;

  /// Entries in name order (the serialization and iteration order).
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  bool bit_equal_values(const ParamStore& o) const;

  /// Adopts values from a store with identical names and shapes.
  void copy_values_from(const ParamStore& src);

  /// Flat binary container, little-endian, bit-exact round trip.
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace gcrec
