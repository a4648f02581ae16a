#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

namespace fedgid {

// Self-describing binary container: magic, JSON header (kind, metadata, array
// table, payload checksum), then raw little-endian arrays. One format for
// datasets, partitions and checkpoints so round trips stay bit-exact.

std::uint64_t fnv1a64(const unsigned char* p, std::size_t n);

struct NamedArray {
  std::string name;
  std::string dtype;  // "f64" | "i64" | "u8"
  std::vector<std::size_t> shape;
  std::vector<unsigned char> bytes;

  std::size_t numel() const {
    std::size_t n = shape.empty() ? 0 : 1;
    for (auto d : shape) n *= d;
    return n;
  }

  static NamedArray f64(std::string name, std::vector<std::size_t> shape,
                        const double* src);
  static NamedArray i64(std::string name, std::vector<std::size_t> shape,
                        const std::int64_t* src);
  static NamedArray u8(std::string name, std::vector<std::size_t> shape,
                       const unsigned char* src);

  std::vector<double> as_f64() const;
  std::vector<std::int64_t> as_i64() const;
  std::vector<unsigned char> as_u8() const;
};

struct Container {
  std::string kind;
  nlohmann::json meta;
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void write_container(const std::string& path, const Container& c);

// Throws std::runtime_error on bad magic, version mismatch, truncation or
// checksum failure.
Container read_container(const std::string& path);

}  // namespace fedgid
