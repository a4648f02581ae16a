#include "fedgid/container.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedgid {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', '1'};
constexpr int kFormatVersion = 1;

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f64") return 8;
  if (dtype == "i64") return 8;
  if (dtype == "u8") return 1;
  throw std::runtime_error("container: unknown dtype '" + dtype + "'");
}

std::string checksum_hex(const std::vector<unsigned char>& payload) {
  std::uint64_t h = fnv1a64(payload.data(), payload.size());
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("container: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

NamedArray NamedArray::f64(std::string name, std::vector<std::size_t> shape,
                           const double* src) {
  NamedArray a;
  a.name = std::move(name);
  a.dtype = "f64";
  a.shape = std::move(shape);
  a.bytes.resize(a.numel() * 8);
  std::memcpy(a.bytes.data(), src, a.bytes.size());
  return a;
}

NamedArray NamedArray::i64(std::string name, std::vector<std::size_t> shape,
                           const std::int64_t* src) {
  NamedArray a;
  a.name = std::move(name);
  a.dtype = "i64";
  a.shape = std::move(shape);
  a.bytes.resize(a.numel() * 8);
  std::memcpy(a.bytes.data(), src, a.bytes.size());
  return a;
}

NamedArray NamedArray::u8(std::string name, std::vector<std::size_t> shape,
                          const unsigned char* src) {
  NamedArray a;
  a.name = std::move(name);
  a.dtype = "u8";
  a.shape = std::move(shape);
  a.bytes.resize(a.numel());
  std::memcpy(a.bytes.data(), src, a.bytes.size());
  return a;
}

std::vector<double> NamedArray::as_f64() const {
  if (dtype != "f64") throw std::runtime_error("array '" + name + "' is not f64");
  std::vector<double> out(numel());
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::vector<std::int64_t> NamedArray::as_i64() const {
  if (dtype != "i64") throw std::runtime_error("array '" + name + "' is not i64");
  std::vector<std::int64_t> out(numel());
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::vector<unsigned char> NamedArray::as_u8() const {
  if (dtype != "u8") throw std::runtime_error("array '" + name + "' is not u8");
  return bytes;
}

const NamedArray& Container::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw std::runtime_error("container: missing array '" + name + "'");
}

bool Container::has_array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

void write_container(const std::string& path, const Container& c) {
  std::vector<unsigned char> payload;
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : c.arrays) {
    table.push_back({{"name", a.name},
                     {"dtype", a.dtype},
                     {"shape", a.shape},
                     {"offset", offset},
                     {"nbytes", a.bytes.size()}});
    payload.insert(payload.end(), a.bytes.begin(), a.bytes.end());
    offset += a.bytes.size();
  }

  nlohmann::json header = {{"format_version", kFormatVersion},
                           {"kind", c.kind},
                           {"meta", c.meta},
                           {"arrays", table},
                           {"payload_nbytes", payload.size()},
                           {"payload_checksum", checksum_hex(payload)}};
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("container: cannot open for write: " + path);
  os.write(kMagic, 4);
  write_u64_le(os, header_str.size());
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  os.flush();
  if (!os) throw std::runtime_error("container: write failed: " + path);
}

Container read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("container: cannot open: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("container: bad magic in " + path);
  }
  const std::uint64_t header_len = read_u64_le(is);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("container: truncated header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("container: corrupt header in " + path);
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw std::runtime_error("container: format version mismatch in " + path);
  }

  const std::size_t payload_nbytes = header.at("payload_nbytes");
  std::vector<unsigned char> payload(payload_nbytes);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload_nbytes));
  if (static_cast<std::size_t>(is.gcount()) != payload_nbytes) {
    throw std::runtime_error("container: truncated payload in " + path);
  }
  if (checksum_hex(payload) != header.at("payload_checksum").get<std::string>()) {
    throw std::runtime_error("container: checksum mismatch in " + path +
                             " (corrupt or truncated file)");
  }

  Container c;
  c.kind = header.at("kind");
  c.meta = header.at("meta");
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name");
    a.dtype = entry.at("dtype");
    a.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const std::size_t offset = entry.at("offset");
    const std::size_t nbytes = entry.at("nbytes");
    if (offset + nbytes > payload.size() || a.numel() * dtype_size(a.dtype) != nbytes) {
      throw std::runtime_error("container: inconsistent array table in " + path);
    }
    a.bytes.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                   payload.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
    c.arrays.push_back(std::move(a));
  }
  return c;
}

}  // namespace fedgid
