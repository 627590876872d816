#pragma once

// Little-endian binary stream helpers shared by the grid, point-cloud and
// window-exchange formats. The build targets little-endian hosts; a static
// assert guards the assumption.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace voxrec {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian");

// Distinguished from generic runtime errors so the CLI can map file-system
// failures to their own exit code.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void io_error(const std::string& what, const std::string& path) {
  throw IoError(what + ": " + path);
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void write_span(std::ostream& os, std::span<const T> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated stream");
  return v;
}

template <typename T>
void read_span(std::istream& is, std::span<T> v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(T)));
  if (!is) throw std::runtime_error("truncated stream");
}

inline std::ofstream open_output(const std::string& path, bool binary = true) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) io_error("cannot open for writing", path);
  return os;
}

inline std::ifstream open_input(const std::string& path, bool binary = true) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) io_error("cannot open for reading", path);
  return is;
}

}  // namespace voxrec
