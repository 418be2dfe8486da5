#ifndef DDL_SRC_BINARY_IO_HPP
#define DDL_SRC_BINARY_IO_HPP

// Little-endian primitives shared by the binary artifact formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include "ddl/core.hpp"

namespace ddl::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw Error("write failed: " + path_.string());
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    bytes(&v, sizeof v);
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error("cannot open " + path.string());
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError("truncated file: " + path_.string());
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }

  void expect_magic(const char (&magic)[4]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
      throw FormatError("bad magic in " + path_.string());
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace ddl::detail

#endif  // DDL_SRC_BINARY_IO_HPP
