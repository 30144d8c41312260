#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "gridssl/error.hpp"

namespace gridssl {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; byte swapping not implemented");

// Thin buffered writers/readers for the fixed little-endian binary formats.
class FileWriter {
 public:
  explicit FileWriter(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw IoError("cannot open for writing: " + path);
  }
  ~FileWriter() {
    if (f_) std::fclose(f_);
  }
  FileWriter(const FileWriter&) = delete;
  FileWriter& operator=(const FileWriter&) = delete;

  void magic(const char tag[5]) { raw(tag, 4); }
  void u8(std::uint8_t x) { raw(&x, 1); }
  void u32(std::uint32_t x) { raw(&x, 4); }
  void u64(std::uint64_t x) { raw(&x, 8); }
  void f64(double x) { raw(&x, 8); }
  void f64_array(const double* p, std::size_t n) { raw(p, n * 8); }

  void close() {
    if (f_ && std::fclose(f_) != 0) {
      f_ = nullptr;
      throw IoError("write failed: " + path_);
    }
    f_ = nullptr;
  }

 private:
  void raw(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f_) != n) throw IoError("write failed: " + path_);
  }
  std::string path_;
  std::FILE* f_ = nullptr;
};

class FileReader {
 public:
  explicit FileReader(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw IoError("cannot open: " + path);
  }
  ~FileReader() {
    if (f_) std::fclose(f_);
  }
  FileReader(const FileReader&) = delete;
  FileReader& operator=(const FileReader&) = delete;

  void expect_magic(const char tag[5], const std::string& what) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, tag, 4) != 0)
      throw IoError(path_ + ": not a " + what + " (bad magic)");
  }
  std::uint8_t u8() { std::uint8_t x; raw(&x, 1); return x; }
  std::uint32_t u32() { std::uint32_t x; raw(&x, 4); return x; }
  std::uint64_t u64() { std::uint64_t x; raw(&x, 8); return x; }
  double f64() { double x; raw(&x, 8); return x; }
  void f64_array(double* p, std::size_t n) { raw(p, n * 8); }

  void expect_eof(const std::string& what) {
    char c;
    if (std::fread(&c, 1, 1, f_) == 1)
      throw IoError(path_ + ": trailing bytes after " + what);
  }

 private:
  void raw(void* p, std::size_t n) {
    if (std::fread(p, 1, n, f_) != n)
      throw IoError(path_ + ": truncated file");
  }
  std::string path_;
  std::FILE* f_ = nullptr;
};

}  // namespace gridssl
