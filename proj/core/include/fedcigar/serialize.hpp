#pragma once

// Byte-level encoding shared by checkpoints and client uploads. All integers
// and reals are little-endian regardless of host byte order.
//
// Parameter blob:
//   "FCGP" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes | u32 rows | u32 cols | f64[rows*cols] row-major )

#include "fedcigar/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedcigar {

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> data);
  void str(const std::string& s);
  void matrix(const Matrix& m);  // u32 rows | u32 cols | row-major f64

  const Bytes& bytes() const { return bytes_; }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Matrix matrix();
  void expect_magic(const char (&magic)[5]);
  bool done() const { return pos_ == data_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kParamBlobVersion = 1;

void write_param_blob(ByteWriter& out, const std::vector<const ad::Tensor*>& tensors);
/// Reads a parameter blob. Tensors come back with requires_grad set.
std::vector<ad::Tensor> read_param_blob(ByteReader& in);

/// Row-major little-endian f64 encoding of a matrix without any header;
/// used to look for raw data inside serialized messages.
Bytes raw_matrix_bytes(const Matrix& m);

void write_file(const std::filesystem::path& path, const Bytes& bytes);
Bytes read_file(const std::filesystem::path& path);

}  // namespace fedcigar
