#include "fedcigar/serialize.hpp"

#include "fedcigar/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fedcigar {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::matrix(const Matrix& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n)
    throw FormatError("<blob>", pos_, "truncated data: need " + std::to_string(n) + " more bytes");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

Matrix ByteReader::matrix() {
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  need(static_cast<std::size_t>(rows) * cols * 8);
  Matrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

void ByteReader::expect_magic(const char (&magic)[5]) {
  need(4);
  if (std::memcmp(data_.data() + pos_, magic, 4) != 0)
    throw FormatError("<blob>", pos_, std::string("bad magic, expected ") + magic);
  pos_ += 4;
}

void write_param_blob(ByteWriter& out, const std::vector<const ad::Tensor*>& tensors) {
  static constexpr std::uint8_t magic[] = {'F', 'C', 'G', 'P'};
  out.raw(magic);
  out.u32(kParamBlobVersion);
  out.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const ad::Tensor* t : tensors) {
    out.str(t->name);
    out.matrix(t->value);
  }
}

std::vector<ad::Tensor> read_param_blob(ByteReader& in) {
  in.expect_magic("FCGP");
  const std::uint32_t version = in.u32();
  if (version != kParamBlobVersion)
    throw FormatError("<blob>", in.position(), "unsupported blob version " + std::to_string(version));
  const std::uint32_t count = in.u32();
  std::vector<ad::Tensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.str();
    tensors.emplace_back(std::move(name), in.matrix());
  }
  return tensors;
}

Bytes raw_matrix_bytes(const Matrix& m) {
  ByteWriter w;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  return w.take();
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace fedcigar
