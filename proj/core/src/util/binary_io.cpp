#include "codespot/util/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "codespot/util/error.hpp"

namespace codespot {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void Fnv1a64::update(std::span<const std::uint8_t> bytes) {
  for (std::uint8_t b : bytes) {
    state_ ^= b;
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a64::update(std::string_view text) {
  update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                   text.size()));
}

void Fnv1a64::update_u64(std::uint64_t value) {
  std::uint8_t raw[8];
  std::memcpy(raw, &value, 8);
  update(raw);
}

void Fnv1a64::update_f64(double value) {
  update_u64(std::bit_cast<std::uint64_t>(value));
}

std::uint64_t hash_doubles(std::span<const double> values) {
  Fnv1a64 h;
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(values.data()),
                     values.size_bytes()));
  return h.digest();
}

void BinaryWriter::magic(std::string_view tag) {
  buffer_.insert(buffer_.end(), tag.begin(), tag.end());
}

void BinaryWriter::u8(std::uint8_t value) { buffer_.push_back(value); }

void BinaryWriter::u32(std::uint32_t value) {
  for (int i = 0; i < 4; ++i) buffer_.push_back((value >> (8 * i)) & 0xff);
}

void BinaryWriter::u64(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) buffer_.push_back((value >> (8 * i)) & 0xff);
}

void BinaryWriter::f64(double value) { u64(std::bit_cast<std::uint64_t>(value)); }

void BinaryWriter::string(std::string_view text) {
  u32(static_cast<std::uint32_t>(text.size()));
  buffer_.insert(buffer_.end(), text.begin(), text.end());
}

void BinaryWriter::f64_array(std::span<const double> values) {
  const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
  buffer_.insert(buffer_.end(), raw, raw + values.size_bytes());
}

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

void BinaryWriter::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buffer_.data()),
            static_cast<std::streamsize>(buffer_.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : label_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  buffer_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

BinaryReader::BinaryReader(std::vector<std::uint8_t> buffer, std::string label)
    : buffer_(std::move(buffer)), label_(std::move(label)) {}

void BinaryReader::need(std::size_t count) const {
  if (buffer_.size() - pos_ < count) {
    fail(ErrorKind::kData, label_ + ": truncated file");
  }
}

void BinaryReader::expect_magic(std::string_view tag) {
  need(tag.size());
  if (std::memcmp(buffer_.data() + pos_, tag.data(), tag.size()) != 0) {
    fail(ErrorKind::kData, label_ + ": bad magic, expected " + std::string(tag));
  }
  pos_ += tag.size();
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return buffer_[pos_++];
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{buffer_[pos_++]} << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{buffer_[pos_++]} << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::string() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buffer_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<double> BinaryReader::f64_array(std::size_t count) {
  if (count > (buffer_.size() - pos_) / sizeof(double)) {
    fail(ErrorKind::kData, label_ + ": truncated payload");
  }
  std::vector<double> out(count);
  std::memcpy(out.data(), buffer_.data() + pos_, count * sizeof(double));
  pos_ += count * sizeof(double);
  return out;
}

std::vector<std::uint8_t> BinaryReader::bytes(std::size_t count) {
  need(count);
  std::vector<std::uint8_t> out(buffer_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                buffer_.begin() + static_cast<std::ptrdiff_t>(pos_ + count));
  pos_ += count;
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace codespot
