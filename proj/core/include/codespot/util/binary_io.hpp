#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace codespot {

// FNV-1a, 64-bit. Used for registry digests and content hashes.
class Fnv1a64 {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  void update_u64(std::uint64_t value);
  void update_f64(double value);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_doubles(std::span<const double> values);

// Little-endian binary encoder into an in-memory buffer.
class BinaryWriter {
 public:
  void magic(std::string_view tag);
  void u8(std::uint8_t value);
  void u32(std::uint32_t value);
  void u64(std::uint64_t value);
  void f64(double value);
  void string(std::string_view text);
  void f64_array(std::span<const double> values);
  void bytes(std::span<const std::uint8_t> data);

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buffer_;
};

// Little-endian decoder over a whole file. Every read past the end throws a
// data error naming the file.
class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);
  BinaryReader(std::vector<std::uint8_t> buffer, std::string label);

  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string();
  std::vector<double> f64_array(std::size_t count);
  std::vector<std::uint8_t> bytes(std::size_t count);
  bool at_end() const { return pos_ == buffer_.size(); }
  const std::string& label() const { return label_; }

 private:
  void need(std::size_t count) const;

  std::vector<std::uint8_t> buffer_;
  std::size_t pos_ = 0;
  std::string label_;
};

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace codespot
