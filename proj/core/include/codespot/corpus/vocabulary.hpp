#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace codespot::corpus {

// Fixed character-level vocabulary shared by every mini-language and the
// general-text corpus. Id 0 is padding and never appears in documents.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr std::size_t kSize = 64;

  static const Vocabulary& standard();

  std::size_t size() const { return kSize; }
  bool contains(char c) const;
  int id_of(char c) const;   // data error when c is outside the vocabulary
  char symbol(int id) const; // '\0' for the padding id
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

 private:
  Vocabulary();

  std::array<int, 256> ids_{};
  std::string symbols_;
};

}  // namespace codespot::corpus
