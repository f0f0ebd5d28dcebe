#include "codespot/corpus/vocabulary.hpp"

#include <string>

#include "codespot/util/error.hpp"

namespace codespot::corpus {

namespace {
// 63 printable symbols; index + 1 is the token id.
constexpr std::string_view kSymbols =
    "\n abcdefghijklmnopqrstuvwxyz0123456789()+-*/=;.,><!?:_[]{}#%&|^";
static_assert(kSymbols.size() + 1 == Vocabulary::kSize);
}  // namespace

Vocabulary::Vocabulary() : symbols_(kSymbols) {
  ids_.fill(-1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    ids_[static_cast<unsigned char>(symbols_[i])] = static_cast<int>(i + 1);
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab;
  return vocab;
}

bool Vocabulary::contains(char c) const { return ids_[static_cast<unsigned char>(c)] >= 0; }

int Vocabulary::id_of(char c) const {
  const int id = ids_[static_cast<unsigned char>(c)];
  if (id < 0) {
    fail(ErrorKind::kData, "character code " + std::to_string(static_cast<unsigned char>(c)) +
                               " is outside the vocabulary");
  }
  return id;
}

char Vocabulary::symbol(int id) const {
  if (id == kPad) return '\0';
  if (id < 1 || static_cast<std::size_t>(id) > symbols_.size()) {
    fail(ErrorKind::kData, "token id " + std::to_string(id) + " is outside the vocabulary");
  }
  return symbols_[static_cast<std::size_t>(id - 1)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(id_of(c));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id != kPad) out.push_back(symbol(id));
  }
  return out;
}

}  // namespace codespot::corpus
