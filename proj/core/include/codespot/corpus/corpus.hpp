#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "codespot/corpus/grammar.hpp"

namespace codespot::corpus {

enum class Split { kTrain, kEval };

struct MiniLanguageSpec {
  std::string name;
  GrammarId grammar = GrammarId::kCLike;
  std::uint64_t seed = 0;
};

// Token-id documents of one language (or the general-text corpus) for one
// split. Ids come from Vocabulary::standard().
struct Corpus {
  std::string language_tag;
  std::vector<std::vector<int>> documents;
  Split split = Split::kTrain;

  std::size_t token_count() const;
  bool empty() const { return documents.empty(); }
};

struct CorpusSplits {
  Corpus train;
  Corpus eval;
};

inline constexpr std::string_view kGeneralTag = "general";

// Renders n_docs distinct programs from the language's AST stream. The first
// round(n_docs * split_ratio) documents form the training split.
CorpusSplits generate_corpus(const MiniLanguageSpec& spec, std::size_t n_docs, double split_ratio);

// Templated English-like sentences and spelled-out arithmetic statements. No
// program punctuation ( ';', '(', '=' ) ever appears.
CorpusSplits generate_general_corpus(std::uint64_t seed, std::size_t n_docs, double split_ratio);

// Concatenates the documents of several corpora, in argument order.
Corpus merge_corpora(const std::vector<const Corpus*>& parts, std::string tag);

// Keeps the first max_docs documents (all when max_docs == 0).
Corpus truncate_corpus(const Corpus& corpus, std::size_t max_docs);

// Writes one document per line as UTF-8 text. Line breaks inside a document
// are written as the two characters "\n".
void dump_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace codespot::corpus
