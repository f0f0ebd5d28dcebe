#include "codespot/corpus/corpus.hpp"

#include <array>
#include <cmath>
#include <random>
#include <set>
#include <string_view>

#include "codespot/corpus/vocabulary.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::corpus {

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

namespace {

std::size_t train_count(std::size_t n_docs, double split_ratio) {
  if (n_docs < 10) {
    fail(ErrorKind::kConfig, "corpus needs at least 10 documents, got " + std::to_string(n_docs));
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    fail(ErrorKind::kConfig, "split_ratio must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n_docs) * split_ratio));
  if (n_train == 0 || n_train >= n_docs) {
    fail(ErrorKind::kConfig, "split_ratio leaves an empty train or eval split");
  }
  return n_train;
}

CorpusSplits split_documents(std::string tag, std::vector<std::vector<int>> docs, std::size_t n_train) {
  CorpusSplits out;
  out.train.language_tag = tag;
  out.train.split = Split::kTrain;
  out.eval.language_tag = std::move(tag);
  out.eval.split = Split::kEval;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    (i < n_train ? out.train : out.eval).documents.push_back(std::move(docs[i]));
  }
  return out;
}

constexpr std::array<std::string_view, 21> kNumberWords = {
    "zero",  "one",    "two",    "three",    "four",     "five",    "six",
    "seven", "eight",  "nine",   "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};
constexpr std::array<std::string_view, 10> kNouns = {
    "cat", "dog", "bird", "tree", "house", "river", "child", "farmer", "book", "garden"};
constexpr std::array<std::string_view, 8> kAdjectives = {
    "small", "green", "old", "quiet", "happy", "tall", "bright", "slow"};
constexpr std::array<std::string_view, 8> kVerbs = {
    "sees", "likes", "finds", "follows", "watches", "helps", "visits", "leaves"};
constexpr std::array<std::string_view, 6> kNames = {"anna", "ben", "clara", "david", "emma", "felix"};
constexpr std::array<std::string_view, 5> kPlaces = {"near", "behind", "under", "beside", "past"};

class SentenceGenerator {
 public:
  explicit SentenceGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string document() {
    std::uniform_int_distribution<int> count(3, 6);
    const int n = count(rng_);
    std::string doc;
    for (int i = 0; i < n; ++i) {
      if (i > 0) doc += ' ';
      doc += sentence();
    }
    doc += '\n';
    return doc;
  }

 private:
  template <std::size_t N>
  std::string_view pick(const std::array<std::string_view, N>& words) {
    std::uniform_int_distribution<std::size_t> d(0, N - 1);
    return words[d(rng_)];
  }

  std::string sentence() {
    std::uniform_int_distribution<int> kind(0, 4);
    std::string s;
    switch (kind(rng_)) {
      case 0:
        s = "the " + std::string(pick(kAdjectives)) + " " + std::string(pick(kNouns)) + " " +
            std::string(pick(kVerbs)) + " the " + std::string(pick(kNouns)) + ".";
        break;
      case 1: {
        std::uniform_int_distribution<int> num(0, 10);
        const int a = num(rng_), b = num(rng_);
        s = std::string(kNumberWords[a]) + " plus " + std::string(kNumberWords[b]) + " makes " +
            std::string(kNumberWords[a + b]) + ".";
        break;
      }
      case 2:
        s = std::string(pick(kNames)) + " walks " + std::string(pick(kPlaces)) + " the " +
            std::string(pick(kNouns)) + ", and the " + std::string(pick(kNouns)) + " is " +
            std::string(pick(kAdjectives)) + ".";
        break;
      case 3: {
        std::uniform_int_distribution<int> num(2, 12);
        s = std::string(pick(kNames)) + " has " + std::string(kNumberWords[num(rng_)]) + " " +
            std::string(pick(kNouns)) + "s.";
        break;
      }
      default:
        s = "a " + std::string(pick(kNouns)) + " is " + std::string(pick(kAdjectives)) + ".";
        break;
    }
    return s;
  }

  std::mt19937_64 rng_;
};

}  // namespace

CorpusSplits generate_corpus(const MiniLanguageSpec& spec, std::size_t n_docs, double split_ratio) {
  const std::size_t n_train = train_count(n_docs, split_ratio);
  const auto& vocab = Vocabulary::standard();
  AstGenerator gen(spec.seed);
  // Distinctness is decided on the AST (via its canonical c_like rendering),
  // so every grammar keeps exactly the same programs for a given seed.
  std::set<std::string> seen;
  std::vector<std::vector<int>> docs;
  docs.reserve(n_docs);
  std::size_t attempts = 0;
  while (docs.size() < n_docs) {
    if (++attempts > 100 * n_docs) {
      fail(ErrorKind::kConfig, "cannot generate " + std::to_string(n_docs) + " distinct programs");
    }
    Program p = gen.next();
    if (!seen.insert(render(GrammarId::kCLike, p)).second) continue;
    docs.push_back(vocab.encode(render(spec.grammar, p)));
  }
  return split_documents(spec.name, std::move(docs), n_train);
}

CorpusSplits generate_general_corpus(std::uint64_t seed, std::size_t n_docs, double split_ratio) {
  const std::size_t n_train = train_count(n_docs, split_ratio);
  const auto& vocab = Vocabulary::standard();
  SentenceGenerator gen(seed);
  std::set<std::string> seen;
  std::vector<std::vector<int>> docs;
  std::size_t attempts = 0;
  while (docs.size() < n_docs) {
    if (++attempts > 100 * n_docs) {
      fail(ErrorKind::kConfig, "cannot generate " + std::to_string(n_docs) + " distinct documents");
    }
    std::string text = gen.document();
    if (!seen.insert(text).second) continue;
    docs.push_back(vocab.encode(text));
  }
  return split_documents(std::string(kGeneralTag), std::move(docs), n_train);
}

Corpus merge_corpora(const std::vector<const Corpus*>& parts, std::string tag) {
  Corpus out;
  out.language_tag = std::move(tag);
  for (const Corpus* c : parts) {
    out.split = c->split;
    out.documents.insert(out.documents.end(), c->documents.begin(), c->documents.end());
  }
  return out;
}

Corpus truncate_corpus(const Corpus& corpus, std::size_t max_docs) {
  Corpus out = corpus;
  if (max_docs > 0 && out.documents.size() > max_docs) out.documents.resize(max_docs);
  return out;
}

void dump_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const auto& vocab = Vocabulary::standard();
  std::string text;
  for (const auto& doc : corpus.documents) {
    std::string line = vocab.decode(doc);
    if (!line.empty() && line.back() == '\n') line.pop_back();
    for (char c : line) {
      if (c == '\n') {
        text += "\\n";
      } else {
        text += c;
      }
    }
    text += '\n';
  }
  write_text_file(path, text);
}

}  // namespace codespot::corpus
