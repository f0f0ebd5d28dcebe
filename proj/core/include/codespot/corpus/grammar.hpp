#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace codespot::corpus {

enum class GrammarId { kCLike, kLispLike, kRpnLike, kPyLike };

std::string_view to_string(GrammarId grammar);
// Accepts "c_like", "lisp_like", "rpn_like", "py_like".
GrammarId parse_grammar_id(std::string_view name);

// Arithmetic expression tree: a number literal, a variable, or a binary
// operation over two sub-expressions.
struct Expr {
  enum class Kind { kNumber, kVariable, kBinary };

  Kind kind = Kind::kNumber;
  int number = 0;
  char name = 0;  // variable name or operator symbol
  std::vector<Expr> operands;

  static Expr literal(int value);
  static Expr variable(char v);
  static Expr binary(char op, Expr lhs, Expr rhs);

  bool operator==(const Expr&) const = default;
};

struct Statement {
  char target = 0;
  Expr value;

  bool operator==(const Statement&) const = default;
};

struct Program {
  std::vector<Statement> statements;

  bool operator==(const Program&) const = default;
};

// Seeded stream of random programs. The stream depends only on the seed, so
// every grammar rendering the same seed sees the same sequence of ASTs.
class AstGenerator {
 public:
  explicit AstGenerator(std::uint64_t seed);

  Program next();

 private:
  Expr expression(int depth, const std::vector<char>& defined);

  std::mt19937_64 rng_;
};

// Renders a program as one document: one statement per line, each line
// terminated by '\n'.
std::string render(GrammarId grammar, const Program& program);

// Parses a whole document back into its AST. Returns nullopt when the text is
// not a well-formed program of that grammar or when a variable is read
// before it is assigned.
std::optional<Program> parse(GrammarId grammar, std::string_view document);

inline bool is_valid_document(GrammarId grammar, std::string_view document) {
  return parse(grammar, document).has_value();
}

}  // namespace codespot::corpus
