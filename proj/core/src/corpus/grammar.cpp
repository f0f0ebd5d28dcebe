#include "codespot/corpus/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "codespot/util/error.hpp"

namespace codespot::corpus {

std::string_view to_string(GrammarId grammar) {
  switch (grammar) {
    case GrammarId::kCLike: return "c_like";
    case GrammarId::kLispLike: return "lisp_like";
    case GrammarId::kRpnLike: return "rpn_like";
    case GrammarId::kPyLike: return "py_like";
  }
  return "unknown";
}

GrammarId parse_grammar_id(std::string_view name) {
  for (GrammarId g : {GrammarId::kCLike, GrammarId::kLispLike, GrammarId::kRpnLike,
                      GrammarId::kPyLike}) {
    if (to_string(g) == name) return g;
  }
  fail(ErrorKind::kConfig, "unknown grammar '" + std::string(name) + "'");
}

Expr Expr::literal(int value) {
  Expr e;
  e.kind = Kind::kNumber;
  e.number = value;
  return e;
}

Expr Expr::variable(char v) {
  Expr e;
  e.kind = Kind::kVariable;
  e.name = v;
  return e;
}

Expr Expr::binary(char op, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = Kind::kBinary;
  e.name = op;
  e.operands.push_back(std::move(lhs));
  e.operands.push_back(std::move(rhs));
  return e;
}

namespace {

constexpr std::string_view kVariables = "abcxyz";
constexpr std::string_view kOperators = "+-*";
constexpr int kMaxDepth = 2;
constexpr int kMaxLiteral = 99;

bool is_operator(char c) { return kOperators.find(c) != std::string_view::npos; }

std::string leaf_text(const Expr& e) {
  return e.kind == Expr::Kind::kNumber ? std::to_string(e.number) : std::string(1, e.name);
}

// ---- rendering ----

std::string infix(const Expr& e, bool spaced_parens);

std::string infix_operand(const Expr& e, bool spaced_parens) {
  if (e.kind != Expr::Kind::kBinary) return leaf_text(e);
  return spaced_parens ? "( " + infix(e, true) + " )" : "(" + infix(e, false) + ")";
}

std::string infix(const Expr& e, bool spaced_parens) {
  if (e.kind != Expr::Kind::kBinary) return leaf_text(e);
  return infix_operand(e.operands[0], spaced_parens) + " " + e.name + " " +
         infix_operand(e.operands[1], spaced_parens);
}

std::string sexpr(const Expr& e) {
  if (e.kind != Expr::Kind::kBinary) return leaf_text(e);
  return std::string("(") + e.name + " " + sexpr(e.operands[0]) + " " + sexpr(e.operands[1]) + ")";
}

std::string postfix(const Expr& e) {
  if (e.kind != Expr::Kind::kBinary) return leaf_text(e);
  return postfix(e.operands[0]) + " " + postfix(e.operands[1]) + " " + e.name;
}

std::string render_statement(GrammarId grammar, const Statement& s) {
  const std::string target(1, s.target);
  switch (grammar) {
    case GrammarId::kCLike: return target + " = " + infix(s.value, true) + " ;";
    case GrammarId::kPyLike: return target + " = " + infix(s.value, false);
    case GrammarId::kLispLike: return "(set " + target + " " + sexpr(s.value) + ")";
    case GrammarId::kRpnLike: return postfix(s.value) + " => " + target;
  }
  return {};
}

// ---- parsing ----

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool done() const { return pos_ == text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  bool eat(std::string_view token) {
    if (text_.substr(pos_, token.size()) != token) return false;
    pos_ += token.size();
    return true;
  }
  std::optional<char> take_if(bool (*pred)(char)) {
    if (done() || !pred(text_[pos_])) return std::nullopt;
    return text_[pos_++];
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

bool is_variable_char(char c) { return kVariables.find(c) != std::string_view::npos; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_op_char(char c) { return is_operator(c); }

std::optional<Expr> parse_number_text(std::string_view digits) {
  if (digits.empty() || digits.size() > 2) return std::nullopt;
  if (!std::all_of(digits.begin(), digits.end(), is_digit)) return std::nullopt;
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  int value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  return Expr::literal(value);
}

std::optional<Expr> parse_leaf(Cursor& cur, const std::set<char>& defined) {
  if (auto v = cur.take_if(is_variable_char)) {
    if (!defined.contains(*v)) return std::nullopt;
    return Expr::variable(*v);
  }
  std::string digits;
  while (auto d = cur.take_if(is_digit)) digits.push_back(*d);
  return parse_number_text(digits);
}

std::optional<Expr> parse_infix(Cursor& cur, bool spaced, const std::set<char>& defined);

std::optional<Expr> parse_infix_operand(Cursor& cur, bool spaced, const std::set<char>& defined) {
  if (cur.eat(spaced ? "( " : "(")) {
    auto inner = parse_infix(cur, spaced, defined);
    if (!inner || inner->kind != Expr::Kind::kBinary) return std::nullopt;
    if (!cur.eat(spaced ? " )" : ")")) return std::nullopt;
    return inner;
  }
  return parse_leaf(cur, defined);
}

std::optional<Expr> parse_infix(Cursor& cur, bool spaced, const std::set<char>& defined) {
  auto lhs = parse_infix_operand(cur, spaced, defined);
  if (!lhs) return std::nullopt;
  if (cur.peek() != ' ' || !is_operator(cur.peek(1))) return lhs;
  cur.eat(" ");
  auto op = cur.take_if(is_op_char);
  if (!op || !cur.eat(" ")) return std::nullopt;
  auto rhs = parse_infix_operand(cur, spaced, defined);
  if (!rhs) return std::nullopt;
  return Expr::binary(*op, std::move(*lhs), std::move(*rhs));
}

std::optional<Expr> parse_sexpr(Cursor& cur, const std::set<char>& defined) {
  if (cur.eat("(")) {
    auto op = cur.take_if(is_op_char);
    if (!op || !cur.eat(" ")) return std::nullopt;
    auto lhs = parse_sexpr(cur, defined);
    if (!lhs || !cur.eat(" ")) return std::nullopt;
    auto rhs = parse_sexpr(cur, defined);
    if (!rhs || !cur.eat(")")) return std::nullopt;
    return Expr::binary(*op, std::move(*lhs), std::move(*rhs));
  }
  return parse_leaf(cur, defined);
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(sep, start);
    if (at == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, at - start));
    start = at + 1;
  }
}

std::optional<Expr> parse_postfix(const std::vector<std::string_view>& tokens,
                                  const std::set<char>& defined) {
  std::vector<Expr> stack;
  for (std::string_view tok : tokens) {
    if (tok.size() == 1 && is_operator(tok[0])) {
      if (stack.size() < 2) return std::nullopt;
      Expr rhs = std::move(stack.back());
      stack.pop_back();
      Expr lhs = std::move(stack.back());
      stack.pop_back();
      stack.push_back(Expr::binary(tok[0], std::move(lhs), std::move(rhs)));
    } else {
      Cursor cur(tok);
      auto leaf = parse_leaf(cur, defined);
      if (!leaf || !cur.done()) return std::nullopt;
      stack.push_back(std::move(*leaf));
    }
  }
  if (stack.size() != 1) return std::nullopt;
  return std::move(stack.front());
}

int depth_of(const Expr& e) {
  if (e.kind != Expr::Kind::kBinary) return 0;
  return 1 + std::max(depth_of(e.operands[0]), depth_of(e.operands[1]));
}

std::optional<Statement> parse_statement(GrammarId grammar, std::string_view line,
                                         const std::set<char>& defined) {
  Statement s;
  if (grammar == GrammarId::kRpnLike) {
    auto tokens = split(line, ' ');
    if (tokens.size() < 3 || tokens[tokens.size() - 2] != "=>") return std::nullopt;
    const std::string_view target = tokens.back();
    if (target.size() != 1 || !is_variable_char(target[0])) return std::nullopt;
    tokens.resize(tokens.size() - 2);
    auto value = parse_postfix(tokens, defined);
    if (!value) return std::nullopt;
    s.target = target[0];
    s.value = std::move(*value);
  } else {
    Cursor cur(line);
    std::optional<Expr> value;
    if (grammar == GrammarId::kLispLike) {
      if (!cur.eat("(set ")) return std::nullopt;
      auto target = cur.take_if(is_variable_char);
      if (!target || !cur.eat(" ")) return std::nullopt;
      s.target = *target;
      value = parse_sexpr(cur, defined);
      if (!value || !cur.eat(")")) return std::nullopt;
    } else {
      auto target = cur.take_if(is_variable_char);
      if (!target || !cur.eat(" = ")) return std::nullopt;
      s.target = *target;
      value = parse_infix(cur, grammar == GrammarId::kCLike, defined);
      if (!value) return std::nullopt;
      if (grammar == GrammarId::kCLike && !cur.eat(" ;")) return std::nullopt;
    }
    if (!cur.done()) return std::nullopt;
    s.value = std::move(*value);
  }
  if (depth_of(s.value) > kMaxDepth) return std::nullopt;
  return s;
}

}  // namespace

AstGenerator::AstGenerator(std::uint64_t seed) : rng_(seed) {}

Expr AstGenerator::expression(int depth, const std::vector<char>& defined) {
  std::bernoulli_distribution stop(0.35);
  if (depth == 0 || stop(rng_)) {
    std::bernoulli_distribution use_var(0.3);
    if (!defined.empty() && use_var(rng_)) {
      std::uniform_int_distribution<std::size_t> pick(0, defined.size() - 1);
      return Expr::variable(defined[pick(rng_)]);
    }
    std::uniform_int_distribution<int> lit(0, kMaxLiteral);
    return Expr::literal(lit(rng_));
  }
  std::uniform_int_distribution<std::size_t> op(0, kOperators.size() - 1);
  const char symbol = kOperators[op(rng_)];
  Expr lhs = expression(depth - 1, defined);
  Expr rhs = expression(depth - 1, defined);
  return Expr::binary(symbol, std::move(lhs), std::move(rhs));
}

Program AstGenerator::next() {
  std::uniform_int_distribution<int> count(3, 6);
  std::uniform_int_distribution<std::size_t> var(0, kVariables.size() - 1);
  Program program;
  std::vector<char> defined;
  const int n = count(rng_);
  for (int i = 0; i < n; ++i) {
    Statement s;
    s.value = expression(kMaxDepth, defined);
    s.target = kVariables[var(rng_)];
    if (std::find(defined.begin(), defined.end(), s.target) == defined.end()) {
      defined.push_back(s.target);
    }
    program.statements.push_back(std::move(s));
  }
  return program;
}

std::string render(GrammarId grammar, const Program& program) {
  std::string out;
  for (const Statement& s : program.statements) {
    out += render_statement(grammar, s);
    out += '\n';
  }
  return out;
}

std::optional<Program> parse(GrammarId grammar, std::string_view document) {
  if (document.empty() || document.back() != '\n') return std::nullopt;
  Program program;
  std::set<char> defined;
  for (std::string_view line : split(document.substr(0, document.size() - 1), '\n')) {
    if (line.empty()) return std::nullopt;
    auto s = parse_statement(grammar, line, defined);
    if (!s) return std::nullopt;
    defined.insert(s->target);
    program.statements.push_back(std::move(*s));
  }
  return program;
}

}  // namespace codespot::corpus
