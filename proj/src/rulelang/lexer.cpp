#include <cstring>

#include "shmkb/token.hpp"

namespace shmkb {
namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_separator(char c) { return c != '\0' && std::strchr("!\"(),/;=<>?\\[]{|}:'", c) != nullptr; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_blanks_and_comments();
      if (pos_ >= text_.size()) break;
      out.push_back(next());
    }
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
      ++pos_;
    }
  }

  SourcePosition here() const { return {line_, column_}; }

  void skip_blanks_and_comments() {
    while (pos_ < text_.size()) {
      if (is_blank(peek())) {
        advance();
      } else if (peek() == '/' && peek(1) == '*') {
        const auto start = here();
        const auto end = text_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) throw LexError("unterminated comment", start);
        advance(end + 2 - pos_);
      } else {
        break;
      }
    }
  }

  Token make(TokenKind kind, std::string text, SourcePosition pos, std::size_t start) const {
    return Token{kind, std::move(text), pos, start, pos_ - start};
  }

  // Word characters up to a separator, blank, quote, or an operator that may
  // follow a word directly (`x+=1`, `a->b`).
  std::string read_word() {
    std::string out;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (is_blank(c) || is_separator(c)) break;
      if ((c == '+' || c == '-') && peek(1) == '=') break;
      if (c == '-' && peek(1) == '>') break;
      if (c == '/' && peek(1) == '*') break;
      out += c;
      advance();
    }
    return out;
  }

  Token quoted(char quote, TokenKind kind) {
    const auto pos = here();
    const auto start = pos_;
    const auto end = text_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) {
      throw LexError(std::string("unterminated ") + (quote == '\'' ? "single" : "double") + " quote", pos);
    }
    std::string inner(text_.substr(pos_ + 1, end - pos_ - 1));
    advance(end + 1 - pos_);
    return make(kind, std::move(inner), pos, start);
  }

  Token next() {
    const auto pos = here();
    const auto start = pos_;
    const char c = peek();
    const char d = peek(1);

    if (c == '\'') return quoted('\'', TokenKind::QuotedWord);
    if (c == '"') return quoted('"', TokenKind::QuotedSequence);

    static constexpr const char* kOperators[] = {"==", "!=", ":=", "+=", "-=", ">=", "<="};
    for (const char* op : kOperators) {
      if (c == op[0] && d == op[1]) {
        advance(2);
        return make(TokenKind::Operator, op, pos, start);
      }
    }
    if (c == '-' && d == '>') {
      advance(2);
      return make(TokenKind::Arrow, "->", pos, start);
    }
    if (c == '-' && is_blank(d)) {
      // "- >" with blanks in between is read as the arrow
      std::size_t k = pos_ + 1;
      while (k < text_.size() && is_blank(text_[k]) && text_[k] != '\n') ++k;
      if (k < text_.size() && text_[k] == '>' && (k + 1 >= text_.size() || text_[k + 1] != '=')) {
        advance(k + 1 - pos_);
        return make(TokenKind::Arrow, "->", pos, start);
      }
    }
    switch (c) {
      case ';': advance(); return make(TokenKind::RuleEnd, ";", pos, start);
      case '|': advance(); return make(TokenKind::Bar, "|", pos, start);
      case '(':
      case '<':
      case '[':
      case '{': advance(); return make(TokenKind::BracketOpen, std::string(1, c), pos, start);
      case ')':
      case '>':
      case ']':
      case '}': advance(); return make(TokenKind::BracketClose, std::string(1, c), pos, start);
      case '!':
      case ',':
      case '/':
      case '=':
      case '?':
      case '\\':
      case ':': advance(); return make(TokenKind::Separator, std::string(1, c), pos, start);
      default: break;
    }
    if (c == '#' || c == '$') {
      advance();
      std::string name = read_word();
      if (name.empty()) throw LexError(std::string("missing name after '") + c + "'", pos);
      return make(c == '#' ? TokenKind::FunctionName : TokenKind::NonExecName, std::move(name), pos, start);
    }
    std::string word = read_word();
    if (word.empty()) {
      // a lone '+' or '-' before '=' / '>' that did not form an operator
      word = std::string(1, c);
      advance();
    }
    return make(TokenKind::Word, std::move(word), pos, start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

}  // namespace

int Token::bracket_code() const {
  switch (text.empty() ? '\0' : text[0]) {
    case '(':
    case ')': return 0;
    case '<':
    case '>': return 1;
    case '[':
    case ']': return 2;
    case '{':
    case '}': return 3;
    default: return -1;
  }
}

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Word: return "word";
    case TokenKind::QuotedWord: return "quoted word";
    case TokenKind::QuotedSequence: return "quoted sequence";
    case TokenKind::FunctionName: return "function name";
    case TokenKind::NonExecName: return "non-executable name";
    case TokenKind::Separator: return "separator";
    case TokenKind::Operator: return "operator";
    case TokenKind::BracketOpen: return "opening bracket";
    case TokenKind::BracketClose: return "closing bracket";
    case TokenKind::RuleEnd: return "';'";
    case TokenKind::Arrow: return "'->'";
    case TokenKind::Bar: return "'|'";
  }
  return "token";
}

std::vector<Token> tokenize(std::string_view text) { return Lexer(text).run(); }

}  // namespace shmkb
