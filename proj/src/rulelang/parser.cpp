#include <charconv>
#include <cmath>
#include <memory>

#include "shmkb/ast.hpp"

namespace shmkb {

bool Term::operator==(const Term& o) const {
  return kind == o.kind && text == o.text && number == o.number && code == o.code && items == o.items;
}

bool Sentence::operator==(const Sentence& o) const {
  return kind == o.kind && name == o.name && args == o.args && terms == o.terms && code == o.code &&
         items == o.items;
}

bool RuleAst::operator==(const RuleAst& o) const {
  return a1 == o.a1 && a2 == o.a2 && a3 == o.a3 && right == o.right && cond == o.cond;
}

std::optional<Number> parse_number_word(std::string_view w) {
  if (w.empty()) return std::nullopt;
  std::size_t lead = (w[0] == '-') ? 1 : 0;
  if (lead >= w.size()) return std::nullopt;
  const char first = w[lead];
  const bool digit_first = first >= '0' && first <= '9';
  const bool dot_first = first == '.' && lead + 1 < w.size() && w[lead + 1] >= '0' && w[lead + 1] <= '9';
  if (!digit_first && !dot_first) return std::nullopt;

  const char* begin = w.data();
  const char* end = w.data() + w.size();
  if (w.size() - lead > 1 && first == '0' && w.find_first_not_of("01234567", lead) == std::string_view::npos) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(begin + lead, end, v, 8);
    if (ec == std::errc{} && p == end) return Number{lead ? -v : v};
  }
  std::int64_t i = 0;
  if (auto [p, ec] = std::from_chars(begin, end, i); ec == std::errc{} && p == end) return Number{i};
  double d = 0;
  if (auto [p, ec] = std::from_chars(begin, end, d); ec == std::errc{} && p == end && std::isfinite(d)) {
    return Number{d};
  }
  return std::nullopt;
}

std::optional<std::string> sugar_function(std::string_view op) {
  if (op == "==") return "Eq";
  if (op == "!=") return "Ne";
  if (op == ":=") return "Fix";
  if (op == "+=") return "Inc";
  if (op == "-=") return "Dec";
  if (op == ">=") return "Ge";
  if (op == "<=") return "Le";
  return std::nullopt;
}

namespace {

// Bracket-level parse tree; turned into terms or sentences by context.
struct Element {
  enum class Kind { Token, Group, Call, Named, SecondLevel, Bang, Op };
  Kind kind = Kind::Token;
  Token token;
  Code code = Code::Sequence;
  std::vector<std::vector<Element>> segments;  // Group, comma-separated
  std::shared_ptr<Element> args;               // Call / Named: the argument group, if any
};

enum class Context { Plain, Condition };

const char kOpenFor[] = {'(', '<', '[', '{'};
const char kCloseFor[] = {')', '>', ']', '}'};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  bool done() const { return pos_ >= tokens_.size(); }

  RuleAst rule() {
    if (done()) throw ParseError("empty rule", end_position());
    RuleAst ast;
    ast.position = tokens_[pos_].position;
    if (peek_kind(TokenKind::RuleEnd)) throw ParseError("empty rule", ast.position);

    auto left = sequence({TokenKind::Arrow, TokenKind::RuleEnd});
    if (!peek_kind(TokenKind::Arrow)) {
      throw ParseError("expected '->' in rule", done() ? end_position() : tokens_[pos_].position);
    }
    ++pos_;
    auto right = sequence({TokenKind::Bar, TokenKind::RuleEnd});
    std::vector<std::vector<Element>> cond;
    if (peek_kind(TokenKind::Bar)) {
      ++pos_;
      cond = sequence({TokenKind::RuleEnd});
      if (cond.empty()) throw ParseError("empty condition after '|'", here());
    }
    if (!peek_kind(TokenKind::RuleEnd)) throw ParseError("missing ';' at end of rule", here());
    ++pos_;

    if (left.size() > 3) throw ParseError("left part has more than three terms (A1, A2, A3)", ast.position);
    if (!left.empty()) ast.a1 = sentence(left[0], Context::Plain);
    if (left.size() > 1) ast.a2 = sentence(left[1], Context::Plain);
    if (left.size() > 2) ast.a3 = condition(left[2]);
    for (auto& seg : right) ast.right.push_back(sentence(seg, Context::Plain));
    if (!cond.empty()) {
      Sentence c;
      c.kind = Sentence::Kind::Cond;
      c.code = Code::Sequence;
      c.position = first_position(cond.front());
      for (auto& seg : cond) append_sentences(seg, Context::Condition, c.items);
      ast.cond = std::move(c);
    }
    if (!ast.a1 && ast.right.empty()) throw ParseError("rule has neither a left nor a right part", ast.position);
    return ast;
  }

 private:
  SourcePosition end_position() const { return tokens_.empty() ? SourcePosition{} : tokens_.back().position; }
  SourcePosition here() const { return done() ? end_position() : tokens_[pos_].position; }
  bool peek_kind(TokenKind k) const { return !done() && tokens_[pos_].kind == k; }
  bool peek_separator(char c) const {
    return peek_kind(TokenKind::Separator) && tokens_[pos_].text.size() == 1 && tokens_[pos_].text[0] == c;
  }

  static SourcePosition first_position(const std::vector<Element>& seg) {
    return seg.empty() ? SourcePosition{} : seg.front().token.position;
  }

  // Comma-separated element lists up to one of `stops` at bracket depth 0.
  // Trailing commas are allowed; empty segments are dropped.
  std::vector<std::vector<Element>> sequence(std::initializer_list<TokenKind> stops) {
    std::vector<std::vector<Element>> out;
    std::vector<Element> current;
    while (!done()) {
      const auto& t = tokens_[pos_];
      bool stop = false;
      for (auto k : stops) stop = stop || t.kind == k;
      if (stop) break;
      if (t.kind == TokenKind::RuleEnd || t.kind == TokenKind::Arrow || t.kind == TokenKind::Bar) {
        throw ParseError(std::string("unexpected ") + to_string(t.kind), t.position);
      }
      if (peek_separator(',')) {
        ++pos_;
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
        continue;
      }
      current.push_back(element());
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
  }

  Element group() {
    const Token open = tokens_[pos_++];
    Element g;
    g.kind = Element::Kind::Group;
    g.token = open;
    g.code = static_cast<Code>(open.bracket_code());
    std::vector<Element> current;
    while (true) {
      if (done()) throw ParseError(std::string("unbalanced '") + open.text + "'", open.position);
      const auto& t = tokens_[pos_];
      if (t.kind == TokenKind::BracketClose) {
        if (t.bracket_code() != open.bracket_code()) {
          throw ParseError(std::string("'") + t.text + "' does not close '" + open.text + "' opened at " +
                               std::to_string(open.position.line) + ":" + std::to_string(open.position.column),
                           t.position);
        }
        ++pos_;
        break;
      }
      if (t.kind == TokenKind::RuleEnd || t.kind == TokenKind::Arrow || t.kind == TokenKind::Bar) {
        throw ParseError(std::string("unbalanced '") + open.text + "' before " + to_string(t.kind), open.position);
      }
      if (peek_separator(',')) {
        ++pos_;
        if (!current.empty()) g.segments.push_back(std::move(current));
        current.clear();
        continue;
      }
      current.push_back(element());
    }
    if (!current.empty()) g.segments.push_back(std::move(current));
    return g;
  }

  Element element() {
    const Token& t = tokens_[pos_];
    Element e;
    e.token = t;
    switch (t.kind) {
      case TokenKind::BracketOpen: return group();
      case TokenKind::BracketClose: throw ParseError("unbalanced '" + t.text + "'", t.position);
      case TokenKind::Operator: ++pos_; e.kind = Element::Kind::Op; return e;
      case TokenKind::FunctionName:
      case TokenKind::NonExecName:
        ++pos_;
        if (t.kind == TokenKind::FunctionName && peek_separator(':')) {
          ++pos_;
          e.kind = Element::Kind::SecondLevel;
          return e;
        }
        e.kind = t.kind == TokenKind::FunctionName ? Element::Kind::Call : Element::Kind::Named;
        if (!done() && tokens_[pos_].kind == TokenKind::BracketOpen && tokens_[pos_].text == "(") {
          e.args = std::make_shared<Element>(group());
        }
        return e;
      case TokenKind::Separator:
        if (t.text == "!") {
          ++pos_;
          e.kind = Element::Kind::Bang;
          return e;
        }
        throw ParseError("unexpected separator '" + t.text + "'", t.position);
      case TokenKind::Word:
      case TokenKind::QuotedWord:
      case TokenKind::QuotedSequence: ++pos_; return e;
      default: throw ParseError(std::string("unexpected ") + to_string(t.kind), t.position);
    }
  }

  // ---- terms

  static Term constant(std::string text, SourcePosition pos) {
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\n' || text.back() == '\r')) {
      text.pop_back();
    }
    Term t;
    t.position = pos;
    if (text.empty()) {
      t.kind = Term::Kind::Empty;
    } else {
      t.kind = Term::Kind::Word;
      t.text = std::move(text);
    }
    return t;
  }

  // Contents of "..." as a group of constant words; brackets nest.
  static Term quoted_sequence(const Token& tok) {
    std::vector<Token> inner;
    try {
      inner = tokenize(tok.text);
    } catch (const LexError& e) {
      throw ParseError(std::string("inside quoted sequence: ") + e.what(), tok.position);
    }
    if (inner.empty()) return constant("", tok.position);
    std::vector<Term> stack_items;
    struct Frame {
      Code code;
      std::vector<Term> items;
      char close;
    };
    std::vector<Frame> frames;
    frames.push_back({Code::Sequence, {}, '\0'});
    for (const auto& t : inner) {
      if (t.kind == TokenKind::BracketOpen) {
        frames.push_back({static_cast<Code>(t.bracket_code()), {}, kCloseFor[t.bracket_code()]});
        continue;
      }
      if (t.kind == TokenKind::BracketClose && frames.size() > 1 && frames.back().close == t.text[0]) {
        Term g;
        g.kind = Term::Kind::Group;
        g.code = frames.back().code;
        g.items = std::move(frames.back().items);
        g.position = tok.position;
        frames.pop_back();
        frames.back().items.push_back(std::move(g));
        continue;
      }
      std::string text = t.text;
      if (t.kind == TokenKind::FunctionName) text = "#" + text;
      if (t.kind == TokenKind::NonExecName) text = "$" + text;
      Term w = constant(text, tok.position);
      if (w.kind != Term::Kind::Empty) frames.back().items.push_back(std::move(w));
    }
    if (frames.size() != 1) throw ParseError("unbalanced bracket inside quoted sequence", tok.position);
    Term out;
    out.kind = Term::Kind::Group;
    out.code = Code::Sequence;
    out.items = std::move(frames.back().items);
    out.position = tok.position;
    return out;
  }

  static Term term(const Element& e) {
    switch (e.kind) {
      case Element::Kind::Token: {
        const Token& t = e.token;
        if (t.kind == TokenKind::QuotedWord) return constant(t.text, t.position);
        if (t.kind == TokenKind::QuotedSequence) return quoted_sequence(t);
        Term out;
        out.position = t.position;
        if (auto n = parse_number_word(t.text)) {
          out.kind = Term::Kind::Number;
          out.number = *n;
          out.text = t.text;
        } else {
          out.kind = Term::Kind::Variable;
          out.text = t.text;
        }
        return out;
      }
      case Element::Kind::Group: {
        Term out;
        out.kind = Term::Kind::Group;
        out.code = e.code;
        out.position = e.token.position;
        for (const auto& seg : e.segments) {
          for (const auto& el : seg) out.items.push_back(term(el));
        }
        return out;
      }
      case Element::Kind::Op: throw ParseError("operator '" + e.token.text + "' outside a comparison", e.token.position);
      default: throw ParseError("a sentence cannot appear inside a term", e.token.position);
    }
  }

  // ---- sentences

  static bool is_sugar(const std::vector<Element>& seg) {
    return seg.size() == 3 && seg[1].kind == Element::Kind::Op && seg[0].kind != Element::Kind::Op &&
           seg[2].kind != Element::Kind::Op;
  }

  static bool sentence_like(const Element& e) {
    switch (e.kind) {
      case Element::Kind::Call:
      case Element::Kind::Named:
      case Element::Kind::SecondLevel:
      case Element::Kind::Bang: return true;
      case Element::Kind::Group:
        if (e.segments.size() == 1 && is_sugar(e.segments[0])) return true;
        return group_of_sentences(e);
      default: return false;
    }
  }

  static bool group_of_sentences(const Element& g) {
    if (g.segments.empty()) return false;
    bool any = false;
    for (const auto& seg : g.segments) {
      if (is_sugar(seg)) {
        any = true;
        continue;
      }
      for (const auto& el : seg) {
        if (el.kind != Element::Kind::Group && !sentence_like(el)) return false;
        any = any || sentence_like(el);
      }
    }
    return any;
  }

  static Sentence sugar(const std::vector<Element>& seg) {
    Sentence s;
    s.kind = Sentence::Kind::Call;
    s.name = *sugar_function(seg[1].token.text);
    s.position = seg[1].token.position;
    s.args = {term(seg[0]), term(seg[2])};
    return s;
  }

  static Sentence data(Code code, std::vector<Term> terms, SourcePosition pos) {
    Sentence s;
    s.kind = Sentence::Kind::Data;
    s.code = code;
    s.terms = std::move(terms);
    s.position = pos;
    return s;
  }

  static Sentence group_sentence(const Element& g, Context ctx) {
    if (g.segments.size() == 1 && is_sugar(g.segments[0])) return sugar(g.segments[0]);
    if (g.code == Code::List && ctx == Context::Plain) {
      Sentence s;
      s.kind = Sentence::Kind::List;
      s.position = g.token.position;
      for (const auto& seg : g.segments) s.items.push_back(sentence(seg, ctx));
      if (s.items.empty()) throw ParseError("empty list", g.token.position);
      return s;
    }
    if (ctx == Context::Condition && (g.code == Code::List || group_of_sentences(g))) {
      Sentence s;
      s.kind = Sentence::Kind::Cond;
      s.code = g.code;
      s.position = g.token.position;
      for (const auto& seg : g.segments) append_sentences(seg, ctx, s.items);
      if (s.items.empty()) throw ParseError("empty condition group", g.token.position);
      return s;
    }
    // (( ... )) with nothing else around the inner group is the same sentence
    if (g.code == Code::Sequence && g.segments.size() == 1 && g.segments[0].size() == 1 &&
        g.segments[0][0].kind == Element::Kind::Group && g.segments[0][0].code == Code::Sequence) {
      return group_sentence(g.segments[0][0], ctx);
    }
    if (g.segments.size() > 1) throw ParseError("',' inside a data sentence", g.token.position);
    std::vector<Term> terms;
    if (!g.segments.empty()) {
      for (const auto& el : g.segments[0]) terms.push_back(term(el));
    }
    if (terms.empty()) throw ParseError("empty sentence", g.token.position);
    return data(g.code, std::move(terms), g.token.position);
  }

  static Sentence single(const Element& e, Context ctx) {
    switch (e.kind) {
      case Element::Kind::Call:
      case Element::Kind::Named: {
        Sentence s;
        s.kind = e.kind == Element::Kind::Call ? Sentence::Kind::Call : Sentence::Kind::Named;
        s.name = e.token.text;
        s.position = e.token.position;
        if (e.args) {
          for (const auto& seg : e.args->segments) {
            for (const auto& el : seg) s.args.push_back(term(el));
          }
        }
        return s;
      }
      case Element::Kind::Group: return group_sentence(e, ctx);
      case Element::Kind::Token: return data(Code::Sequence, {term(e)}, e.token.position);
      default: throw ParseError("incomplete sentence", e.token.position);
    }
  }

  // Splits a segment such as `(a == b) !(c) #Save: T` into sentences; used
  // where several sentences may stand side by side (condition groups).
  static void append_sentences(const std::vector<Element>& seg, Context ctx, std::vector<Sentence>& out) {
    if (is_sugar(seg)) {
      out.push_back(sugar(seg));
      return;
    }
    bool all_sentences = true;
    for (const auto& el : seg) all_sentences = all_sentences && (sentence_like(el) || el.kind == Element::Kind::Group);
    if (!all_sentences) {
      out.push_back(sentence(seg, ctx));
      return;
    }
    std::size_t i = 0;
    while (i < seg.size()) {
      std::size_t j = i;
      while (j < seg.size() &&
             (seg[j].kind == Element::Kind::Bang || seg[j].kind == Element::Kind::SecondLevel)) {
        ++j;
      }
      if (j >= seg.size()) throw ParseError("second-level function without a following sentence", seg[i].token.position);
      out.push_back(sentence(std::vector<Element>(seg.begin() + static_cast<std::ptrdiff_t>(i),
                                                  seg.begin() + static_cast<std::ptrdiff_t>(j) + 1),
                             ctx));
      i = j + 1;
    }
  }

  static Sentence sentence(const std::vector<Element>& seg, Context ctx) {
    if (seg.empty()) throw ParseError("empty sentence", SourcePosition{});
    const Element& head = seg.front();
    if (head.kind == Element::Kind::Bang || head.kind == Element::Kind::SecondLevel) {
      if (seg.size() < 2) throw ParseError("second-level function without a following sentence", head.token.position);
      Sentence s;
      s.kind = Sentence::Kind::SecondLevel;
      s.name = head.kind == Element::Kind::Bang ? "Not" : head.token.text;
      s.position = head.token.position;
      s.items.push_back(sentence(std::vector<Element>(seg.begin() + 1, seg.end()), ctx));
      return s;
    }
    if (is_sugar(seg)) return sugar(seg);
    if (seg.size() == 1) return single(head, ctx);
    std::vector<Term> terms;
    for (const auto& el : seg) {
      if (el.kind != Element::Kind::Token && el.kind != Element::Kind::Group) {
        throw ParseError("unexpected " + std::string(el.kind == Element::Kind::Op ? "operator" : "sentence") +
                             " inside a sentence",
                         el.token.position);
      }
      terms.push_back(term(el));
    }
    return data(Code::Sequence, std::move(terms), head.token.position);
  }

  Sentence condition(const std::vector<Element>& seg) {
    Sentence c;
    c.kind = Sentence::Kind::Cond;
    c.code = Code::Sequence;
    c.position = first_position(seg);
    append_sentences(seg, Context::Condition, c.items);
    return c;
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_ = 0;

  friend Program shmkb::parse_program(std::string_view);
  friend RuleAst shmkb::parse_rule(const std::vector<Token>&);
};

bool is_separator_token(const Token& t, char c) {
  return t.kind == TokenKind::Separator && t.text.size() == 1 && t.text[0] == c;
}

}  // namespace

RuleAst parse_rule(const std::vector<Token>& tokens) {
  Parser p(tokens);
  RuleAst ast = p.rule();
  if (!p.done()) throw ParseError("text after the end of the rule", tokens[p.pos_].position);
  return ast;
}

Program parse_program(std::string_view text) {
  const auto raw = tokenize(text);
  Program program;

  // Substitution pass: `NAME = tokens ;` at the start of a statement defines
  // NAME for every later statement. Replacements are expanded once, with the
  // definitions known at that point.
  std::vector<Token> expanded;
  auto expand_into = [&program](const Token& t, std::vector<Token>& out) {
    if (t.kind == TokenKind::Word) {
      if (auto it = program.substitutions.find(t.text); it != program.substitutions.end()) {
        for (Token r : it->second) {
          r.position = t.position;
          out.push_back(std::move(r));
        }
        return;
      }
    }
    out.push_back(t);
  };
  bool statement_start = true;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Token& t = raw[i];
    if (statement_start && t.kind == TokenKind::Word && i + 1 < raw.size() && is_separator_token(raw[i + 1], '=')) {
      std::vector<Token> replacement;
      std::size_t j = i + 2;
      while (j < raw.size() && raw[j].kind != TokenKind::RuleEnd) expand_into(raw[j++], replacement);
      if (j >= raw.size()) throw ParseError("missing ';' after substitution " + t.text, t.position);
      if (replacement.empty()) throw ParseError("empty substitution " + t.text, t.position);
      program.substitutions[t.text] = std::move(replacement);
      i = j;
      statement_start = true;
      continue;
    }
    expand_into(t, expanded);
    statement_start = t.kind == TokenKind::RuleEnd;
  }

  Parser p(expanded);
  while (!p.done()) program.rules.push_back(p.rule());
  return program;
}

}  // namespace shmkb
