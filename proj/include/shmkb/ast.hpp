#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shmkb/relation.hpp"
#include "shmkb/token.hpp"

namespace shmkb {

/// Level-1 element of a sentence.
struct Term {
  enum class Kind { Word, Number, Variable, Empty, Group };

  Kind kind = Kind::Word;
  std::string text;  // word text or variable name
  Number number = std::int64_t{0};
  Code code = Code::Sequence;  // Group
  std::vector<Term> items;     // Group
  SourcePosition position;

  bool operator==(const Term& other) const;  // ignores positions
};

/// Level-2 sentence of a rule.
struct Sentence {
  enum class Kind {
    Call,         // #name(args)
    SecondLevel,  // #Save: S, #Delete: S, #Not: S, !S
    Named,        // $name(args)
    Data,         // (t1 t2 ...)
    List,         // { S1, S2, ... }
    Cond,         // condition group; code gives AND / OR
  };

  Kind kind = Kind::Data;
  std::string name;             // Call, SecondLevel, Named
  std::vector<Term> args;       // Call, Named
  std::vector<Term> terms;      // Data
  Code code = Code::Sequence;   // Data, Cond
  std::vector<Sentence> items;  // List, Cond, SecondLevel (one target)
  SourcePosition position;

  bool operator==(const Sentence& other) const;  // ignores positions
};

struct RuleAst {
  std::optional<Sentence> a1;
  std::optional<Sentence> a2;  // a List here means "all matches"
  std::optional<Sentence> a3;
  std::vector<Sentence> right;
  std::optional<Sentence> cond;  // Cond with code 0 over the comma-separated items
  SourcePosition position;

  bool has_left() const { return a1.has_value(); }
  bool operator==(const RuleAst& other) const;  // ignores positions
};

struct Program {
  std::vector<RuleAst> rules;
  std::map<std::string, std::vector<Token>> substitutions;
};

/// Parses a whole rule file: substitutions `NAME = tokens ;` are applied to
/// every later statement, then each rule `A -> B | C ;` is parsed.
Program parse_program(std::string_view text);

/// Parses exactly one rule (no substitutions).
RuleAst parse_rule(const std::vector<Token>& tokens);

/// Numeric reading of an unquoted word: octal when it starts with 0 and has
/// only octal digits, otherwise decimal integer or real.
std::optional<Number> parse_number_word(std::string_view word);

/// Maps a sugar operator (`==`, `:=`, ...) to its builtin name.
std::optional<std::string> sugar_function(std::string_view op);

}  // namespace shmkb
