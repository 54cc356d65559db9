#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "shmkb/error.hpp"

namespace shmkb {

enum class TokenKind {
  Word,
  QuotedWord,      // '...'
  QuotedSequence,  // "..." (text is the raw inside, re-tokenized by the parser)
  FunctionName,    // #name, text without '#'
  NonExecName,     // $name, text without '$'
  Separator,       // ! , / = ? \ :
  Operator,        // == != := += -= >= <=
  BracketOpen,
  BracketClose,
  RuleEnd,  // ;
  Arrow,    // ->
  Bar,      // |
};

struct Token {
  TokenKind kind = TokenKind::Word;
  std::string text;
  SourcePosition position;
  std::size_t offset = 0;  // byte span in the source, quotes included
  std::size_t length = 0;

  /// Bracket code 0..3 for BracketOpen / BracketClose.
  int bracket_code() const;
};

const char* to_string(TokenKind kind);

/// Splits rule text into tokens; comments and whitespace are dropped.
/// Throws LexError on an unterminated quote or comment.
std::vector<Token> tokenize(std::string_view text);

}  // namespace shmkb
