#include <cctype>

#include "shmkb/error.hpp"
#include "shmkb/semantics.hpp"

namespace shmkb {

namespace {

bool is_terminator(const std::string& t) { return t == "." || t == "?" || t == "!"; }

bool terminator_char(char c) { return c == '.' || c == '?' || c == '!'; }

RelationId group(Store& store, const std::vector<RelationId>& items) {
  return store.make_relation(Code::Sequence, items, {.level = 1, .role = Role::Group});
}

// Builds phrases from tokens; `split` starts a new phrase after each
// terminator outside brackets.
std::vector<RelationId> build(Store& store, const std::vector<PhraseToken>& tokens, bool split) {
  std::vector<RelationId> out;
  std::vector<std::vector<RelationId>> frames(1);
  std::vector<SourcePosition> opened;
  for (const auto& t : tokens) {
    if (t.text == "(") {
      frames.emplace_back();
      opened.push_back(t.position);
      continue;
    }
    if (t.text == ")") {
      if (frames.size() == 1) throw ParseError("unmatched ')'", t.position);
      auto items = std::move(frames.back());
      frames.pop_back();
      if (items.empty()) throw ParseError("empty collocation", t.position);
      frames.back().push_back(group(store, items));
      opened.pop_back();
      continue;
    }
    frames.back().push_back(store.intern_word(t.text));
    if (split && frames.size() == 1 && is_terminator(t.text)) {
      out.push_back(group(store, frames.back()));
      frames.back().clear();
    }
  }
  if (frames.size() != 1) throw ParseError("unclosed '('", opened.back());
  if (!frames.back().empty()) out.push_back(group(store, frames.back()));
  return out;
}

void render(const Store& store, RelationId node, std::string& out) {
  const auto info = store.info(node);
  if (info.role != Role::Group) {
    if (!out.empty()) out += ' ';
    out += store.text(node);
    return;
  }
  for (auto c : store.inverse_refs(node)) {
    if (store.info(c).role == Role::Group) {
      if (!out.empty()) out += ' ';
      out += '(';
      render(store, c, out);
      out += " )";
    } else {
      render(store, c, out);
    }
  }
}

}  // namespace

std::vector<PhraseToken> tokenize_phrase_text(std::string_view text) {
  std::vector<PhraseToken> out;
  SourcePosition pos;
  std::string word;
  SourcePosition word_pos;
  auto flush = [&] {
    if (word.empty()) return;
    // trailing terminators come off the word: "Bill." -> "Bill" "."
    std::size_t end = word.size();
    while (end > 0 && terminator_char(word[end - 1])) --end;
    if (end == 0) end = 1;
    out.push_back({word.substr(0, end), word_pos});
    for (std::size_t k = end; k < word.size(); ++k) {
      out.push_back({std::string(1, word[k]), {word_pos.line, word_pos.column + static_cast<int>(k)}});
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '(' || c == ')') {
      flush();
      out.push_back({std::string(1, c), pos});
    } else {
      if (word.empty()) word_pos = pos;
      word += c;
    }
    if (c == '\n') {
      ++pos.line;
      pos.column = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++pos.column;
    }
  }
  flush();
  return out;
}

RelationId parse_phrase(Store& store, std::string_view text) {
  const auto phrases = build(store, tokenize_phrase_text(text), false);
  if (phrases.empty()) throw ParseError("empty sentence", {});
  return phrases.front();
}

std::vector<RelationId> split_sentences(Store& store, std::string_view text) {
  return build(store, tokenize_phrase_text(text), true);
}

std::string phrase_text(const Store& store, RelationId phrase) {
  std::string out;
  render(store, phrase, out);
  return out;
}

}  // namespace shmkb
