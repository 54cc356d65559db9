#pragma once

// Brute-force answering for randomized semantic instances: every rule is
// ground out and the article closed round by round.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "shmkb/semantics.hpp"

namespace oracle {

using namespace shmkb;

inline const char* kWords[] = {"a", "b", "c"};

inline std::string random_phrase(std::mt19937& rng, int length) {
  std::string out;
  for (int i = 0; i < length; ++i) out += std::string(i ? " " : "") + kWords[rng() % 3];
  return out;
}

inline Sample random_sample(Store& s, std::mt19937& rng, Shape shape) {
  std::vector<std::string> texts;
  for (std::size_t p = 0; p < part_count(shape); ++p) texts.push_back(random_phrase(rng, 2) + " .");
  return make_sample(s, shape, texts);
}

using Sentence = std::vector<std::string>;

// Ground instances of a rule: every combination of slot values the rows admit.
inline std::vector<std::vector<Sentence>> instances(const Store& s, const SemanticRule& r) {
  std::vector<std::vector<Sentence>> out;
  std::vector<std::size_t> index(r.slots.size(), 0);
  while (true) {
    bool admitted = true;
    for (const auto& g : r.groups) {
      std::vector<RelationId> projection;
      for (int k : g.slots) projection.push_back(r.slots[static_cast<std::size_t>(k)].values[index[static_cast<std::size_t>(k)]]);
      admitted = admitted && std::find(g.rows.begin(), g.rows.end(), projection) != g.rows.end();
    }
    if (admitted) {
      std::vector<Sentence> parts;
      for (const auto& cells : r.parts) {
        Sentence words;
        for (const auto& c : cells) {
          words.push_back(phrase_text(
              s, c.slot < 0 ? c.term : r.slots[static_cast<std::size_t>(c.slot)].values[index[static_cast<std::size_t>(c.slot)]]));
        }
        parts.push_back(words);
      }
      out.push_back(parts);
    }
    std::size_t k = 0;
    while (k < index.size() && ++index[k] == r.slots[k].values.size()) index[k++] = 0;
    if (k == index.size()) break;
  }
  return out;
}

inline Sentence words_of(const Store& s, RelationId phrase) {
  Sentence out;
  for (auto t : s.inverse_refs(phrase)) out.push_back(phrase_text(s, t));
  return out;
}

inline std::string join(const Sentence& w) {
  std::string out;
  for (const auto& x : w) out += (out.empty() ? "" : " ") + x;
  return out;
}

// Brute force: ground every rule, close the article under direct instances
// for `depth` rounds, then read answers off the inverse instances.
inline std::set<std::string> oracle_answers(const Store& s, const KnowledgeBase& kb,
                                            const std::vector<RelationId>& article, RelationId question,
                                            std::size_t depth) {
  std::set<std::vector<Sentence>> refused;
  for (const auto& r : kb.refused_samples()) {
    std::vector<Sentence> parts;
    for (auto p : r.parts) parts.push_back(words_of(s, p));
    refused.insert(parts);
  }
  std::set<Sentence> known;
  for (auto a : article) known.insert(words_of(s, a));
  const auto rules = kb.rules();
  for (std::size_t round = 0; round < depth; ++round) {
    std::set<Sentence> next = known;
    for (const auto& r : rules) {
      if (r.shape == Shape::SentenceQuestion) continue;
      for (const auto& inst : instances(s, r)) {
        if (refused.count(inst)) continue;
        const bool holds = r.shape == Shape::Condition ? known.count(inst[0]) > 0
                                                       : known.count(inst[0]) > 0 && known.count(inst[1]) > 0;
        if (holds) next.insert(inst.back());
      }
    }
    if (next == known) break;
    known = next;
  }
  std::set<std::string> out;
  const auto q = words_of(s, question);
  for (const auto& r : rules) {
    if (r.shape != Shape::SentenceQuestion) continue;
    for (const auto& inst : instances(s, r)) {
      if (refused.count(inst) || inst[1] != q || !known.count(inst[0])) continue;
      out.insert(join(inst[2]));
    }
  }
  return out;
}

}  // namespace oracle
