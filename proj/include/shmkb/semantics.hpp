#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shmkb/engine.hpp"
#include "shmkb/store.hpp"

namespace shmkb {

/// Natural-language phrases are level-1 groups of words, with parenthesized
/// collocations as nested groups: the same relation a quoted sequence
/// `"Tom read ( a book ) ."` interns to.
struct PhraseToken {
  std::string text;
  SourcePosition position;
};

/// Splits on blanks; `(` and `)` are tokens of their own, and `.` `?` `!`
/// at the end of a word are split off as terminators.
std::vector<PhraseToken> tokenize_phrase_text(std::string_view text);
/// The whole text as one phrase. Throws ParseError on unbalanced brackets or
/// an empty text.
RelationId parse_phrase(Store& store, std::string_view text);
/// Sentences of a text, each ending at a terminator outside brackets.
std::vector<RelationId> split_sentences(Store& store, std::string_view text);
/// Words separated by blanks, collocations as `( ... )`.
std::string phrase_text(const Store& store, RelationId phrase);

enum class Shape : std::uint8_t {
  SentenceQuestion = 0,  // (sentence, question) -> answer
  Condition = 1,         // condition -> consequence
  DoubleCondition = 2,   // (condition, condition) -> consequence
};

std::string to_string(Shape shape);
std::optional<Shape> parse_shape(std::string_view name);
/// Number of phrases in a sample of the shape, the consequence last.
std::size_t part_count(Shape shape);

/// A taught example: ground phrases, the right part last.
struct Sample {
  Shape shape = Shape::SentenceQuestion;
  std::vector<RelationId> parts;

  bool operator==(const Sample&) const = default;
};

Sample make_sample(Store& store, Shape shape, const std::vector<std::string>& texts);

/// Decoded generalized rule. A cell of a part is either a constant term or
/// a slot; a slot is a variable whose paradigm holds its values.
struct SemanticRule {
  struct Cell {
    RelationId term;  // constant; null for a slot
    int slot = -1;
    bool operator==(const Cell&) const = default;
  };
  struct Slot {
    RelationId variable;  // null until stored
    std::vector<RelationId> values;
  };
  struct Group {
    std::vector<int> slots;
    std::vector<std::vector<RelationId>> rows;  // attested value tuples
  };

  RelationId entry;  // stable handle in RuleTrue
  RelationId rule;   // current level-3 relation
  Shape shape = Shape::SentenceQuestion;
  std::vector<std::vector<Cell>> parts;
  std::vector<Slot> slots;
  std::vector<Group> groups;
  std::vector<Sample> samples;  // covered examples the rule was built from

  bool ground() const { return slots.empty(); }
};

/// Builds the generalization of `rule` that also covers `sample`, or
/// nothing when the sample differs from every covered example in more than
/// one position of some part.
std::optional<SemanticRule> generalize(const Store& store, const SemanticRule& rule, const Sample& sample);
/// True when the rule's template, slot values and condition rows admit the
/// sample.
bool rule_covers(const Store& store, const SemanticRule& rule, const Sample& sample);

enum class TeachStatus { Created, Merged, Rejected };

struct TeachOutcome {
  TeachStatus status = TeachStatus::Created;
  RelationId rule;      // entry of the created or merged rule
  bool changed = true;  // false when the sample was already covered
  std::string reason;
};

std::string to_string(TeachStatus status);

struct Article {
  std::string id;
  std::vector<RelationId> sentences;
  /// Per sentence, the rules with a part the sentence instantiates.
  std::vector<std::vector<RelationId>> scheme_links;
};

struct Answer {
  std::string text;
  std::string article;
  auto operator<=>(const Answer&) const = default;
};

struct Proposal {
  std::int64_t id = 0;
  RelationId first;  // slot variables
  RelationId second;
  std::string status;  // pending, accepted, rejected
};

struct KnowledgeOptions {
  std::size_t depth_cap = 8;  // rounds of direct-rule derivation per article
};

/// Teaching, article ingestion and question answering over a store. All
/// state lives in the store under the roots "RuleTrue", "RuleFalse",
/// "semantic:proposals" and the article file (art+ {s}), so a snapshot
/// carries it.
///
/// Construction and the non-const members need the writer role; the const
/// members only read the store and may run in parallel.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(Store& store, KnowledgeOptions options = {});

  TeachOutcome teach(const Sample& sample);
  void unteach(const Sample& sample);
  /// Covered by some rule in RuleTrue and not listed in RuleFalse.
  bool covered(const Sample& sample) const;
  bool refused(const Sample& sample) const;

  Article ingest_article(const std::string& id, std::string_view text);
  bool remove_article(const std::string& id);
  std::optional<Article> article(const std::string& id) const;
  std::vector<std::string> article_ids() const;

  std::vector<Answer> answer(std::string_view question) const;
  std::vector<Answer> answer(RelationId question) const;

  std::vector<Proposal> proposals() const;
  void confirm(std::int64_t proposal, bool accept);

  /// Most recently modified first.
  std::vector<SemanticRule> rules() const;
  std::vector<Sample> refused_samples() const;
  std::string describe(const SemanticRule& rule) const;

  /// Registers #add_rule0(q s a) and #del_rule0(q s a).
  void install(Session& session);

  Store& store() const { return store_; }

 private:
  SemanticRule decode(RelationId entry) const;
  void store_rule(SemanticRule& rule);
  std::vector<RelationId> entries() const;
  void touch_entry(RelationId entry);
  void scan_proposals();
  std::vector<RelationId> links(RelationId sentence, const std::vector<SemanticRule>& rules) const;
  RelationId article_scheme() const;
  std::optional<RelationId> article_value(RelationId id_word) const;
  Article make_article(RelationId value, const std::vector<SemanticRule>& rules) const;

  Store& store_;
  KnowledgeOptions options_;
  RelationId rule_true_;
  RelationId rule_false_;
  RelationId proposals_;
  RelationId article_scheme_;
};

}  // namespace shmkb
