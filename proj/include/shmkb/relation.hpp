#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>

namespace shmkb {

/// Region-relative offset of a node. Offset 0 is the null reference.
class RelationId {
 public:
  constexpr RelationId() = default;
  constexpr explicit RelationId(std::uint64_t offset) : offset_(offset) {}

  constexpr std::uint64_t offset() const { return offset_; }
  constexpr explicit operator bool() const { return offset_ != 0; }

  friend constexpr auto operator<=>(RelationId, RelationId) = default;

 private:
  std::uint64_t offset_ = 0;
};

inline std::string to_string(RelationId id) { return "@" + std::to_string(id.offset()); }

/// Aggregation semantics of a relation; the bracket used in rule text is
/// noted alongside.
enum class Code : std::uint8_t {
  Sequence = 0,     // ( )
  Conjunction = 1,  // < >
  Disjunction = 2,  // [ ]
  List = 3,         // { }
};

/// What a node stands for. Level, code and kind carry the relation model;
/// role lets decoders tell apart structurally similar aggregates.
enum class Role : std::uint8_t {
  Plain = 0,
  Char,        // elementary level-0 character
  Digit,       // elementary level-0 number 0x00..0xFF
  Number,      // level-0 base-256 digit sequence
  VarMark,     // elementary marker making a level-0 combination a variable name
  VarName,     // level-0 [VarMark, text]
  Empty,       // empty relation of level 1 or 2
  Word,        // level-1 word over a level-0 structure
  Function,    // level-1 function linkage relation
  Paradigm,    // code-2 node with a defining relation and stored values
  Group,       // level-1 bracket group
  Call,        // level-2 executable sentence
  Named,       // level-2 non-executable `$name(args)` sentence
  Data,        // level-2 data sentence / scheme
  ListWrap,    // level-2 `{ S }`
  Cond,        // level-2 condition group
  Part,        // level-2 rule part container
  Rule,        // level-3 rule
  RuleFile,    // level-3 rule file
  SourceInfo,  // level-2 [path, mtime] of a rule file
  Sentence,    // level-2 natural-language sentence
  Collocation, // level-1 group of words inside a natural-language sentence
  SemRule,     // level-3 semantic rule
  Constraint,  // level-1 co-occurrence condition of a semantic rule
  Tuple,       // level-1 attested tuple of slot values
  RuleSet,     // level-3 RuleTrue / RuleFalse
};

/// Node kind ("type"): meaning depends on level.
namespace kind {
inline constexpr std::uint8_t kConstant = 0;
inline constexpr std::uint8_t kVariable = 1;
inline constexpr std::uint8_t kGlobal = 2;
inline constexpr std::uint8_t kHasVariables = 3;
inline constexpr std::uint8_t kNonExecutable = 1;
inline constexpr std::uint8_t kExecutable = 2;
inline constexpr std::uint8_t kInverseRule = 1;
inline constexpr std::uint8_t kDirectRule = 2;
}  // namespace kind

/// Insertion-order policy of a paradigm; chosen by the trailing sign of the
/// defining word (`+`, `-`, `` ` ``).
enum class OrderPolicy : std::uint8_t {
  Chronological = 0,
  Ascending = 1,
  Descending = 2,
  ReverseChronological = 3,
};

using Number = std::variant<std::int64_t, double>;

}  // namespace shmkb

template <>
struct std::hash<shmkb::RelationId> {
  std::size_t operator()(shmkb::RelationId id) const noexcept { return std::hash<std::uint64_t>{}(id.offset()); }
};
