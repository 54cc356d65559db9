#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shmkb/ast.hpp"
#include "shmkb/store.hpp"

namespace shmkb {

/// Decoded level-3 rule relation.
struct RuleView {
  RelationId rule;
  std::uint8_t kind = 0;
  RelationId a1;      // null when the left part is absent
  RelationId a2;      // as written; null when absent
  RelationId scheme;  // A2 scheme (the element inside {A2} when a2_all)
  bool a2_all = false;
  RelationId a3;  // Cond relation or null
  std::vector<RelationId> right;
  RelationId cond;  // Cond relation or null
};

struct SourceInfo {
  std::string path;
  std::int64_t mtime = 0;
};

// term and sentence relations
RelationId intern_term(Store& store, const Term& term);
RelationId intern_sentence(Store& store, const Sentence& sentence);
RelationId function_node(Store& store, std::string_view name);
std::string function_name(const Store& store, RelationId function);

// files: level-2 paradigms defined by a scheme
RelationId ensure_file(Store& store, RelationId scheme);
std::optional<RelationId> find_file(const Store& store, RelationId scheme);
std::vector<RelationId> all_files(const Store& store);
/// Structural match of a file scheme against a stored ground sentence,
/// collecting variable values (no coercion, no prior bindings).
bool scheme_bindings(const Store& store, RelationId scheme, RelationId value, std::map<RelationId, RelationId>& out);
/// Adds each binding's value to the variable's paradigm when its level fits.
void record_variable_values(Store& store, const std::map<RelationId, RelationId>& bindings);

/// Translates rule text into a rule-file relation. Nothing is written when
/// the text does not parse; a capacity error rolls the store back.
RelationId translate_text(Store& store, std::string_view text, const std::string& source, std::int64_t mtime = 0);
RelationId translate_file(Store& store, const std::filesystem::path& path);

/// Retranslates when the source's modification time changed. `rule_file`
/// is updated to the new relation. Throws StaleSourceError (old rules kept)
/// when the source is gone.
bool retranslate_if_modified(Store& store, RelationId& rule_file);

std::string rule_file_root(const std::string& path);
std::vector<RelationId> rule_files(const Store& store);
SourceInfo rule_file_source(const Store& store, RelationId rule_file);
std::vector<RelationId> rule_file_rules(const Store& store, RelationId rule_file);
RuleView decode_rule(const Store& store, RelationId rule);

// printing back to rule text (sugar appears in the explicit #Name form)
std::string print_term(const Store& store, RelationId term);
std::string print_sentence(const Store& store, RelationId sentence);
std::string print_rule(const Store& store, RelationId rule);
std::string print_rule_file(const Store& store, RelationId rule_file);

std::int64_t file_mtime(const std::filesystem::path& path);

}  // namespace shmkb
