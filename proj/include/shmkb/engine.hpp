#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shmkb/store.hpp"
#include "shmkb/translate.hpp"

namespace shmkb {

/// 1 success, 0 failure, -1 interrupt; host callbacks may also return key
/// codes at or above kKeyThreshold.
using ReturnCode = int;
inline constexpr ReturnCode kSucceeded = 1;
inline constexpr ReturnCode kFailed = 0;
inline constexpr ReturnCode kInterrupted = -1;
inline constexpr ReturnCode kKeyThreshold = 0410;

/// Bindings of current variables. Global variables live in the session.
class VarTable {
 public:
  std::optional<RelationId> get(RelationId var) const {
    auto it = bindings_.find(var);
    if (it == bindings_.end()) return std::nullopt;
    return it->second;
  }
  void set(RelationId var, RelationId value) { bindings_[var] = value; }
  void erase(RelationId var) { bindings_.erase(var); }
  std::size_t size() const { return bindings_.size(); }
  const std::map<RelationId, RelationId>& bindings() const { return bindings_; }
  bool operator==(const VarTable&) const = default;

 private:
  std::map<RelationId, RelationId> bindings_;
};

class Session;

/// Arguments and variable table handed to a builtin or host callback.
class CallContext {
 public:
  CallContext(Session& session, std::string name, std::vector<RelationId> args, VarTable& table, bool in_condition)
      : session_(session), name_(std::move(name)), args_(std::move(args)), table_(table),
        in_condition_(in_condition) {}

  Session& session() const { return session_; }
  Store& store() const;
  const std::string& name() const { return name_; }
  std::size_t arity() const { return args_.size(); }
  /// Argument as written (may contain variables).
  RelationId arg(std::size_t i) const { return args_.at(i); }
  /// Ground value of the argument, empty when a variable in it is unbound.
  std::optional<RelationId> value(std::size_t i) const;
  /// Like value(), throwing BindingError when unbound.
  RelationId required(std::size_t i) const;
  /// Binds the variables of argument i from `value`, overwriting earlier
  /// bindings. Throws AssignmentError when the argument has no variable.
  bool assign(std::size_t i, RelationId value);

  std::optional<RelationId> get(std::string_view variable) const;
  void set(std::string_view variable, RelationId value);
  VarTable& table() { return table_; }
  bool in_condition() const { return in_condition_; }

 private:
  Session& session_;
  std::string name_;
  std::vector<RelationId> args_;
  VarTable& table_;
  bool in_condition_;
};

using HostFunction = std::function<ReturnCode(CallContext&)>;

struct EngineOptions {
  std::size_t depth_cap = 256;
  std::size_t repeat_cap = 10000;  // iterations of a `{...}` list of calls
  bool enable_spawn = false;       // #Spawn and #SystemR
};

/// One sequential execution context over the translated rules of a store.
///
/// Instantiating sentences interns new nodes, so a session needs the writer
/// role on its store.
class Session {
 public:
  explicit Session(Store& store, EngineOptions options = {});
  Session(Store& store, std::vector<RelationId> rule_files, EngineOptions options = {});

  /// Re-reads the rule files (after retranslation).
  void reload_rules();

  void register_function(std::string name, HostFunction fn);
  bool has_function(std::string_view name) const;

  /// Sets `key` and runs every rule without a left part, in rule-file order.
  ReturnCode fire_entry_rules(std::int64_t key_code);
  /// Runs one rule; a left part A1 is instantiated from `table`.
  ReturnCode execute_rule(RelationId rule, VarTable& table);
  /// Runs every rule whose A1 matches the ground `sentence`.
  ReturnCode derive(RelationId sentence, const VarTable& table);
  /// True when the ground sentence is stored or some rule derives it.
  bool provable(RelationId sentence);
  /// Bindings of stored sentences of the file defined by `scheme`.
  std::vector<VarTable> search_file(RelationId scheme, const VarTable& table, bool all);
  /// Condition evaluation; bindings made by the condition stay in `table`.
  ReturnCode eval_condition(RelationId condition, VarTable& table);
  /// Executes one right-part sentence in a table derived from `parent`.
  ReturnCode run_sentence(RelationId sentence, const VarTable& parent);

  // variables
  std::optional<RelationId> lookup(RelationId var, const VarTable& table) const;
  void bind(RelationId var, RelationId value, VarTable& table);
  std::optional<RelationId> global(std::string_view name) const;
  void set_global(std::string_view name, RelationId value);
  std::int64_t key() const { return key_; }
  void set_key(std::int64_t code) { key_ = code; }

  // values
  std::optional<RelationId> instantiate(RelationId node, const VarTable& table);
  /// One-way match of a pattern against a ground value; binds on success.
  bool match(RelationId pattern, RelationId value, VarTable& table);
  /// Like match, but variables already bound are overwritten.
  bool assign(RelationId pattern, RelationId value, VarTable& table);
  bool equal_values(RelationId a, RelationId b) const;
  std::optional<Number> numeric(RelationId value) const;
  std::vector<RelationId> unbound_variables(RelationId node, const VarTable& table) const;

  Store& store() { return store_; }
  const EngineOptions& options() const { return options_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  ReturnCode last_derivation_code() const { return last_derivation_; }
  /// Called each time a rule's condition holds, before its right part runs.
  void on_fire(std::function<void(RelationId rule, const VarTable&)> observer) { observer_ = std::move(observer); }

 private:
  struct CachedRule {
    RuleView view;
    RelationId pattern;  // A1 without a list wrapper
    std::vector<RelationId> a1_vars;
    std::vector<RelationId> rule_vars;
  };
  struct HeadKey {
    Role role;
    std::uint64_t id;
    std::size_t arity;
    bool operator==(const HeadKey&) const = default;
  };
  struct HeadHash {
    std::size_t operator()(const HeadKey& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.id * 31 + k.arity) ^ static_cast<std::size_t>(k.role);
    }
  };
  using Cont = std::function<int()>;
  struct MatchState;
  void commit_globals(const MatchState& state);

  std::optional<HeadKey> head_of(RelationId sentence) const;
  int exec_rule(const CachedRule& rule, const VarTable& parent, std::optional<RelationId> target);
  int derive_mode(RelationId sentence, const VarTable& parent, bool all);
  int prove_ground(RelationId sentence, const VarTable& table, bool all);
  int run_sequence(const std::vector<RelationId>& items, const VarTable& table);
  int run_list(RelationId list, const VarTable& table);
  int prove_in_body(RelationId sentence, const VarTable& table);
  int solve(RelationId item, VarTable& table, const Cont& k);
  int solve_and(const std::vector<RelationId>& items, std::size_t i, VarTable& table, const Cont& k);
  int solve_list_call(RelationId call, VarTable& table, const Cont& k);
  int for_each_combination(const std::vector<RelationId>& vars, const VarTable& table,
                           const std::function<int(VarTable&)>& fn);
  ReturnCode call(RelationId sentence, VarTable& table, bool in_condition);
  std::vector<RelationId> call_args(RelationId sentence) const;
  std::vector<RelationId> list_elements(RelationId value) const;
  bool match_into(RelationId pattern, RelationId value, MatchState& state, bool overwrite);
  void collect_variables(RelationId node, std::vector<RelationId>& out) const;
  bool is_global(RelationId var) const;
  void note(std::string message);

  Store& store_;
  EngineOptions options_;
  std::vector<RelationId> files_;  // empty: every rule file of the store
  bool explicit_files_ = false;
  std::vector<CachedRule> rules_;
  std::vector<std::size_t> entry_rules_;
  std::unordered_map<HeadKey, std::vector<std::size_t>, HeadHash> by_head_;
  std::unordered_map<std::string, HostFunction> functions_;

  VarTable globals_;
  std::optional<RelationId> key_var_;
  std::int64_t key_ = 0;
  struct Frame {
    std::vector<std::uint64_t> key;  // rule and left-part bindings
    std::uint64_t serial;
  };
  std::vector<Frame> stack_;  // loop-prevention frames
  std::uint64_t frame_serial_ = 0;
  // ground goal results, valid while no side effect has happened since;
  // a failure cut against a live frame records it in cut and serial
  struct CachedGoal {
    int result;
    std::uint64_t effects;
    std::size_t cut;
    std::uint64_t serial;
  };
  std::uint64_t successes_ = 0;
  static constexpr std::size_t kNoCut = static_cast<std::size_t>(-1);
  std::unordered_map<std::uint64_t, CachedGoal> goal_cache_;  // by sentence offset
  std::uint64_t effects_ = 0;
  std::size_t cut_depth_ = kNoCut;  // shallowest frame a loop check cut against
  std::vector<std::string> diagnostics_;
  ReturnCode last_derivation_ = kFailed;
  std::function<void(RelationId, const VarTable&)> observer_;
};

}  // namespace shmkb
