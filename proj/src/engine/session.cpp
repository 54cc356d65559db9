#include <algorithm>

#include "shmkb/builtins.hpp"
#include "shmkb/engine.hpp"
#include "shmkb/error.hpp"

namespace shmkb {
namespace {

constexpr int kNoMatch = -1000;

}  // namespace

/// Bindings made during one match, committed only when the match succeeds.
struct Session::MatchState {
  VarTable table;
  VarTable globals;
  std::optional<std::int64_t> key;
};

// ---------------------------------------------------------------------------
// CallContext

Store& CallContext::store() const { return session_.store(); }

std::optional<RelationId> CallContext::value(std::size_t i) const { return session_.instantiate(arg(i), table_); }

RelationId CallContext::required(std::size_t i) const {
  if (auto v = value(i)) return *v;
  throw BindingError("#" + name_ + ": argument " + std::to_string(i + 1) + " is unbound");
}

bool CallContext::assign(std::size_t i, RelationId value) {
  if (!store().has_variables(arg(i))) {
    throw AssignmentError("#" + name_ + ": argument " + std::to_string(i + 1) + " is not a variable");
  }
  return session_.assign(arg(i), value, table_);
}

std::optional<RelationId> CallContext::get(std::string_view variable) const {
  const auto var = store().find_variable(variable);
  if (!var) return std::nullopt;
  return session_.lookup(*var, table_);
}

void CallContext::set(std::string_view variable, RelationId value) {
  session_.bind(store().variable(variable), value, table_);
}

// ---------------------------------------------------------------------------
// rules

Session::Session(Store& store, EngineOptions options) : store_(store), options_(options) { reload_rules(); }

Session::Session(Store& store, std::vector<RelationId> rule_files, EngineOptions options)
    : store_(store), options_(options), files_(std::move(rule_files)), explicit_files_(true) {
  reload_rules();
}

void Session::reload_rules() {
  rules_.clear();
  entry_rules_.clear();
  by_head_.clear();
  key_var_ = store_.find_variable("key");
  const auto files = explicit_files_ ? files_ : rule_files(store_);
  for (auto file : files) {
    for (auto rule : rule_file_rules(store_, file)) {
      CachedRule cached;
      cached.view = decode_rule(store_, rule);
      if (cached.view.a1) {
        cached.pattern = cached.view.a1;
        if (store_.info(cached.pattern).role == Role::ListWrap) cached.pattern = store_.inverse_refs(cached.pattern).front();
        collect_variables(cached.pattern, cached.a1_vars);
        collect_variables(cached.view.rule, cached.rule_vars);
      }
      const std::size_t index = rules_.size();
      rules_.push_back(std::move(cached));
      if (!rules_.back().view.a1) {
        entry_rules_.push_back(index);
      } else if (auto head = head_of(rules_.back().pattern)) {
        by_head_[*head].push_back(index);
      }
    }
  }
}

std::optional<Session::HeadKey> Session::head_of(RelationId sentence) const {
  const auto info = store_.info(sentence);
  const auto parts = store_.inverse_refs(sentence);
  auto arity = [&](RelationId args) {
    return store_.info(args).role == Role::Empty ? std::size_t{0} : store_.inverse_refs(args).size();
  };
  switch (info.role) {
    case Role::Call:
      if (store_.info(parts[1]).level == 2) return HeadKey{Role::Call, parts[0].offset(), 1};
      return HeadKey{Role::Call, parts[0].offset(), arity(parts[1])};
    case Role::Named: return HeadKey{Role::Named, parts[0].offset(), arity(parts[1])};
    case Role::Data: return HeadKey{Role::Data, static_cast<std::uint64_t>(info.code), parts.size()};
    default: return std::nullopt;
  }
}

void Session::register_function(std::string name, HostFunction fn) { functions_[std::move(name)] = std::move(fn); }

bool Session::has_function(std::string_view name) const {
  return find_builtin(name) != nullptr || functions_.count(std::string(name)) != 0;
}

void Session::note(std::string message) { diagnostics_.push_back(std::move(message)); }

// ---------------------------------------------------------------------------
// variables

bool Session::is_global(RelationId var) const { return store_.info(var).kind == kind::kGlobal; }

std::optional<RelationId> Session::lookup(RelationId var, const VarTable& table) const {
  if (key_var_ && var == *key_var_) return const_cast<Store&>(store_).intern_number_word(key_);
  if (is_global(var)) return globals_.get(var);
  return table.get(var);
}

void Session::bind(RelationId var, RelationId value, VarTable& table) {
  if (!store_.is_variable(var)) throw AssignmentError(to_string(var) + " is not a variable");
  if ((key_var_ && var == *key_var_) || (!key_var_ && store_.variable_name(var) == "key")) {
    key_var_ = var;
    const auto n = numeric(value);
    if (!n || !std::holds_alternative<std::int64_t>(*n)) throw TypeError("key takes an integer code");
    key_ = std::get<std::int64_t>(*n);
    ++effects_;
  } else if (is_global(var)) {
    globals_.set(var, value);
    ++effects_;
  } else {
    table.set(var, value);
  }
}

std::optional<RelationId> Session::global(std::string_view name) const {
  const auto var = store_.find_variable(name);
  if (!var) return std::nullopt;
  return globals_.get(*var);
}

void Session::set_global(std::string_view name, RelationId value) {
  const auto var = store_.variable(name);
  if (!is_global(var)) throw AssignmentError(std::string(name) + " is not a global variable");
  globals_.set(var, value);
  ++effects_;
}

void Session::collect_variables(RelationId node, std::vector<RelationId>& out) const {
  if (!store_.has_variables(node)) return;
  if (store_.is_variable(node)) {
    if (std::find(out.begin(), out.end(), node) == out.end()) out.push_back(node);
    return;
  }
  for (auto c : store_.inverse_refs(node)) collect_variables(c, out);
}

std::vector<RelationId> Session::unbound_variables(RelationId node, const VarTable& table) const {
  std::vector<RelationId> vars;
  collect_variables(node, vars);
  std::erase_if(vars, [&](RelationId v) { return lookup(v, table).has_value(); });
  return vars;
}

// ---------------------------------------------------------------------------
// values

std::optional<Number> Session::numeric(RelationId value) const {
  if (auto n = store_.number_value(value)) return n;
  if (store_.info(value).role == Role::Word) return parse_number_word(store_.text(value));
  return std::nullopt;
}

bool Session::equal_values(RelationId a, RelationId b) const {
  if (a == b) return true;
  const auto na = numeric(a);
  const auto nb = numeric(b);
  if (na && nb) {
    return std::visit([](auto x, auto y) { return static_cast<long double>(x) == static_cast<long double>(y); }, *na,
                      *nb);
  }
  const auto ia = store_.info(a);
  const auto ib = store_.info(b);
  if (ia.role != ib.role || ia.code != ib.code || ia.level != ib.level) return false;
  if (ia.role != Role::Group && ia.role != Role::Data && ia.role != Role::Named && ia.role != Role::Call) return false;
  const auto ca = store_.inverse_refs(a).to_vector();
  const auto cb = store_.inverse_refs(b).to_vector();
  if (ca.size() != cb.size()) return false;
  if (ia.code == Code::Conjunction) {
    std::vector<bool> used(cb.size(), false);
    for (auto x : ca) {
      bool found = false;
      for (std::size_t j = 0; j < cb.size() && !found; ++j) {
        if (!used[j] && equal_values(x, cb[j])) used[j] = found = true;
      }
      if (!found) return false;
    }
    return true;
  }
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (!equal_values(ca[i], cb[i])) return false;
  }
  return true;
}

std::optional<RelationId> Session::instantiate(RelationId node, const VarTable& table) {
  if (!store_.has_variables(node)) return node;
  if (store_.is_variable(node)) return lookup(node, table);
  const auto info = store_.info(node);
  const auto parts = store_.inverse_refs(node).to_vector();
  // `{s}` with s bound to a list stands for that list
  if (info.role == Role::Group && info.code == Code::List && parts.size() == 1 && store_.is_variable(parts[0])) {
    const auto v = lookup(parts[0], table);
    if (!v) return std::nullopt;
    const auto vi = store_.info(*v);
    if ((vi.role == Role::Group && vi.code == Code::List) || vi.role == Role::Empty) return *v;
  }
  std::vector<RelationId> children;
  std::uint8_t level = info.level;
  for (auto c : parts) {
    auto v = instantiate(c, table);
    if (!v) return std::nullopt;
    children.push_back(*v);
    level = std::max(level, store_.info(*v).level);
  }
  const std::uint8_t k = info.level == 1 ? kind::kConstant : info.kind;
  return store_.make_relation(info.code, children, {.level = level, .kind = k, .role = info.role});
}

bool Session::match_into(RelationId pattern, RelationId value, MatchState& state, bool overwrite) {
  if (pattern == value) return true;
  if (!store_.has_variables(pattern)) return equal_values(pattern, value);
  if (store_.is_variable(pattern)) {
    if (key_var_ && pattern == *key_var_) {
      const auto n = numeric(value);
      if (overwrite) {
        if (!n || !std::holds_alternative<std::int64_t>(*n)) return false;
        state.key = std::get<std::int64_t>(*n);
        return true;
      }
      const auto current = state.key ? *state.key : key_;
      return n && std::holds_alternative<std::int64_t>(*n) && std::get<std::int64_t>(*n) == current;
    }
    VarTable& target = is_global(pattern) ? state.globals : state.table;
    std::optional<RelationId> current = target.get(pattern);
    if (!current && is_global(pattern)) current = globals_.get(pattern);
    if (current && !overwrite) return equal_values(*current, value);
    target.set(pattern, value);
    return true;
  }
  const auto pi = store_.info(pattern);
  const auto vi = store_.info(value);
  const auto pc = store_.inverse_refs(pattern).to_vector();
  if (pi.role == Role::Group && pi.code == Code::List && pc.size() == 1 && store_.is_variable(pc[0]) &&
      ((vi.role == Role::Group && vi.code == Code::List) || vi.role == Role::Empty)) {
    if (!overwrite) {
      VarTable& target = is_global(pc[0]) ? state.globals : state.table;
      auto current = target.get(pc[0]);
      if (!current && is_global(pc[0])) current = globals_.get(pc[0]);
      if (current) {
        const auto ci = store_.info(*current);
        if ((ci.role == Role::Group && ci.code == Code::List) || ci.role == Role::Empty) {
          return equal_values(*current, value);
        }
      }
    }
    return match_into(pc[0], value, state, overwrite);
  }
  if (pi.role != vi.role || pi.code != vi.code) return false;
  const auto vc = store_.inverse_refs(value).to_vector();
  if (pc.size() != vc.size()) return false;
  if (pi.code == Code::Conjunction) {
    // multiset matching: try each assignment of value constituents
    std::vector<bool> used(vc.size(), false);
    std::function<bool(std::size_t)> place = [&](std::size_t i) {
      if (i == pc.size()) return true;
      for (std::size_t j = 0; j < vc.size(); ++j) {
        if (used[j]) continue;
        MatchState saved = state;
        if (match_into(pc[i], vc[j], state, overwrite)) {
          used[j] = true;
          if (place(i + 1)) return true;
          used[j] = false;
        }
        state = saved;
      }
      return false;
    };
    return place(0);
  }
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!match_into(pc[i], vc[i], state, overwrite)) return false;
  }
  return true;
}

void Session::commit_globals(const MatchState& state) {
  for (const auto& [var, v] : state.globals.bindings()) globals_.set(var, v);
  if (state.key) key_ = *state.key;
  if (state.key || state.globals.size() > 0) ++effects_;
}

bool Session::match(RelationId pattern, RelationId value, VarTable& table) {
  MatchState state{table, {}, {}};
  if (!match_into(pattern, value, state, false)) return false;
  table = std::move(state.table);
  commit_globals(state);
  return true;
}

bool Session::assign(RelationId pattern, RelationId value, VarTable& table) {
  MatchState state{table, {}, {}};
  if (!match_into(pattern, value, state, true)) return false;
  table = std::move(state.table);
  commit_globals(state);
  return true;
}

std::vector<RelationId> Session::list_elements(RelationId value) const {
  const auto info = store_.info(value);
  if (info.role == Role::Empty) return {};
  if (info.role != Role::Group || info.code != Code::List) {
    throw TypeError("#List expects a list value, got " + store_.text(value));
  }
  return store_.inverse_refs(value).to_vector();
}

// ---------------------------------------------------------------------------
// execution

int Session::for_each_combination(const std::vector<RelationId>& vars, const VarTable& table,
                                  const std::function<int(VarTable&)>& fn) {
  std::vector<std::vector<RelationId>> domains;
  for (auto v : vars) domains.push_back(store_.paradigm_values(v));
  std::function<int(std::size_t, VarTable&)> step = [&](std::size_t i, VarTable& t) -> int {
    if (i == vars.size()) return fn(t);
    for (auto value : domains[i]) {
      VarTable next = t;
      bind(vars[i], value, next);
      const int rc = step(i + 1, next);
      if (rc != 0) return rc;
    }
    return 0;
  };
  VarTable start = table;
  return step(0, start);
}

std::vector<RelationId> Session::call_args(RelationId sentence) const {
  const auto args = store_.inverse_refs(sentence)[1];
  if (store_.info(args).role == Role::Empty) return {};
  return store_.inverse_refs(args).to_vector();
}

ReturnCode Session::call(RelationId sentence, VarTable& table, bool in_condition) {
  const std::string name = function_name(store_, store_.inverse_refs(sentence)[0]);
  auto args = call_args(sentence);
  if (const auto* builtin = find_builtin(name)) {
    if (builtin->second_level) throw ArityError("#" + name + " applies to the following sentence: #" + name + ": S");
    if (static_cast<int>(args.size()) != builtin->arity) {
      throw ArityError("#" + name + " takes " + std::to_string(builtin->arity) + " arguments, got " +
                       std::to_string(args.size()));
    }
    if (!builtin->pure) ++effects_;
    CallContext ctx(*this, name, std::move(args), table, in_condition);
    return builtin->fn(ctx);
  }
  auto it = functions_.find(name);
  if (it == functions_.end()) throw LinkError("no function #" + name);
  ++effects_;
  CallContext ctx(*this, name, std::move(args), table, in_condition);
  return it->second(ctx);
}

int Session::exec_rule(const CachedRule& rule, const VarTable& parent, std::optional<RelationId> target) {
  const RuleView& v = rule.view;
  VarTable table = parent;
  bool pushed = false;
  if (v.a1) {
    // a derived rule sees the parent's bindings only for variables it does not mention
    for (auto var : rule.rule_vars) {
      if (!is_global(var)) table.erase(var);
    }
    if (!target || !match(rule.pattern, *target, table)) return kNoMatch;
    std::vector<std::uint64_t> frame{v.rule.offset()};
    for (auto var : rule.a1_vars) {
      frame.push_back(var.offset());
      const auto value = lookup(var, table);
      frame.push_back(value ? value->offset() : 0);
    }
    auto same = [&](const Frame& f) { return f.key == frame; };
    if (auto hit = std::find_if(stack_.begin(), stack_.end(), same); hit != stack_.end()) {
      cut_depth_ = std::min(cut_depth_, static_cast<std::size_t>(hit - stack_.begin()));
      return kNoMatch;
    }
    if (stack_.size() >= options_.depth_cap) {
      note("derivation depth cap " + std::to_string(options_.depth_cap) + " reached at " + print_rule(store_, v.rule));
      return kInterrupted;
    }
    stack_.push_back({std::move(frame), ++frame_serial_});
    pushed = true;
  }
  struct Pop {
    std::vector<Frame>& stack;
    bool active;
    ~Pop() {
      if (active) stack.pop_back();
    }
  } pop{stack_, pushed};

  bool fired = false;
  int result = kFailed;
  auto body = [&](VarTable& t) -> int {
    fired = true;
    if (observer_) observer_(v.rule, t);
    result = run_sequence(v.right, t);
    return result < 0 ? -1 : 1;
  };
  auto with_condition = [&](VarTable& t) -> int {
    if (!v.cond) return body(t);
    return solve(v.cond, t, [&] { return body(t); });
  };

  if (!v.a2) {
    const int rc = with_condition(table);
    if (rc < 0 && !fired) return kInterrupted;
    return fired ? result : kFailed;
  }

  const auto file = find_file(store_, v.scheme);
  if (!file) throw FileError("no file for scheme " + print_sentence(store_, v.scheme));
  bool any = false;
  for (auto stored : store_.paradigm_values(*file)) {
    VarTable t = table;
    if (!match(v.scheme, stored, t)) continue;
    fired = false;
    const int rc = v.a3 ? solve(v.a3, t, [&] { return with_condition(t); }) : with_condition(t);
    if (rc < 0 && !fired) return kInterrupted;
    if (!fired) continue;
    if (result < 0) return kInterrupted;
    if (!v.a2_all) return result;
    any = any || result == kSucceeded;
  }
  return any ? kSucceeded : kFailed;
}

// Ground goals are tabled. A failure that relied on cutting an enclosing
// frame is only provisional: it is reused while that frame is live, and the
// goal heading the cycle is re-run until no new success turns up.
int Session::derive_mode(RelationId sentence, const VarTable& parent, bool all) {
  const auto head = head_of(sentence);
  if (!head) return kFailed;
  auto it = by_head_.find(*head);
  if (it == by_head_.end()) return kFailed;
  if (auto hit = goal_cache_.find(sentence.offset()); hit != goal_cache_.end() && hit->second.effects == effects_) {
    const CachedGoal& g = hit->second;
    if (g.cut == kNoCut) return g.result;
    if (g.cut < stack_.size() && stack_[g.cut].serial == g.serial) {
      cut_depth_ = std::min(cut_depth_, g.cut);
      return g.result;
    }
  }
  const auto candidates = it->second;  // rules may be reloaded while running
  const std::uint64_t effects_before = effects_;
  const std::size_t outer_cut = cut_depth_;
  const std::size_t depth = stack_.size();
  int result = kFailed;
  for (;;) {
    const std::uint64_t successes_before = successes_;
    cut_depth_ = kNoCut;
    result = kFailed;
    for (auto index : candidates) {
      const int rc = exec_rule(rules_[index], parent, sentence);
      if (rc == kNoMatch) continue;
      if (rc < 0) {
        result = kInterrupted;
        break;
      }
      if (rc == kSucceeded) {
        result = kSucceeded;
        if (!all) break;
      }
    }
    const bool pure = effects_ == effects_before;
    const bool leads = cut_depth_ == kNoCut || cut_depth_ >= depth;
    if (pure && result == kFailed && leads && cut_depth_ != kNoCut && successes_ != successes_before) continue;
    if (pure && result == kSucceeded) {
      goal_cache_[sentence.offset()] = {result, effects_, kNoCut, 0};
      ++successes_;
    } else if (pure && result == kFailed) {
      if (leads) {
        goal_cache_[sentence.offset()] = {result, effects_, kNoCut, 0};
      } else {
        goal_cache_[sentence.offset()] = {result, effects_, cut_depth_, stack_[cut_depth_].serial};
      }
    }
    break;
  }
  if (result == kFailed && cut_depth_ < depth) {
    cut_depth_ = std::min(outer_cut, cut_depth_);
  } else {
    cut_depth_ = outer_cut;
  }
  return result;
}

ReturnCode Session::derive(RelationId sentence, const VarTable& table) {
  ++effects_;
  return derive_mode(sentence, table, true);
}

int Session::prove_ground(RelationId sentence, const VarTable& table, bool all) {
  int result = kFailed;
  if (store_.info(sentence).role == Role::Data) {
    for (auto file : all_files(store_)) {
      for (auto stored : store_.paradigm_values(file)) {
        if (equal_values(stored, sentence)) {
          result = kSucceeded;
          break;
        }
      }
      if (result == kSucceeded) break;
    }
    if (result == kSucceeded && !all) return result;
  }
  const int rc = derive_mode(sentence, table, all);
  if (rc < 0) return rc;
  return rc == kSucceeded ? kSucceeded : result;
}

bool Session::provable(RelationId sentence) {
  stack_.clear();
  ++effects_;
  return prove_ground(sentence, VarTable{}, false) == kSucceeded;
}

std::vector<VarTable> Session::search_file(RelationId scheme, const VarTable& table, bool all) {
  const auto file = find_file(store_, scheme);
  if (!file) throw FileError("no file for scheme " + print_sentence(store_, scheme));
  std::vector<VarTable> out;
  for (auto stored : store_.paradigm_values(*file)) {
    VarTable t = table;
    if (!match(scheme, stored, t)) continue;
    out.push_back(std::move(t));
    if (!all) break;
  }
  return out;
}

int Session::run_sequence(const std::vector<RelationId>& items, const VarTable& table) {
  for (auto item : items) {
    const int rc = run_sentence(item, table);
    if (rc <= 0) return rc;
  }
  return kSucceeded;
}

int Session::prove_in_body(RelationId sentence, const VarTable& table) {
  const auto vars = unbound_variables(sentence, table);
  return for_each_combination(vars, table, [&](VarTable& t) {
    const auto ground = instantiate(sentence, t);
    const int rc = prove_ground(*ground, t, true);
    return rc == kFailed ? 0 : rc;
  });
}

int Session::run_list(RelationId list, const VarTable& table) {
  const auto items = store_.inverse_refs(list).to_vector();
  if (items.empty()) return kFailed;
  const auto first = store_.info(items[0]);
  if (first.role == Role::Call && function_name(store_, store_.inverse_refs(items[0])[0]) == "List" &&
      store_.info(store_.inverse_refs(items[0])[1]).level == 1) {
    const auto args = call_args(items[0]);
    if (args.size() != 1) throw ArityError("#List takes 1 argument");
    const auto value = instantiate(args[0], table);
    if (!value) throw BindingError("#List: argument is unbound");
    const std::vector<RelationId> rest(items.begin() + 1, items.end());
    bool any = false;
    for (auto element : list_elements(*value)) {
      VarTable t = table;
      if (!assign(args[0], element, t)) continue;
      const int rc = run_sequence(rest, t);
      if (rc < 0) return kInterrupted;
      any = any || rc == kSucceeded;
    }
    return any ? kSucceeded : kFailed;
  }
  const bool searching = std::any_of(items.begin(), items.end(),
                                     [&](RelationId i) { return store_.info(i).role != Role::Call; });
  if (searching) {
    std::vector<RelationId> vars;
    for (auto item : items) {
      for (auto v : unbound_variables(item, table)) {
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
      }
    }
    bool any = false;
    const int rc = for_each_combination(vars, table, [&](VarTable& t) {
      const int r = run_sequence(items, t);
      if (r < 0) return -1;
      any = any || r == kSucceeded;
      return 0;
    });
    if (rc < 0) return kInterrupted;
    return any ? kSucceeded : kFailed;
  }
  std::size_t count = 0;
  while (count < options_.repeat_cap) {
    const int rc = run_sequence(items, table);
    if (rc < 0) return kInterrupted;
    if (rc == kFailed) break;
    ++count;
  }
  if (count == options_.repeat_cap) note("list repetition stopped after " + std::to_string(count) + " iterations");
  return count > 0 ? kSucceeded : kFailed;
}

ReturnCode Session::run_sentence(RelationId sentence, const VarTable& parent) {
  VarTable table = parent;
  const auto info = store_.info(sentence);
  switch (info.role) {
    case Role::Call: {
      const auto parts = store_.inverse_refs(sentence);
      if (store_.info(parts[1]).level == 2) {
        const std::string name = function_name(store_, parts[0]);
        const RelationId target = parts[1];
        if (name == "Save" || name == "Delete") ++effects_;
        if (name == "Save") return save_following(*this, target, table);
        if (name == "Delete") return delete_following(*this, target, table);
        const int rc = run_sentence(target, table);
        return rc < 0 ? rc : (rc == kSucceeded ? kFailed : kSucceeded);
      }
      const ReturnCode rc = call(sentence, table, false);
      if (rc > kKeyThreshold) {
        key_ = rc;
        ++effects_;
      }
      if (rc >= kKeyThreshold) {
        // the unit analyses its derivations itself; the call counts as done
        if (const auto ground = instantiate(sentence, table)) {
          last_derivation_ = derive_mode(*ground, table, true);
        } else {
          note("call " + print_sentence(store_, sentence) + " returned a key code with unbound arguments");
          last_derivation_ = kFailed;
        }
        return kSucceeded;
      }
      return rc;
    }
    case Role::Named:
    case Role::Data: return prove_in_body(sentence, table);
    case Role::ListWrap: return run_list(sentence, table);
    case Role::Cond: return solve(sentence, table, [] { return 1; });
    default: throw StructureError(to_string(sentence) + " is not an executable sentence");
  }
}

// ---------------------------------------------------------------------------
// conditions

int Session::solve_and(const std::vector<RelationId>& items, std::size_t i, VarTable& table, const Cont& k) {
  if (i == items.size()) return k();
  return solve(items[i], table, [&] { return solve_and(items, i + 1, table, k); });
}

int Session::solve_list_call(RelationId call_sentence, VarTable& table, const Cont& k) {
  const auto args = call_args(call_sentence);
  if (args.size() != 1) throw ArityError("#List takes 1 argument");
  const auto value = instantiate(args[0], table);
  if (!value) throw BindingError("#List: argument is unbound");
  for (auto element : list_elements(*value)) {
    VarTable saved = table;
    if (!assign(args[0], element, table)) continue;
    const int r = k();
    if (r != 0) return r;
    table = saved;
  }
  return 0;
}

int Session::solve(RelationId item, VarTable& table, const Cont& k) {
  const auto info = store_.info(item);
  const auto parts = store_.inverse_refs(item).to_vector();
  switch (info.role) {
    case Role::Cond:
    case Role::ListWrap: {
      if (info.role == Role::Cond && (info.code == Code::Sequence || info.code == Code::Conjunction)) {
        return solve_and(parts, 0, table, k);
      }
      for (auto alternative : parts) {
        VarTable saved = table;
        const int r = solve(alternative, table, k);
        if (r != 0) return r;
        table = saved;
      }
      return 0;
    }
    case Role::Call: {
      const std::string name = function_name(store_, parts[0]);
      VarTable saved = table;
      int rc;
      if (store_.info(parts[1]).level == 2) {
        if (name == "Not") {
          VarTable probe = table;
          rc = solve(parts[1], probe, [] { return 1; });
          if (rc < 0) return rc;
          if (rc == 1) return 0;
          return k();
        }
        ++effects_;
        rc = name == "Save" ? save_following(*this, parts[1], table) : delete_following(*this, parts[1], table);
      } else if (name == "List") {
        return solve_list_call(item, table, k);
      } else {
        rc = call(item, table, true);
        if (rc >= kKeyThreshold) rc = kSucceeded;
      }
      if (rc != kSucceeded) {
        if (rc == kFailed) table = saved;
        return rc;
      }
      const int r = k();
      if (r == 0) table = saved;
      return r;
    }
    case Role::Data: {
      // stored sentences first, then derivations
      for (auto file : all_files(store_)) {
        for (auto stored : store_.paradigm_values(file)) {
          VarTable t = table;
          if (!match(item, stored, t)) continue;
          VarTable saved = table;
          table = t;
          const int r = k();
          if (r != 0) return r;
          table = saved;
        }
      }
      [[fallthrough]];
    }
    case Role::Named: {
      const auto vars = unbound_variables(item, table);
      return for_each_combination(vars, table, [&](VarTable& t) {
        const auto ground = instantiate(item, t);
        const int rc = derive_mode(*ground, t, false);
        if (rc < 0) return -1;
        if (rc != kSucceeded) return 0;
        VarTable saved = table;
        table = t;
        const int r = k();
        if (r == 0) table = saved;
        return r;
      });
    }
    default: throw StructureError(to_string(item) + " cannot be used as a condition");
  }
}

ReturnCode Session::eval_condition(RelationId condition, VarTable& table) {
  ++effects_;
  const int rc = solve(condition, table, [] { return 1; });
  return rc;
}

// ---------------------------------------------------------------------------
// entry points

ReturnCode Session::fire_entry_rules(std::int64_t key_code) {
  key_ = key_code;
  stack_.clear();
  ++effects_;
  bool any = false;
  try {
    for (auto index : entry_rules_) {
      const int rc = exec_rule(rules_[index], VarTable{}, std::nullopt);
      if (rc < 0) return kInterrupted;
      any = any || rc == kSucceeded;
    }
  } catch (const ExitRequest&) {
    stack_.clear();
    return kFailed;
  }
  return any ? kSucceeded : kFailed;
}

ReturnCode Session::execute_rule(RelationId rule, VarTable& table) {
  ++effects_;
  for (const auto& cached : rules_) {
    if (cached.view.rule != rule) continue;
    std::optional<RelationId> target;
    if (cached.view.a1) {
      target = instantiate(cached.pattern, table);
      if (!target) throw BindingError("left part of " + print_rule(store_, rule) + " is not bound");
    }
    const int rc = exec_rule(cached, table, target);
    return rc == kNoMatch ? kFailed : rc;
  }
  throw NotFoundError(to_string(rule) + " is not a rule of this session");
}

}  // namespace shmkb
