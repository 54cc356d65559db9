#include "shmkb/scripted_host.hpp"

#include "shmkb/ast.hpp"
#include "shmkb/error.hpp"

namespace shmkb {

ScriptedHost::ScriptedHost(const nlohmann::json& script) {
  if (!script.is_object()) throw DomainError("host script must be an object of function names");
  for (const auto& [name, list] : script.items()) {
    if (!list.is_array()) throw DomainError("steps for " + name + " must be an array");
    steps_[name];
    for (const auto& step : list) push(name, step);
  }
}

void ScriptedHost::push(const std::string& function, const nlohmann::json& step) {
  steps_[function].push_back(step);
}

std::size_t ScriptedHost::pending() const {
  std::size_t n = 0;
  for (const auto& [name, q] : steps_) n += q.size();
  return n;
}

void ScriptedHost::install(Session& session) {
  for (const auto& [name, q] : steps_) {
    session.register_function(name, [this](CallContext& ctx) { return run(ctx); });
  }
}

RelationId ScriptedHost::to_value(Store& store, const nlohmann::json& value) {
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.find_first_not_of(" \t") == std::string::npos) return store.empty(1);
    return store.intern_word(text);
  }
  if (value.is_number_integer()) return store.intern_number_word(value.get<std::int64_t>());
  if (value.is_number()) return store.intern_number_word(value.get<double>());
  if (value.is_array()) {
    if (value.empty()) return store.empty(1);
    std::vector<RelationId> items;
    for (const auto& v : value) items.push_back(to_value(store, v));
    return store.make_relation(Code::List, items, {.level = 1, .role = Role::Group});
  }
  if (value.is_object() && value.contains("sequence")) {
    const auto text = value["sequence"].get<std::string>();
    const auto rule = parse_rule(tokenize("-> #f(\"" + text + "\");"));
    return intern_term(store, rule.right.front().args.front());
  }
  throw DomainError("unsupported script value " + value.dump());
}

ReturnCode ScriptedHost::to_code(const nlohmann::json& code) {
  if (code.is_number_integer()) return code.get<int>();
  if (code.is_string()) {
    const auto n = parse_number_word(code.get<std::string>());
    if (n && std::holds_alternative<std::int64_t>(*n)) return static_cast<ReturnCode>(std::get<std::int64_t>(*n));
  }
  throw DomainError("bad return code " + code.dump());
}

ReturnCode ScriptedHost::run(CallContext& ctx) {
  Call record{ctx.name(), {}};
  for (std::size_t i = 0; i < ctx.arity(); ++i) {
    const auto v = ctx.value(i);
    if (!v) {
      record.args.push_back("?");
      continue;
    }
    try {
      record.args.push_back(print_term(ctx.store(), *v));
    } catch (const StructureError&) {
      record.args.push_back(ctx.store().text(*v));
    }
  }
  calls_.push_back(std::move(record));
  auto& q = steps_[ctx.name()];
  if (q.empty()) return kSucceeded;
  const nlohmann::json step = q.front();
  q.pop_front();
  if (step.contains("set")) {
    for (const auto& [var, value] : step["set"].items()) ctx.set(var, to_value(ctx.store(), value));
  }
  return step.contains("return") ? to_code(step["return"]) : kSucceeded;
}

}  // namespace shmkb
