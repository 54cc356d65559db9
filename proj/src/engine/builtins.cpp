#include "shmkb/builtins.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

#include "shmkb/error.hpp"

extern char** environ;

namespace shmkb {
namespace {

long double as_long_double(const Number& n) {
  return std::visit([](auto x) { return static_cast<long double>(x); }, n);
}

bool is_text(const NodeInfo& info) { return info.role == Role::Word || info.role == Role::Empty; }

// <0, 0, >0 like strcmp; numbers numerically, words by text
int compare(Session& s, RelationId a, RelationId b) {
  const auto na = s.numeric(a);
  const auto nb = s.numeric(b);
  if (na && nb) {
    const auto x = as_long_double(*na);
    const auto y = as_long_double(*nb);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (is_text(s.store().info(a)) && is_text(s.store().info(b))) {
    const auto ta = s.store().text(a);
    const auto tb = s.store().text(b);
    return ta.compare(tb) < 0 ? -1 : (ta == tb ? 0 : 1);
  }
  if (s.equal_values(a, b)) return 0;
  return s.store().compare_values(a, b);
}

RelationId coerce(Session& s, RelationId value) {
  if (s.store().info(value).role != Role::Word) return value;
  if (auto n = s.numeric(value)) return s.store().intern_number_word(*n);
  return value;
}

Number arithmetic(const Number& a, const Number& b, int sign) {
  if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
    return std::get<std::int64_t>(a) + sign * std::get<std::int64_t>(b);
  }
  return static_cast<double>(as_long_double(a) + sign * as_long_double(b));
}

ReturnCode step(CallContext& c, int sign) {
  if (!c.store().is_variable(c.arg(0))) throw AssignmentError("#" + c.name() + ": first argument must be a variable");
  const auto current = c.session().numeric(c.required(0));
  const auto delta = c.session().numeric(c.required(1));
  if (!current || !delta) throw TypeError("#" + c.name() + " needs numeric values");
  c.assign(0, c.store().intern_number_word(arithmetic(*current, *delta, sign)));
  return kSucceeded;
}

// level-0 structure behind a word, the node itself otherwise
RelationId structure(const Store& store, RelationId id) {
  if (store.info(id).role == Role::Word) return store.inverse_refs(id).front();
  return id;
}

std::string text_arg(CallContext& c, std::size_t i) { return c.store().text(c.required(i)); }

std::string format_now(const char* pattern) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, pattern, &tm);
  return buf;
}

ReturnCode compare_dates(CallContext& c, bool greater) {
  const auto a = date_ordinal(text_arg(c, 0));
  const auto b = date_ordinal(text_arg(c, 1));
  if (!a || !b) return kFailed;
  return (greater ? *a > *b : *a < *b) ? kSucceeded : kFailed;
}

void require_enabled(CallContext& c) {
  if (!c.session().options().enable_spawn) {
    throw UnsupportedError("#" + c.name() + " is disabled; enable it in the engine options");
  }
}

ReturnCode run_process(const std::vector<std::string>& argv, bool wait) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), environ) != 0) return kFailed;
  if (!wait) return kSucceeded;
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) return kFailed;
  return WIFEXITED(status) && WEXITSTATUS(status) == 0 ? kSucceeded : kFailed;
}

const std::vector<BuiltinDescriptor>& table() {
  static const std::vector<BuiltinDescriptor> all = {
      {"Belong", 2, false,
       [](CallContext& c) {
         const Store& s = c.store();
         const RelationId part = structure(s, c.required(0));
         const RelationId whole = structure(s, c.required(1));
         const auto refs = s.inverse_refs(whole);
         if (s.info(whole).elementary) return kFailed;
         return std::find(refs.begin(), refs.end(), part) != refs.end() ? kSucceeded : kFailed;
       }},
      {"Dec", 2, false, [](CallContext& c) { return step(c, -1); }},
      {"Eq", 2, false,
       [](CallContext& c) { return c.session().equal_values(c.required(0), c.required(1)) ? kSucceeded : kFailed; }},
      {"Fix", 2, false,
       [](CallContext& c) {
         const RelationId value = coerce(c.session(), c.required(1));
         return c.assign(0, value) ? kSucceeded : kFailed;
       }},
      {"Ge", 2, false,
       [](CallContext& c) { return compare(c.session(), c.required(0), c.required(1)) >= 0 ? kSucceeded : kFailed; }},
      {"Grtdat", 2, false, [](CallContext& c) { return compare_dates(c, true); }},
      {"Inc", 2, false, [](CallContext& c) { return step(c, 1); }},
      {"Le", 2, false,
       [](CallContext& c) { return compare(c.session(), c.required(0), c.required(1)) <= 0 ? kSucceeded : kFailed; }},
      {"Ltldat", 2, false, [](CallContext& c) { return compare_dates(c, false); }},
      {"Move", 2, false, [](CallContext& c) { return c.assign(0, c.required(1)) ? kSucceeded : kFailed; }},
      {"Ne", 2, false,
       [](CallContext& c) { return c.session().equal_values(c.required(0), c.required(1)) ? kFailed : kSucceeded; }},
      {"Part", 2, false,
       [](CallContext& c) {
         Session& s = c.session();
         const RelationId part = c.required(0);
         const RelationId whole = c.required(1);
         const auto pi = s.store().info(part);
         const auto wi = s.store().info(whole);
         if (pi.role == Role::Empty) return kSucceeded;
         if (is_text(pi) && is_text(wi)) {
           return s.store().chars(whole).find(s.store().chars(part)) != std::u32string::npos ? kSucceeded : kFailed;
         }
         if (wi.role == Role::Empty || wi.level == 0 || wi.role == Role::Word) return kFailed;
         std::vector<RelationId> needle{part};
         if (pi.role != Role::Word) needle = s.store().inverse_refs(part).to_vector();
         const auto hay = s.store().inverse_refs(whole).to_vector();
         auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(),
                               [&](RelationId x, RelationId y) { return s.equal_values(x, y); });
         return it != hay.end() ? kSucceeded : kFailed;
       }},
      {"Spawn", 2, false,
       [](CallContext& c) {
         require_enabled(c);
         return run_process({text_arg(c, 0), text_arg(c, 1)}, false);
       }, false},
      {"Date", 1, false,
       [](CallContext& c) {
         c.assign(0, c.store().intern_word(format_now("%Y-%m-%d")));
         return kSucceeded;
       }, false},
      {"List", 1, false,
       [](CallContext& c) {
         const RelationId value = c.required(0);
         const auto info = c.store().info(value);
         if (info.role == Role::Empty) return kFailed;
         if (info.role != Role::Group || info.code != Code::List) {
           throw TypeError("#List expects a list value, got " + c.store().text(value));
         }
         return c.assign(0, c.store().inverse_refs(value).front()) ? kSucceeded : kFailed;
       }},
      {"SystemR", 1, false,
       [](CallContext& c) {
         require_enabled(c);
         return run_process({"/bin/sh", "-c", text_arg(c, 0)}, true);
       }, false},
      {"Time", 1, false,
       [](CallContext& c) {
         c.assign(0, c.store().intern_word(format_now("%H:%M:%S")));
         return kSucceeded;
       }, false},
      {"Tstdat", 1, false,
       [](CallContext& c) { return date_ordinal(text_arg(c, 0)) ? kSucceeded : kFailed; }},
      {"Break", 0, false, [](CallContext&) { return kInterrupted; }},
      {"Delete", 0, true, {}},
      {"Exit", 0, false, [](CallContext&) -> ReturnCode { throw ExitRequest{}; }, false},
      {"Not", 0, true, {}},
      {"Save", 0, true, {}},
  };
  return all;
}

void collect_variables(const Store& store, RelationId node, std::vector<RelationId>& out) {
  if (!store.has_variables(node)) return;
  if (store.is_variable(node)) {
    if (std::find(out.begin(), out.end(), node) == out.end()) out.push_back(node);
    return;
  }
  for (auto c : store.inverse_refs(node)) collect_variables(store, c, out);
}

RelationId file_of(const Store& store, RelationId sentence) {
  const auto file = find_file(store, sentence);
  if (!file) throw FileError("no file for scheme " + print_sentence(store, sentence));
  return *file;
}

}  // namespace

std::span<const BuiltinDescriptor> builtins() { return table(); }

const BuiltinDescriptor* find_builtin(std::string_view name) {
  for (const auto& b : table()) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::optional<std::int64_t> date_ordinal(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  int consumed = 0;
  const std::string s(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u%n", &y, &m, &d, &consumed) != 3 || consumed != 10) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

ReturnCode save_following(Session& session, RelationId sentence, VarTable& table) {
  Store& store = session.store();
  const RelationId file = file_of(store, sentence);
  const auto ground = session.instantiate(sentence, table);
  if (!ground) throw BindingError("#Save: unbound variables in " + print_sentence(store, sentence));
  store.paradigm_insert(file, *ground);
  std::vector<RelationId> vars;
  collect_variables(store, sentence, vars);
  std::map<RelationId, RelationId> values;
  for (auto v : vars) {
    if (auto value = session.lookup(v, table)) values.emplace(v, *value);
  }
  record_variable_values(store, values);
  return kSucceeded;
}

ReturnCode delete_following(Session& session, RelationId sentence, VarTable& table) {
  Store& store = session.store();
  const RelationId file = file_of(store, sentence);
  for (auto stored : store.paradigm_values(file)) {
    VarTable t = table;
    if (!session.match(sentence, stored, t)) continue;
    store.paradigm_erase(file, stored);
    table = t;
    // values no other stored sentence still uses leave the variable paradigms
    std::vector<RelationId> vars;
    collect_variables(store, sentence, vars);
    for (auto v : vars) {
      const auto value = session.lookup(v, table);
      if (!value || !store.paradigm_contains(v, *value)) continue;
      bool used = false;
      for (auto f : all_files(store)) {
        const RelationId scheme = store.paradigm_defining(f);
        for (auto s : store.paradigm_values(f)) {
          std::map<RelationId, RelationId> b;
          if (scheme_bindings(store, scheme, s, b) && b.count(v) && b[v] == *value) {
            used = true;
            break;
          }
        }
        if (used) break;
      }
      if (!used) store.paradigm_erase(v, *value);
    }
    return kSucceeded;
  }
  return kFailed;
}

}  // namespace shmkb
