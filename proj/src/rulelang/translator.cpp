#include <fstream>
#include <sstream>

#include "shmkb/error.hpp"
#include "shmkb/translate.hpp"

namespace shmkb {
namespace {

constexpr const char* kFilesRoot = "files";
constexpr const char* kRulesPrefix = "rules:";

RelationId args_node(Store& store, const std::vector<Term>& args) {
  if (args.empty()) return store.empty(1);
  Term group;
  group.kind = Term::Kind::Group;
  group.code = Code::Sequence;
  group.items = args;
  return intern_term(store, group);
}

RelationId sentence_node(Store& store, Code code, std::span<const RelationId> children, std::uint8_t kind, Role role) {
  return store.make_relation(code, children, {.level = 2, .kind = kind, .role = role});
}

OrderPolicy scheme_policy(const Store& store, RelationId node) {
  if (store.is_variable(node)) return store.paradigm_policy(node);
  const auto info = store.info(node);
  if (info.role == Role::Paradigm || info.elementary || info.role == Role::Word) return OrderPolicy::Chronological;
  for (auto c : store.inverse_refs(node)) {
    if (!store.has_variables(c)) continue;
    const auto p = scheme_policy(store, c);
    if (p != OrderPolicy::Chronological) return p;
  }
  return OrderPolicy::Chronological;
}

bool is_second_level_name(std::string_view name) { return name == "Save" || name == "Delete" || name == "Not"; }

void register_files(Store& store, const Sentence& s) {
  if (s.kind == Sentence::Kind::SecondLevel && (s.name == "Save" || s.name == "Delete")) {
    const Sentence& target = s.items.front();
    if (target.kind == Sentence::Kind::Data) ensure_file(store, intern_sentence(store, target));
  }
  for (const auto& item : s.items) register_files(store, item);
}

RelationId intern_rule(Store& store, const RuleAst& ast) {
  const RelationId none = store.empty(2);
  RelationId left = none;
  if (ast.a1) {
    const RelationId a1 = intern_sentence(store, *ast.a1);
    RelationId a2 = none;
    if (ast.a2) {
      a2 = intern_sentence(store, *ast.a2);
      const Sentence* scheme = &*ast.a2;
      if (scheme->kind == Sentence::Kind::List && scheme->items.size() == 1) scheme = &scheme->items.front();
      if (scheme->kind != Sentence::Kind::Data) {
        throw ParseError("A2 must be a file scheme or a list holding one", ast.a2->position);
      }
      ensure_file(store, intern_sentence(store, *scheme));
    }
    const RelationId a3 = ast.a3 ? intern_sentence(store, *ast.a3) : none;
    const RelationId parts[] = {a1, a2, a3};
    left = sentence_node(store, Code::Sequence, parts, 0, Role::Part);
  }
  RelationId right = none;
  if (!ast.right.empty()) {
    std::vector<RelationId> items;
    for (const auto& b : ast.right) {
      register_files(store, b);
      items.push_back(intern_sentence(store, b));
    }
    right = sentence_node(store, Code::Sequence, items, 0, Role::Part);
  }
  RelationId cond = none;
  if (ast.cond) {
    register_files(store, *ast.cond);
    cond = intern_sentence(store, *ast.cond);
  }
  const bool inverse = ast.a2.has_value() || ast.right.empty();
  const RelationId parts[] = {left, right, cond};
  const RelationId rule = store.make_relation(
      Code::Sequence, parts,
      {.level = 3, .kind = inverse ? kind::kInverseRule : kind::kDirectRule, .role = Role::Rule});

  // `A1, F -> ;` with a ground A1 fitting F puts A1 into file F right away
  if (ast.a1 && ast.a2 && ast.right.empty() && !ast.cond) {
    const RelationId a1 = intern_sentence(store, *ast.a1);
    const Sentence* scheme = &*ast.a2;
    if (scheme->kind == Sentence::Kind::List && scheme->items.size() == 1) scheme = &scheme->items.front();
    const RelationId scheme_node = intern_sentence(store, *scheme);
    std::map<RelationId, RelationId> bindings;
    if (!store.has_variables(a1) && store.info(a1).role == Role::Data &&
        scheme_bindings(store, scheme_node, a1, bindings)) {
      store.paradigm_insert(ensure_file(store, scheme_node), a1);
      record_variable_values(store, bindings);
    }
  }
  return rule;
}

RelationId build_rule_file(Store& store, const Program& program, const std::string& source, std::int64_t mtime) {
  const RelationId info_parts[] = {store.intern_word(source), store.intern_number_word(mtime)};
  const RelationId info =
      store.make_relation(Code::Sequence, info_parts, {.level = 2, .role = Role::SourceInfo});
  const RelationId head[] = {info};
  const RelationId file = store.make_relation(Code::Sequence, head, {.level = 3, .role = Role::RuleFile, .unique = true});
  for (const auto& ast : program.rules) {
    const RelationId rule = intern_rule(store, ast);
    const auto existing = store.inverse_refs(file);
    if (std::find(existing.begin(), existing.end(), rule) == existing.end()) store.append_child(file, rule);
  }
  return file;
}

void replace_rule_file(Store& store, const std::string& root, RelationId fresh) {
  const auto old = store.root(root);
  store.set_root(root, fresh);
  if (old && *old != fresh && store.is_live(*old)) store.remove_relation(*old);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read rule file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RelationId translate_with_rollback(Store& store, const Program& program, const std::string& source,
                                   std::int64_t mtime) {
  const auto cp = store.checkpoint();
  try {
    const RelationId file = build_rule_file(store, program, source, mtime);
    replace_rule_file(store, rule_file_root(source), file);
    return file;
  } catch (...) {
    store.rollback(cp);
    throw;
  }
}

}  // namespace

RelationId intern_term(Store& store, const Term& term) {
  switch (term.kind) {
    case Term::Kind::Word: return store.intern_word(term.text);
    case Term::Kind::Number: return store.intern_number_word(term.number);
    case Term::Kind::Variable: return store.variable(term.text);
    case Term::Kind::Empty: return store.empty(1);
    case Term::Kind::Group: {
      if (term.items.empty()) return store.empty(1);
      std::vector<RelationId> items;
      bool vars = false;
      for (const auto& t : term.items) {
        items.push_back(intern_term(store, t));
        vars = vars || store.has_variables(items.back());
      }
      return store.make_relation(term.code, items,
                                 {.level = 1, .kind = vars ? kind::kHasVariables : kind::kConstant, .role = Role::Group});
    }
  }
  throw StructureError("unknown term kind");
}

RelationId function_node(Store& store, std::string_view name) {
  const RelationId word = store.intern_word(name);
  return store.make_relation(Code::Sequence, std::span(&word, 1), {.level = 1, .role = Role::Function});
}

std::string function_name(const Store& store, RelationId function) {
  return store.text(store.inverse_refs(function).front());
}

RelationId intern_sentence(Store& store, const Sentence& s) {
  switch (s.kind) {
    case Sentence::Kind::Call: {
      if (is_second_level_name(s.name) && s.name != "Not" && !s.args.empty()) {
        throw ParseError("#" + s.name + " takes the following sentence, written #" + s.name + ": S", s.position);
      }
      const RelationId parts[] = {function_node(store, s.name), args_node(store, s.args)};
      return sentence_node(store, Code::Sequence, parts, kind::kExecutable, Role::Call);
    }
    case Sentence::Kind::SecondLevel: {
      if (!is_second_level_name(s.name)) {
        throw ParseError("#" + s.name + " is not a second-level function", s.position);
      }
      const RelationId parts[] = {function_node(store, s.name), intern_sentence(store, s.items.front())};
      return sentence_node(store, Code::Sequence, parts, kind::kExecutable, Role::Call);
    }
    case Sentence::Kind::Named: {
      const RelationId parts[] = {store.intern_word("$" + s.name), args_node(store, s.args)};
      return sentence_node(store, Code::Sequence, parts, kind::kNonExecutable, Role::Named);
    }
    case Sentence::Kind::Data: {
      std::vector<RelationId> terms;
      for (const auto& t : s.terms) terms.push_back(intern_term(store, t));
      return sentence_node(store, s.code, terms, kind::kNonExecutable, Role::Data);
    }
    case Sentence::Kind::List:
    case Sentence::Kind::Cond: {
      std::vector<RelationId> items;
      for (const auto& i : s.items) items.push_back(intern_sentence(store, i));
      if (s.kind == Sentence::Kind::List) {
        return sentence_node(store, Code::List, items, kind::kNonExecutable, Role::ListWrap);
      }
      return sentence_node(store, s.code, items, kind::kNonExecutable, Role::Cond);
    }
  }
  throw StructureError("unknown sentence kind");
}

// ---------------------------------------------------------------------------
// files

RelationId ensure_file(Store& store, RelationId scheme) {
  if (auto existing = find_file(store, scheme)) return *existing;
  if (store.info(scheme).level != 2) throw StructureError("a file scheme must be a sentence");
  const RelationId file = store.make_paradigm(2, kind::kNonExecutable, scheme, scheme_policy(store, scheme));
  auto registry = store.root(kFilesRoot);
  if (!registry) {
    registry = store.make_relation(Code::Disjunction, std::span(&file, 1),
                                   {.level = 3, .role = Role::RuleSet, .unique = true});
    store.set_root(kFilesRoot, *registry);
  } else {
    store.append_child(*registry, file);
  }
  return file;
}

std::optional<RelationId> find_file(const Store& store, RelationId scheme) {
  const auto p = store.find_paradigm(scheme);
  if (p && store.info(*p).level == 2) return p;
  return std::nullopt;
}

std::vector<RelationId> all_files(const Store& store) {
  const auto registry = store.root(kFilesRoot);
  if (!registry) return {};
  return store.inverse_refs(*registry).to_vector();
}

bool scheme_bindings(const Store& store, RelationId scheme, RelationId value, std::map<RelationId, RelationId>& out) {
  if (scheme == value) return true;
  if (!store.has_variables(scheme)) return false;
  if (store.is_variable(scheme)) {
    auto [it, inserted] = out.emplace(scheme, value);
    return inserted || it->second == value;
  }
  const auto si = store.info(scheme);
  const auto vi = store.info(value);
  const auto sc = store.inverse_refs(scheme).to_vector();
  const bool list_value = (vi.role == Role::Group && vi.code == Code::List) || vi.role == Role::Empty;
  if (si.role == Role::Group && si.code == Code::List && sc.size() == 1 && store.is_variable(sc[0]) && list_value) {
    return scheme_bindings(store, sc[0], value, out);
  }
  if (si.role != vi.role || si.code != vi.code) return false;
  const auto vc = store.inverse_refs(value).to_vector();
  if (sc.size() != vc.size()) return false;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    if (!scheme_bindings(store, sc[i], vc[i], out)) return false;
  }
  return true;
}

void record_variable_values(Store& store, const std::map<RelationId, RelationId>& bindings) {
  for (const auto& [var, value] : bindings) {
    if (store.variable_name(var) == "key") continue;
    if (store.info(value).level <= store.info(var).level) store.paradigm_insert(var, value);
  }
}

// ---------------------------------------------------------------------------
// rule files

std::string rule_file_root(const std::string& path) { return kRulesPrefix + path; }

std::int64_t file_mtime(const std::filesystem::path& path) {
  return static_cast<std::int64_t>(std::filesystem::last_write_time(path).time_since_epoch().count());
}

RelationId translate_text(Store& store, std::string_view text, const std::string& source, std::int64_t mtime) {
  const Program program = parse_program(text);
  return translate_with_rollback(store, program, source, mtime);
}

RelationId translate_file(Store& store, const std::filesystem::path& path) {
  const auto absolute = std::filesystem::absolute(path).lexically_normal();
  const std::string text = read_text(absolute);
  const auto mtime = file_mtime(absolute);
  const Program program = parse_program(text);
  return translate_with_rollback(store, program, absolute.string(), mtime);
}

bool retranslate_if_modified(Store& store, RelationId& rule_file) {
  const SourceInfo info = rule_file_source(store, rule_file);
  std::error_code ec;
  if (!std::filesystem::exists(info.path, ec)) {
    throw StaleSourceError("rule source " + info.path + " no longer exists; keeping the translated rules");
  }
  if (file_mtime(info.path) == info.mtime) return false;
  rule_file = translate_file(store, info.path);
  return true;
}

std::vector<RelationId> rule_files(const Store& store) {
  std::vector<RelationId> out;
  for (const auto& [name, id] : store.roots()) {
    if (name.rfind(kRulesPrefix, 0) == 0) out.push_back(id);
  }
  return out;
}

SourceInfo rule_file_source(const Store& store, RelationId rule_file) {
  if (store.info(rule_file).role != Role::RuleFile) throw StructureError(to_string(rule_file) + " is not a rule file");
  const auto info = store.inverse_refs(rule_file).front();
  const auto parts = store.inverse_refs(info);
  SourceInfo out;
  out.path = store.text(parts[0]);
  out.mtime = std::get<std::int64_t>(*store.number_value(parts[1]));
  return out;
}

std::vector<RelationId> rule_file_rules(const Store& store, RelationId rule_file) {
  const auto refs = store.inverse_refs(rule_file);
  return {std::next(refs.begin()), refs.end()};
}

RuleView decode_rule(const Store& store, RelationId rule) {
  const auto info = store.info(rule);
  if (info.role != Role::Rule) throw StructureError(to_string(rule) + " is not a rule");
  RuleView v;
  v.rule = rule;
  v.kind = info.kind;
  const auto parts = store.inverse_refs(rule).to_vector();
  auto present = [&store](RelationId id) { return store.info(id).role != Role::Empty; };
  if (present(parts[0])) {
    const auto left = store.inverse_refs(parts[0]).to_vector();
    v.a1 = left[0];
    if (present(left[1])) {
      v.a2 = left[1];
      v.scheme = left[1];
      if (store.info(left[1]).role == Role::ListWrap) {
        v.a2_all = true;
        v.scheme = store.inverse_refs(left[1]).front();
      }
    }
    if (present(left[2])) v.a3 = left[2];
  }
  if (present(parts[1])) v.right = store.inverse_refs(parts[1]).to_vector();
  if (present(parts[2])) v.cond = parts[2];
  return v;
}

// ---------------------------------------------------------------------------
// printing

namespace {

const char* kOpen[] = {"(", "<", "[", "{"};
const char* kClose[] = {")", ">", "]", "}"};

std::string quote(const std::string& text) {
  if (text.find('\'') != std::string::npos) {
    throw StructureError("word " + text + " contains a single quote and cannot be printed as rule text");
  }
  return "'" + text + "'";
}

std::string print_args(const Store& store, RelationId args) {
  if (store.info(args).role == Role::Empty) return "()";
  std::string out = "(";
  bool first = true;
  for (auto a : store.inverse_refs(args)) {
    if (!first) out += ' ';
    first = false;
    out += print_term(store, a);
  }
  return out + ")";
}

std::string join_items(const Store& store, RelationId node, const char* sep) {
  std::string out;
  bool first = true;
  for (auto c : store.inverse_refs(node)) {
    if (!first) out += sep;
    first = false;
    out += print_sentence(store, c);
  }
  return out;
}

}  // namespace

std::string print_term(const Store& store, RelationId term) {
  const auto info = store.info(term);
  if (store.is_variable(term)) return store.variable_name(term);
  switch (info.role) {
    case Role::Empty: return "' '";
    case Role::Word:
      if (store.number_value(term)) return store.text(term);
      return quote(store.text(term));
    case Role::Group: {
      std::string out = kOpen[static_cast<int>(info.code)];
      bool first = true;
      for (auto c : store.inverse_refs(term)) {
        if (!first) out += ' ';
        first = false;
        out += print_term(store, c);
      }
      return out + kClose[static_cast<int>(info.code)];
    }
    default: throw StructureError(to_string(term) + " is not a term");
  }
}

std::string print_sentence(const Store& store, RelationId s) {
  const auto info = store.info(s);
  const auto parts = store.inverse_refs(s);
  switch (info.role) {
    case Role::Call: {
      const std::string name = function_name(store, parts[0]);
      if (store.info(parts[1]).level == 2) return "#" + name + ": " + print_sentence(store, parts[1]);
      return "#" + name + print_args(store, parts[1]);
    }
    case Role::Named: return store.text(parts[0]) + print_args(store, parts[1]);
    case Role::Data: {
      std::string out = kOpen[static_cast<int>(info.code)];
      bool first = true;
      for (auto t : parts) {
        if (!first) out += ' ';
        first = false;
        out += print_term(store, t);
      }
      return out + kClose[static_cast<int>(info.code)];
    }
    case Role::ListWrap: return "{" + join_items(store, s, ", ") + "}";
    case Role::Cond:
      return std::string(kOpen[static_cast<int>(info.code)]) + join_items(store, s, " ") +
             kClose[static_cast<int>(info.code)];
    default: throw StructureError(to_string(s) + " is not a sentence");
  }
}

std::string print_rule(const Store& store, RelationId rule) {
  const RuleView v = decode_rule(store, rule);
  std::string out;
  if (v.a1) {
    out += print_sentence(store, v.a1);
    if (v.a2) out += ", " + print_sentence(store, v.a2);
    if (v.a3) {
      if (!v.a2) throw StructureError("A3 without A2 in " + to_string(rule));
      out += ", " + join_items(store, v.a3, " ");
    }
    out += ' ';
  }
  out += "->";
  for (std::size_t i = 0; i < v.right.size(); ++i) out += (i ? ", " : " ") + print_sentence(store, v.right[i]);
  if (v.cond) out += " | " + join_items(store, v.cond, ", ");
  return out + ";";
}

std::string print_rule_file(const Store& store, RelationId rule_file) {
  std::string out;
  for (auto r : rule_file_rules(store, rule_file)) out += print_rule(store, r) + "\n";
  return out;
}

}  // namespace shmkb
