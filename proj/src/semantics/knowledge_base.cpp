#include <algorithm>
#include <map>
#include <set>

#include "internal.hpp"
#include "shmkb/semantics.hpp"
#include "shmkb/translate.hpp"

namespace shmkb {

using namespace semantic;

namespace {

constexpr const char* kRuleTrue = "RuleTrue";
constexpr const char* kRuleFalse = "RuleFalse";
constexpr const char* kProposals = "semantic:proposals";
constexpr const char* kSlotCounter = "semantic:slots";

constexpr const char* kPending = "pending";
constexpr const char* kAccepted = "accepted";
constexpr const char* kRejected = "rejected";

// A container's first child is a placeholder, since relations are never
// empty.
RelationId container(Store& store, const char* name, std::uint8_t level) {
  if (auto r = store.root(name)) return *r;
  const RelationId placeholder = store.empty(level - 1);
  const RelationId c = store.make_relation(Code::Sequence, std::span(&placeholder, 1),
                                           {.level = level, .role = level == 3 ? Role::RuleSet : Role::Plain,
                                            .unique = true});
  store.set_root(name, c);
  return c;
}

std::vector<RelationId> members(const Store& store, RelationId c) {
  auto all = store.inverse_refs(c).to_vector();
  all.erase(all.begin());
  return all;
}

RelationId group_of(Store& store, const Terms& terms, bool variables) {
  return store.make_relation(Code::Sequence, terms,
                             {.level = 1, .kind = variables ? kind::kHasVariables : kind::kConstant,
                              .role = Role::Group});
}

std::optional<RelationId> find_group(const Store& store, const Terms& terms) {
  return store.find_relation(Code::Sequence, terms, {.level = 1, .role = Role::Group});
}

RelationId rule_relation(Store& store, Shape shape, const std::vector<RelationId>& parts,
                         const std::vector<RelationId>& constraints) {
  const RelationId part = store.make_relation(Code::Sequence, parts, {.level = 2, .role = Role::Part});
  const RelationId cond = constraints.empty()
                              ? store.empty(2)
                              : store.make_relation(Code::Sequence, constraints, {.level = 2, .role = Role::Cond});
  const RelationId children[] = {part, cond};
  return store.make_relation(Code::Sequence, children,
                             {.level = 3,
                              .kind = shape == Shape::SentenceQuestion ? kind::kInverseRule : kind::kDirectRule,
                              .role = Role::SemRule,
                              .payload = static_cast<std::uint32_t>(shape)});
}

RelationId sample_relation(Store& store, const Sample& s) { return rule_relation(store, s.shape, s.parts, {}); }

Sample decode_sample(const Store& store, RelationId rule) {
  Sample s;
  s.shape = static_cast<Shape>(store.info(rule).payload);
  s.parts = store.inverse_refs(store.inverse_refs(rule).front()).to_vector();
  return s;
}

std::string terms_text(const Store& store, const Terms& terms) {
  std::string out;
  for (auto t : terms) {
    const auto piece = phrase_text(store, t);
    if (!out.empty()) out += ' ';
    out += store.info(t).role == Role::Group ? "( " + piece + " )" : piece;
  }
  return out;
}

// Looks a phrase up without interning; absent when a word or collocation
// is unknown to the store.
std::optional<Terms> lookup_phrase(const Store& store, std::string_view text) {
  std::vector<Terms> frames(1);
  for (const auto& t : tokenize_phrase_text(text)) {
    if (t.text == "(") {
      frames.emplace_back();
    } else if (t.text == ")") {
      if (frames.size() == 1) throw ParseError("unmatched ')'", t.position);
      auto items = std::move(frames.back());
      frames.pop_back();
      auto g = find_group(store, items);
      if (!g) return std::nullopt;
      frames.back().push_back(*g);
    } else {
      auto w = store.find_word(t.text);
      if (!w) return std::nullopt;
      frames.back().push_back(*w);
    }
  }
  if (frames.size() != 1) throw ParseError("unclosed '('", {});
  if (frames.front().empty()) throw ParseError("empty sentence", {});
  return frames.front();
}

void check_sample(const Store& store, const Sample& s) {
  if (s.parts.size() != part_count(s.shape)) {
    throw DomainError(to_string(s.shape) + " takes " + std::to_string(part_count(s.shape)) + " sentences");
  }
  for (auto p : s.parts) {
    if (!store.is_live(p) || store.info(p).role == Role::Empty) throw DomainError("empty sentence in sample");
    if (store.has_variables(p)) throw DomainError("sample sentences must be ground");
  }
}

using RefusedSet = std::set<std::pair<Shape, std::vector<Terms>>>;

}  // namespace

KnowledgeBase::KnowledgeBase(Store& store, KnowledgeOptions options) : store_(store), options_(options) {
  if (options_.depth_cap < 1) throw DomainError("depth cap must be at least 1");
  rule_true_ = container(store_, kRuleTrue, 3);
  rule_false_ = container(store_, kRuleFalse, 3);
  proposals_ = container(store_, kProposals, 2);
  article_scheme_ = intern_sentence(store_, parse_rule(tokenize("-> (art+ {s});")).right.front());
}

// ---------------------------------------------------------------------------
// rule storage
//
// RuleTrue holds one entry per rule: a unique level-3 node whose first child
// is the current SemRule relation and whose other children are the ground
// samples it was built from. A SemRule is [Part(phrases), Cond(constraints)];
// a constraint lists slot variables and its paradigm holds the rows.

std::vector<RelationId> KnowledgeBase::entries() const { return members(store_, rule_true_); }

SemanticRule KnowledgeBase::decode(RelationId entry) const {
  SemanticRule r;
  r.entry = entry;
  const auto children = store_.inverse_refs(entry).to_vector();
  r.rule = children.front();
  r.shape = static_cast<Shape>(store_.info(r.rule).payload);
  const auto top = store_.inverse_refs(r.rule).to_vector();
  std::map<RelationId, int> slot_of;
  auto slot = [&](RelationId var) {
    auto [it, inserted] = slot_of.emplace(var, static_cast<int>(r.slots.size()));
    if (inserted) r.slots.push_back({var, store_.paradigm_values(var)});
    return it->second;
  };
  for (auto phrase : store_.inverse_refs(top[0])) {
    std::vector<SemanticRule::Cell> cells;
    for (auto t : terms_of(store_, phrase)) {
      cells.push_back(store_.is_variable(t) ? SemanticRule::Cell{RelationId{}, slot(t)} : SemanticRule::Cell{t, -1});
    }
    r.parts.push_back(std::move(cells));
  }
  if (store_.info(top[1]).role == Role::Cond) {
    for (auto constraint : store_.inverse_refs(top[1])) {
      SemanticRule::Group g;
      for (auto var : store_.inverse_refs(constraint)) g.slots.push_back(slot(var));
      if (auto rows = store_.find_paradigm(constraint)) {
        for (auto tuple : store_.paradigm_values(*rows)) g.rows.push_back(store_.inverse_refs(tuple).to_vector());
      }
      r.groups.push_back(std::move(g));
    }
  }
  for (std::size_t i = 1; i < children.size(); ++i) r.samples.push_back(decode_sample(store_, children[i]));
  return r;
}

void KnowledgeBase::store_rule(SemanticRule& r) {
  for (auto& s : r.slots) {
    if (!s.variable) {
      std::int64_t n = 0;
      if (auto c = store_.root(kSlotCounter)) n = std::get<std::int64_t>(*store_.number_value(*c));
      store_.set_root(kSlotCounter, store_.intern_number_word(n + 1));
      // ':' cannot appear in a rule-text variable, so no clash with user rules
      s.variable = store_.variable("slot:" + std::to_string(n + 1));
    }
    for (auto v : s.values) {
      if (!store_.paradigm_contains(s.variable, v)) store_.paradigm_insert(s.variable, v);
    }
  }
  std::vector<RelationId> phrases;
  for (const auto& cells : r.parts) {
    Terms terms;
    bool vars = false;
    for (const auto& c : cells) {
      terms.push_back(c.slot < 0 ? c.term : r.slots[static_cast<std::size_t>(c.slot)].variable);
      vars = vars || c.slot >= 0;
    }
    phrases.push_back(group_of(store_, terms, vars));
  }
  std::vector<RelationId> constraints;
  for (const auto& g : r.groups) {
    Terms vars;
    for (int k : g.slots) vars.push_back(r.slots[static_cast<std::size_t>(k)].variable);
    const RelationId constraint =
        store_.make_relation(Code::Sequence, vars, {.level = 1, .kind = kind::kHasVariables, .role = Role::Constraint});
    auto rows = store_.find_paradigm(constraint);
    if (!rows) rows = store_.make_paradigm(1, kind::kConstant, constraint, OrderPolicy::Chronological);
    for (const auto& row : g.rows) {
      const RelationId tuple = store_.make_relation(Code::Sequence, row, {.level = 1, .role = Role::Tuple});
      if (!store_.paradigm_contains(*rows, tuple)) store_.paradigm_insert(*rows, tuple);
    }
    constraints.push_back(constraint);
  }
  const RelationId rule = rule_relation(store_, r.shape, phrases, constraints);

  std::size_t stored = 0;
  if (!r.entry) {
    r.entry = store_.make_relation(Code::Sequence, std::span(&rule, 1), {.level = 3, .unique = true});
    store_.append_child(rule_true_, r.entry);
  } else {
    const RelationId old = store_.inverse_refs(r.entry).front();
    stored = store_.inverse_refs(r.entry).size() - 1;
    if (old != rule) {
      store_.replace_child(r.entry, 0, rule);
      if (store_.direct_refs(old).empty()) {
        store_.remove_relation(old, [this](RelationId id) { return store_.info(id).role == Role::Word; });
      }
    }
    touch_entry(r.entry);
  }
  r.rule = rule;
  for (std::size_t i = stored; i < r.samples.size(); ++i) store_.append_child(r.entry, sample_relation(store_, r.samples[i]));
}

void KnowledgeBase::touch_entry(RelationId entry) {
  const auto all = store_.inverse_refs(rule_true_).to_vector();
  const auto it = std::find(all.begin(), all.end(), entry);
  if (it == all.end() || it + 1 == all.end()) return;
  store_.remove_child(rule_true_, static_cast<std::size_t>(it - all.begin()));
  store_.append_child(rule_true_, entry);
}

std::vector<SemanticRule> KnowledgeBase::rules() const {
  std::vector<SemanticRule> out;
  const auto all = entries();
  for (auto it = all.rbegin(); it != all.rend(); ++it) out.push_back(decode(*it));
  return out;
}

std::vector<Sample> KnowledgeBase::refused_samples() const {
  std::vector<Sample> out;
  for (auto r : members(store_, rule_false_)) out.push_back(decode_sample(store_, r));
  return out;
}

// ---------------------------------------------------------------------------
// teaching

bool KnowledgeBase::refused(const Sample& sample) const {
  const auto all = members(store_, rule_false_);
  return std::any_of(all.begin(), all.end(), [&](RelationId r) { return decode_sample(store_, r) == sample; });
}

bool KnowledgeBase::covered(const Sample& sample) const {
  if (refused(sample)) return false;
  for (const auto& r : rules()) {
    if (rule_covers(store_, r, sample)) return true;
  }
  return false;
}

TeachOutcome KnowledgeBase::teach(const Sample& sample) {
  check_sample(store_, sample);
  if (refused(sample)) return {TeachStatus::Rejected, RelationId{}, false, "the sample is listed in RuleFalse"};
  auto all = rules();
  for (auto& r : all) {
    if (!rule_covers(store_, r, sample)) continue;
    if (std::find(r.samples.begin(), r.samples.end(), sample) == r.samples.end()) {
      r.samples.push_back(sample);
      store_rule(r);
    }
    return {TeachStatus::Merged, r.entry, false, {}};
  }
  for (const auto& r : all) {
    if (auto merged = generalize(store_, r, sample)) {
      store_rule(*merged);
      scan_proposals();
      return {TeachStatus::Merged, merged->entry, true, {}};
    }
  }
  SemanticRule fresh;
  fresh.shape = sample.shape;
  for (const auto& terms : sample_terms(store_, sample)) {
    std::vector<SemanticRule::Cell> cells;
    for (auto t : terms) cells.push_back({t, -1});
    fresh.parts.push_back(std::move(cells));
  }
  fresh.samples.push_back(sample);
  store_rule(fresh);
  scan_proposals();
  return {TeachStatus::Created, fresh.entry, true, {}};
}

void KnowledgeBase::unteach(const Sample& sample) {
  check_sample(store_, sample);
  RelationId ground = sample_relation(store_, sample);
  bool removed = false;
  const auto all = store_.inverse_refs(rule_true_).to_vector();
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (store_.inverse_refs(all[i]).front() != ground) continue;
    store_.remove_child(rule_true_, i);
    store_.remove_relation(all[i], [this](RelationId id) { return store_.info(id).role == Role::Word; });
    removed = true;
    break;
  }
  // still reachable through a generalized rule, or never stored as such
  if (removed && !covered(sample)) return;
  if (refused(sample)) return;
  ground = sample_relation(store_, sample);
  store_.append_child(rule_false_, ground);
}

// ---------------------------------------------------------------------------
// proposals

std::vector<Proposal> KnowledgeBase::proposals() const {
  std::vector<Proposal> out;
  for (auto record : members(store_, proposals_)) {
    const auto c = store_.inverse_refs(record).to_vector();
    out.push_back({std::get<std::int64_t>(*store_.number_value(c[0])), c[1], c[2], store_.text(c[3])});
  }
  return out;
}

void KnowledgeBase::scan_proposals() {
  std::set<std::pair<RelationId, RelationId>> known;
  for (const auto& p : proposals()) known.insert({p.first, p.second});
  struct Owned {
    RelationId entry;
    RelationId var;
    std::set<RelationId> values;
  };
  std::vector<Owned> slots;
  for (const auto& r : rules()) {
    for (const auto& s : r.slots) slots.push_back({r.entry, s.variable, {s.values.begin(), s.values.end()}});
  }
  std::sort(slots.begin(), slots.end(), [](const Owned& a, const Owned& b) { return a.var < b.var; });
  std::int64_t next = static_cast<std::int64_t>(known.size()) + 1;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (std::size_t j = i + 1; j < slots.size(); ++j) {
      const auto& a = slots[i];
      const auto& b = slots[j];
      if (a.entry == b.entry || a.values == b.values || known.count({a.var, b.var})) continue;
      const bool overlap = std::any_of(a.values.begin(), a.values.end(), [&](RelationId v) { return b.values.count(v); });
      if (!overlap) continue;
      const RelationId record[] = {store_.intern_number_word(next++), a.var, b.var, store_.intern_word(kPending)};
      store_.append_child(proposals_, store_.make_relation(Code::Sequence, record, {.level = 2, .unique = true}));
      known.insert({a.var, b.var});
    }
  }
}

void KnowledgeBase::confirm(std::int64_t id, bool accept) {
  const auto records = members(store_, proposals_);
  const auto it = std::find_if(records.begin(), records.end(), [&](RelationId r) {
    return std::get<std::int64_t>(*store_.number_value(store_.inverse_refs(r).front())) == id;
  });
  if (it == records.end()) throw NotFoundError("no proposal " + std::to_string(id));
  const auto c = store_.inverse_refs(*it).to_vector();
  if (store_.text(c[3]) != kPending) return;
  store_.replace_child(*it, 3, store_.intern_word(accept ? kAccepted : kRejected));
  if (!accept) return;

  std::vector<RelationId> joined = store_.paradigm_values(c[1]);
  for (auto v : store_.paradigm_values(c[2])) {
    if (std::find(joined.begin(), joined.end(), v) == joined.end()) joined.push_back(v);
  }
  for (auto r : rules()) {
    bool changed = false;
    for (std::size_t k = 0; k < r.slots.size(); ++k) {
      auto& slot = r.slots[k];
      if (slot.variable != c[1] && slot.variable != c[2]) continue;
      for (auto v : joined) {
        if (std::find(slot.values.begin(), slot.values.end(), v) != slot.values.end()) continue;
        slot.values.push_back(v);
        changed = true;
        // a new value behaves like the existing ones in the condition rows
        for (auto& g : r.groups) {
          const auto pos = std::find(g.slots.begin(), g.slots.end(), static_cast<int>(k));
          if (pos == g.slots.end()) continue;
          const auto column = static_cast<std::size_t>(pos - g.slots.begin());
          const auto rows = g.rows;
          for (auto row : rows) {
            row[column] = v;
            if (std::find(g.rows.begin(), g.rows.end(), row) == g.rows.end()) g.rows.push_back(row);
          }
        }
      }
    }
    if (changed) store_rule(r);
  }
  scan_proposals();
}

// ---------------------------------------------------------------------------
// articles

RelationId KnowledgeBase::article_scheme() const { return article_scheme_; }

std::optional<RelationId> KnowledgeBase::article_value(RelationId id_word) const {
  const auto file = find_file(store_, article_scheme());
  if (!file) return std::nullopt;
  for (auto v : store_.paradigm_values(*file)) {
    if (store_.inverse_refs(v).front() == id_word) return v;
  }
  return std::nullopt;
}

std::vector<RelationId> KnowledgeBase::links(RelationId sentence, const std::vector<SemanticRule>& rules) const {
  std::vector<RelationId> out;
  const auto terms = terms_of(store_, sentence);
  for (const auto& r : rules) {
    for (std::size_t p = 0; p < r.parts.size(); ++p) {
      Binding b(r.slots.size());
      if (bind_part(r, p, terms, b) && rows_admit(r, b)) {
        out.push_back(r.rule);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Article KnowledgeBase::make_article(RelationId value, const std::vector<SemanticRule>& rules) const {
  const auto c = store_.inverse_refs(value).to_vector();
  Article a;
  a.id = store_.text(c[0]);
  if (store_.info(c[1]).role != Role::Empty) a.sentences = store_.inverse_refs(c[1]).to_vector();
  for (auto s : a.sentences) a.scheme_links.push_back(links(s, rules));
  return a;
}

Article KnowledgeBase::ingest_article(const std::string& id, std::string_view text) {
  if (id.empty() || id.find_first_of(" \t\n") != std::string::npos) throw DomainError("article id must be one word");
  const auto sentences = split_sentences(store_, text);
  const RelationId list = sentences.empty() ? store_.empty(1)
                                            : store_.make_relation(Code::List, sentences, {.level = 1, .role = Role::Group});
  const RelationId parts[] = {store_.intern_word(id), list};
  const RelationId value =
      store_.make_relation(Code::Sequence, parts, {.level = 2, .kind = kind::kNonExecutable, .role = Role::Data});
  const RelationId scheme = article_scheme();
  const RelationId file = ensure_file(store_, scheme);
  if (auto old = article_value(parts[0]); old && *old != value) remove_article(id);
  if (!store_.paradigm_contains(file, value)) {
    store_.paradigm_insert(file, value);
    std::map<RelationId, RelationId> bindings;
    if (scheme_bindings(store_, scheme, value, bindings)) record_variable_values(store_, bindings);
  }
  return make_article(value, rules());
}

bool KnowledgeBase::remove_article(const std::string& id) {
  const auto word = store_.find_word(id);
  if (!word) return false;
  const auto old = article_value(*word);
  if (!old) return false;
  const RelationId file = *find_file(store_, article_scheme());
  store_.paradigm_erase(file, *old);
  // drop the sentence list from s unless another article shares it
  const RelationId list = store_.inverse_refs(*old)[1];
  const auto s = store_.variable("s");
  const auto values = store_.paradigm_values(file);
  if (std::none_of(values.begin(), values.end(), [&](RelationId v) { return store_.inverse_refs(v)[1] == list; })) {
    store_.paradigm_erase(s, list);
  }
  store_.paradigm_erase(store_.variable("art+"), *word);
  return true;
}

std::optional<Article> KnowledgeBase::article(const std::string& id) const {
  const auto word = store_.find_word(id);
  if (!word) return std::nullopt;
  const auto value = article_value(*word);
  if (!value) return std::nullopt;
  return make_article(*value, rules());
}

std::vector<std::string> KnowledgeBase::article_ids() const {
  std::vector<std::string> out;
  const auto file = find_file(store_, article_scheme());
  if (!file) return out;
  for (auto v : store_.paradigm_values(*file)) out.push_back(store_.text(store_.inverse_refs(v).front()));
  return out;
}

// ---------------------------------------------------------------------------
// answering

namespace {

RefusedSet refused_set(const Store& store, const std::vector<Sample>& samples) {
  RefusedSet out;
  for (const auto& s : samples) out.insert({s.shape, sample_terms(store, s)});
  return out;
}

// Sentences of an article plus those direct rules derive from them, round by
// round, for at most `rounds` rounds.
std::vector<Terms> closure(const std::vector<Terms>& sentences, const std::vector<SemanticRule>& rules,
                           const RefusedSet& refused, std::size_t rounds) {
  std::vector<Terms> known;
  std::set<Terms> seen;
  for (const auto& s : sentences) {
    if (seen.insert(s).second) known.push_back(s);
  }
  for (std::size_t round = 0; round < rounds; ++round) {
    const std::size_t limit = known.size();
    std::vector<Terms> fresh;
    auto emit = [&](const SemanticRule& r, std::vector<Terms> premises, const Binding& b) {
      auto derived = instantiate(r, r.parts.size() - 1, b);
      premises.push_back(derived);
      if (refused.count({r.shape, premises})) return;
      if (seen.insert(derived).second) fresh.push_back(std::move(derived));
    };
    for (const auto& r : rules) {
      if (r.shape == Shape::Condition) {
        for (std::size_t i = 0; i < limit; ++i) {
          Binding b(r.slots.size());
          if (!bind_part(r, 0, known[i], b)) continue;
          const Terms x = known[i];
          complete(r, b, [&](const Binding& full) { emit(r, {x}, full); });
        }
      } else if (r.shape == Shape::DoubleCondition) {
        for (std::size_t i = 0; i < limit; ++i) {
          Binding first(r.slots.size());
          if (!bind_part(r, 0, known[i], first)) continue;
          for (std::size_t j = 0; j < limit; ++j) {
            Binding b = first;
            if (!bind_part(r, 1, known[j], b)) continue;
            const Terms x = known[i];
            const Terms y = known[j];
            complete(r, b, [&](const Binding& full) { emit(r, {x, y}, full); });
          }
        }
      }
    }
    if (fresh.empty()) break;
    for (auto& f : fresh) known.push_back(std::move(f));
  }
  return known;
}

}  // namespace

std::vector<Answer> KnowledgeBase::answer(std::string_view question) const {
  const auto terms = lookup_phrase(store_, question);
  if (!terms) return {};
  if (auto g = find_group(store_, *terms)) return answer(*g);
  return {};
}

std::vector<Answer> KnowledgeBase::answer(RelationId question) const {
  const Terms q = terms_of(store_, question);
  const auto all = rules();
  const auto refused = refused_set(store_, refused_samples());
  std::vector<Answer> out;
  std::set<Answer> seen;
  const auto file = find_file(store_, article_scheme());
  if (!file) return out;
  for (auto value : store_.paradigm_values(*file)) {
    const auto a = make_article(value, {});
    std::vector<Terms> sentences;
    for (auto s : a.sentences) sentences.push_back(terms_of(store_, s));
    for (const auto& s : closure(sentences, all, refused, options_.depth_cap)) {
      for (const auto& r : all) {
        if (r.shape != Shape::SentenceQuestion) continue;
        Binding b(r.slots.size());
        if (!bind_part(r, 0, s, b) || !bind_part(r, 1, q, b)) continue;
        complete(r, b, [&](const Binding& full) {
          const auto reply = instantiate(r, 2, full);
          if (refused.count({r.shape, {s, q, reply}})) return;
          Answer ans{terms_text(store_, reply), a.id};
          if (seen.insert(ans).second) out.push_back(std::move(ans));
        });
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// presentation and host functions

std::string KnowledgeBase::describe(const SemanticRule& r) const {
  auto cell_text = [&](const SemanticRule::Cell& c) {
    if (c.slot >= 0) return "x" + std::to_string(c.slot + 1);
    const auto t = phrase_text(store_, c.term);
    return store_.info(c.term).role == Role::Group ? "( " + t + " )" : t;
  };
  auto part = [&](std::size_t p) {
    std::string out = "(";
    for (std::size_t i = 0; i < r.parts[p].size(); ++i) out += (i ? " " : "") + cell_text(r.parts[p][i]);
    return out + ")";
  };
  std::string out = r.shape == Shape::Condition ? part(0) : "(" + part(0) + " " + part(1) + ")";
  out += " -> " + part(r.parts.size() - 1) + "\n";
  for (std::size_t k = 0; k < r.slots.size(); ++k) {
    out += "  x" + std::to_string(k + 1) + " = [";
    for (std::size_t i = 0; i < r.slots[k].values.size(); ++i) {
      out += (i ? " " : "") + terms_text(store_, {r.slots[k].values[i]});
    }
    out += "]\n";
  }
  for (const auto& g : r.groups) {
    out += "  <(";
    for (std::size_t i = 0; i < g.slots.size(); ++i) out += (i ? " x" : "x") + std::to_string(g.slots[i] + 1);
    out += ") [";
    for (std::size_t i = 0; i < g.rows.size(); ++i) out += (i ? " (" : "(") + terms_text(store_, g.rows[i]) + ")";
    out += "]>\n";
  }
  return out;
}

void KnowledgeBase::install(Session& session) {
  // #add_rule0(q s a) / #del_rule0(q s a): values are reparsed from their
  // text so a quoted sequence and a typed sentence give the same phrase
  auto sample = [this](CallContext& ctx) {
    if (ctx.arity() != 3) throw ArityError("#" + ctx.name() + " takes (q s a)");
    std::vector<std::string> texts;
    for (std::size_t i : {1, 0, 2}) texts.push_back(phrase_text(store_, ctx.required(i)));
    return make_sample(store_, Shape::SentenceQuestion, texts);
  };
  session.register_function("add_rule0", [this, sample](CallContext& ctx) -> ReturnCode {
    return teach(sample(ctx)).status == TeachStatus::Rejected ? kFailed : kSucceeded;
  });
  session.register_function("del_rule0", [this, sample](CallContext& ctx) -> ReturnCode {
    unteach(sample(ctx));
    return kSucceeded;
  });
}

}  // namespace shmkb
