#include <algorithm>
#include <map>
#include <set>

#include "shmkb/semantics.hpp"
#include "internal.hpp"

namespace shmkb {

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::SentenceQuestion: return "SQA";
    case Shape::Condition: return "CondCons";
    case Shape::DoubleCondition: return "DoubleCondCons";
  }
  return "?";
}

std::optional<Shape> parse_shape(std::string_view name) {
  for (auto s : {Shape::SentenceQuestion, Shape::Condition, Shape::DoubleCondition}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::size_t part_count(Shape shape) { return shape == Shape::Condition ? 2 : 3; }

std::string to_string(TeachStatus status) {
  switch (status) {
    case TeachStatus::Created: return "Created";
    case TeachStatus::Merged: return "Merged";
    case TeachStatus::Rejected: return "Rejected";
  }
  return "?";
}

Sample make_sample(Store& store, Shape shape, const std::vector<std::string>& texts) {
  if (texts.size() != part_count(shape)) {
    throw DomainError(to_string(shape) + " takes " + std::to_string(part_count(shape)) + " sentences, got " +
                      std::to_string(texts.size()));
  }
  Sample s{shape, {}};
  for (const auto& t : texts) s.parts.push_back(parse_phrase(store, t));
  return s;
}

namespace semantic {

Terms terms_of(const Store& store, RelationId phrase) {
  if (store.info(phrase).role == Role::Group && store.info(phrase).code == Code::Sequence) {
    return store.inverse_refs(phrase).to_vector();
  }
  return {phrase};
}

std::vector<Terms> sample_terms(const Store& store, const Sample& sample) {
  std::vector<Terms> out;
  for (auto p : sample.parts) out.push_back(terms_of(store, p));
  return out;
}

bool bind_part(const SemanticRule& rule, std::size_t part, const Terms& terms, Binding& binding) {
  const auto& cells = rule.parts[part];
  if (cells.size() != terms.size()) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    if (cell.slot < 0) {
      if (cell.term != terms[i]) return false;
      continue;
    }
    auto& bound = binding[static_cast<std::size_t>(cell.slot)];
    if (bound) {
      if (bound != terms[i]) return false;
      continue;
    }
    const auto& values = rule.slots[static_cast<std::size_t>(cell.slot)].values;
    if (std::find(values.begin(), values.end(), terms[i]) == values.end()) return false;
    bound = terms[i];
  }
  return true;
}

bool rows_admit(const SemanticRule& rule, const Binding& binding) {
  for (const auto& g : rule.groups) {
    const bool any = std::any_of(g.rows.begin(), g.rows.end(), [&](const std::vector<RelationId>& row) {
      for (std::size_t k = 0; k < g.slots.size(); ++k) {
        const auto bound = binding[static_cast<std::size_t>(g.slots[k])];
        if (bound && bound != row[k]) return false;
      }
      return true;
    });
    if (!any) return false;
  }
  return true;
}

void complete(const SemanticRule& rule, Binding& binding, const std::function<void(const Binding&)>& fn) {
  if (!rows_admit(rule, binding)) return;
  const auto open = std::find(binding.begin(), binding.end(), RelationId{});
  if (open == binding.end()) {
    fn(binding);
    return;
  }
  const auto k = static_cast<std::size_t>(open - binding.begin());
  for (auto v : rule.slots[k].values) {
    binding[k] = v;
    complete(rule, binding, fn);
  }
  binding[k] = RelationId{};
}

Terms instantiate(const SemanticRule& rule, std::size_t part, const Binding& binding) {
  Terms out;
  for (const auto& cell : rule.parts[part]) {
    out.push_back(cell.slot < 0 ? cell.term : binding[static_cast<std::size_t>(cell.slot)]);
  }
  return out;
}

}  // namespace semantic

using namespace semantic;

bool rule_covers(const Store& store, const SemanticRule& rule, const Sample& sample) {
  if (rule.shape != sample.shape || rule.parts.size() != sample.parts.size()) return false;
  Binding binding(rule.slots.size());
  const auto terms = sample_terms(store, sample);
  for (std::size_t p = 0; p < terms.size(); ++p) {
    if (!bind_part(rule, p, terms[p], binding)) return false;
  }
  return rows_admit(rule, binding);
}

namespace {

using Row = std::map<int, RelationId>;

// Merges `sample` into `rule` by comparing it with one covered example.
std::optional<SemanticRule> merge_with(const Store& store, const SemanticRule& rule, const Sample& seen,
                                       const Sample& sample) {
  const auto old_terms = sample_terms(store, seen);
  const auto new_terms = sample_terms(store, sample);

  // differences grouped by the change they make
  std::map<std::pair<RelationId, RelationId>, std::vector<std::pair<std::size_t, std::size_t>>> changes;
  for (std::size_t p = 0; p < new_terms.size(); ++p) {
    if (old_terms[p].size() != new_terms[p].size() || new_terms[p].size() != rule.parts[p].size()) return std::nullopt;
    int differing = 0;
    for (std::size_t i = 0; i < new_terms[p].size(); ++i) {
      if (old_terms[p][i] == new_terms[p][i]) continue;
      if (++differing > 1) return std::nullopt;
      changes[{old_terms[p][i], new_terms[p][i]}].push_back({p, i});
    }
  }

  // the value each existing slot takes in the new sample
  Binding value(rule.slots.size());
  for (std::size_t p = 0; p < new_terms.size(); ++p) {
    for (std::size_t i = 0; i < new_terms[p].size(); ++i) {
      const int k = rule.parts[p][i].slot;
      if (k < 0) continue;
      auto& v = value[static_cast<std::size_t>(k)];
      if (v && v != new_terms[p][i]) return std::nullopt;
      v = new_terms[p][i];
    }
  }

  SemanticRule out = rule;
  std::vector<std::vector<RelationId>> before;
  for (const auto& s : rule.slots) before.push_back(s.values);
  std::set<int> varying;
  for (const auto& [change, positions] : changes) {
    int fresh = -1;
    for (auto [p, i] : positions) {
      auto& cell = out.parts[p][i];
      if (cell.slot >= 0) {
        varying.insert(cell.slot);
        continue;
      }
      if (fresh < 0) {
        fresh = static_cast<int>(out.slots.size());
        out.slots.push_back({RelationId{}, {change.first}});
        before.push_back({change.first});
        value.push_back(change.second);
        varying.insert(fresh);
      }
      cell = {RelationId{}, fresh};
    }
  }
  if (varying.empty()) return out;

  // condition rows: slots that vary together become one group whose rows
  // keep every combination covered so far plus the new one
  std::vector<std::size_t> touched;
  std::set<int> free_slots(varying);
  for (std::size_t g = 0; g < out.groups.size(); ++g) {
    const auto& slots = out.groups[g].slots;
    if (std::any_of(slots.begin(), slots.end(), [&](int k) { return varying.count(k); })) {
      touched.push_back(g);
      for (int k : slots) free_slots.erase(k);
    }
  }
  auto projection = [&](const std::vector<int>& slots) {
    std::vector<RelationId> row;
    for (int k : slots) row.push_back(value[static_cast<std::size_t>(k)]);
    return row;
  };
  if (varying.size() == 1 && touched.size() == 1) {
    auto& g = out.groups[touched.front()];
    auto row = projection(g.slots);
    if (std::find(g.rows.begin(), g.rows.end(), row) == g.rows.end()) g.rows.push_back(std::move(row));
  } else if (varying.size() > 1) {
    std::vector<Row> product{Row{}};
    auto extend = [&](const std::vector<int>& slots, const std::vector<std::vector<RelationId>>& rows) {
      std::vector<Row> next;
      for (const auto& partial : product) {
        for (const auto& r : rows) {
          Row row = partial;
          for (std::size_t k = 0; k < slots.size(); ++k) row[slots[k]] = r[k];
          next.push_back(std::move(row));
        }
      }
      product = std::move(next);
    };
    std::set<int> members(free_slots);
    for (auto g : touched) {
      extend(out.groups[g].slots, out.groups[g].rows);
      members.insert(out.groups[g].slots.begin(), out.groups[g].slots.end());
    }
    for (int k : free_slots) {
      std::vector<std::vector<RelationId>> rows;
      for (auto v : before[static_cast<std::size_t>(k)]) rows.push_back({v});
      extend({k}, rows);
    }
    SemanticRule::Group merged;
    merged.slots.assign(members.begin(), members.end());
    for (const auto& r : product) {
      std::vector<RelationId> row;
      for (int k : merged.slots) row.push_back(r.at(k));
      if (std::find(merged.rows.begin(), merged.rows.end(), row) == merged.rows.end()) merged.rows.push_back(row);
    }
    auto row = projection(merged.slots);
    if (std::find(merged.rows.begin(), merged.rows.end(), row) == merged.rows.end()) merged.rows.push_back(row);
    for (auto it = touched.rbegin(); it != touched.rend(); ++it) {
      out.groups.erase(out.groups.begin() + static_cast<std::ptrdiff_t>(*it));
    }
    out.groups.push_back(std::move(merged));
  }
  for (int k : varying) {
    auto& values = out.slots[static_cast<std::size_t>(k)].values;
    const auto v = value[static_cast<std::size_t>(k)];
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
  }
  out.samples.push_back(sample);

  // replay: every example the rule was built from must still fit
  for (const auto& s : out.samples) {
    if (!rule_covers(store, out, s)) return std::nullopt;
  }
  return out;
}

}  // namespace

std::optional<SemanticRule> generalize(const Store& store, const SemanticRule& rule, const Sample& sample) {
  if (rule.shape != sample.shape || rule.parts.size() != sample.parts.size()) return std::nullopt;
  if (rule_covers(store, rule, sample)) {
    SemanticRule out = rule;
    if (std::find(out.samples.begin(), out.samples.end(), sample) == out.samples.end()) out.samples.push_back(sample);
    return out;
  }
  for (auto it = rule.samples.rbegin(); it != rule.samples.rend(); ++it) {
    if (auto merged = merge_with(store, rule, *it, sample)) return merged;
  }
  return std::nullopt;
}

}  // namespace shmkb
