#pragma once

#include <functional>
#include <vector>

#include "shmkb/error.hpp"
#include "shmkb/semantics.hpp"

namespace shmkb::semantic {

using Terms = std::vector<RelationId>;
using Binding = std::vector<RelationId>;  // per slot, null when unbound

Terms terms_of(const Store& store, RelationId phrase);
std::vector<Terms> sample_terms(const Store& store, const Sample& sample);
/// Matches one part's template against terms, extending the binding.
bool bind_part(const SemanticRule& rule, std::size_t part, const Terms& terms, Binding& binding);
/// Every condition group has a row agreeing with the bound slots.
bool rows_admit(const SemanticRule& rule, const Binding& binding);
/// Calls fn for every full binding extending `binding` that the rows admit.
void complete(const SemanticRule& rule, Binding& binding, const std::function<void(const Binding&)>& fn);
Terms instantiate(const SemanticRule& rule, std::size_t part, const Binding& binding);

}  // namespace shmkb::semantic
