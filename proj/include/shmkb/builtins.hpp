#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "shmkb/engine.hpp"

namespace shmkb {

struct BuiltinDescriptor {
  std::string_view name;
  int arity;
  bool second_level;  // #Save:, #Delete:, #Not: apply to the following sentence
  HostFunction fn;    // empty for second-level functions
  bool pure = true;   // no effect beyond its arguments
};

/// Thrown by #Exit; unwinds to fire_entry_rules.
struct ExitRequest {};

std::span<const BuiltinDescriptor> builtins();
const BuiltinDescriptor* find_builtin(std::string_view name);

/// Instantiates `sentence` (a file scheme) and stores it in its file. The
/// variable values also join the variables' paradigms when their level fits.
ReturnCode save_following(Session& session, RelationId sentence, VarTable& table);
/// Removes the first stored sentence matching `sentence`; 0 when none.
ReturnCode delete_following(Session& session, RelationId sentence, VarTable& table);

/// Day count of a "YYYY-MM-DD" date, empty when malformed or invalid.
std::optional<std::int64_t> date_ordinal(std::string_view text);

}  // namespace shmkb
