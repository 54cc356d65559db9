#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmkb/engine.hpp"

namespace shmkb {

/// Host callbacks replaying a JSON script, standing in for interactive
/// forms. Script shape: {"win3a": [{"set": {"Art": "a1"}, "return": "0413"}]}.
/// Values: strings are words (blank is the empty relation), numbers are
/// number words, arrays are `{...}` lists, {"sequence": "a ( b c ) ."} is a
/// bracketed word sequence. "return" takes an integer or an octal string;
/// a call with no step left returns 1.
class ScriptedHost {
 public:
  struct Call {
    std::string name;
    std::vector<std::string> args;  // printed argument values, "?" when unbound
  };

  explicit ScriptedHost(const nlohmann::json& script);

  void install(Session& session);
  void push(const std::string& function, const nlohmann::json& step);
  const std::vector<Call>& calls() const { return calls_; }
  std::size_t pending() const;

  static RelationId to_value(Store& store, const nlohmann::json& value);
  static ReturnCode to_code(const nlohmann::json& code);

 private:
  ReturnCode run(CallContext& ctx);

  std::map<std::string, std::deque<nlohmann::json>> steps_;
  std::vector<Call> calls_;
};

}  // namespace shmkb
