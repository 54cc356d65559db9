#include <doctest.h>

#include <random>
#include <set>

#include "shmkb/builtins.hpp"
#include "shmkb/engine.hpp"
#include "shmkb/error.hpp"

using namespace shmkb;

namespace {

RelationId condition(Store& s, const std::string& text) {
  return intern_sentence(s, *parse_rule(tokenize("-> #f() | " + text + ";")).cond);
}

RelationId term(Store& s, const std::string& text) {
  return intern_term(s, parse_rule(tokenize("-> #f(" + text + ");")).right.front().args.front());
}

RelationId sentence(Store& s, const std::string& text) {
  return intern_sentence(s, parse_rule(tokenize("-> " + text + ";")).right.front());
}

struct Fixture {
  Store s;
  Session session{s};
  VarTable table;

  int eval(const std::string& text) { return session.eval_condition(condition(s, text), table); }
  RelationId value(const std::string& var) { return *session.lookup(s.variable(var), table); }
};

// Independent comparison oracle: a word that reads as a decimal number is
// compared as that number, anything else by its text.
std::optional<long double> as_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const long double v = std::stold(text, &used);
    if (used == text.size() && (std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '-')) return v;
  } catch (...) {
  }
  return std::nullopt;
}

int oracle_compare(const std::string& a, const std::string& b) {
  const auto x = as_number(a);
  const auto y = as_number(b);
  if (x && y) return *x < *y ? -1 : (*x > *y ? 1 : 0);
  return a < b ? -1 : (a == b ? 0 : 1);
}

}  // namespace

TEST_CASE("descriptor table lists the fixed names and arities") {
  const std::set<std::string> two{"Belong", "Dec",    "Eq", "Fix", "Ge", "Grtdat", "Inc",
                                  "Le",     "Ltldat", "Move", "Ne", "Part", "Spawn"};
  const std::set<std::string> one{"Date", "List", "SystemR", "Time", "Tstdat"};
  const std::set<std::string> zero{"Break", "Delete", "Exit", "Not", "Save"};
  CHECK(builtins().size() == two.size() + one.size() + zero.size());
  for (const auto& b : builtins()) {
    const std::string name(b.name);
    const int expected = two.count(name) ? 2 : (one.count(name) ? 1 : 0);
    CHECK_MESSAGE(b.arity == expected, name);
    CHECK(b.second_level == (name == "Delete" || name == "Not" || name == "Save"));
  }
  CHECK(find_builtin("Eq") != nullptr);
  CHECK(find_builtin("eq") == nullptr);
}

TEST_CASE("comparisons") {
  Fixture f;
  CHECK(f.eval("#Eq(5 5)") == 1);
  CHECK(f.eval("#Ge('b' 'a')") == 1);
  CHECK(f.eval("#Le('b' 'a')") == 0);
  CHECK(f.eval("#Ge(10 9)") == 1);  // numerically, not by text
  // '5' reads as a number, so it equals 5
  const auto five = parse_number_word("5");
  REQUIRE(five);
  CHECK(f.s.intern_number_word(*five) == f.s.intern_number_word(std::int64_t{5}));
  const int expected = oracle_compare("5", "5") == 0 ? 0 : 1;
  CHECK(f.eval("#Ne(5 '5')") == expected);
  CHECK(f.eval("(5 != '5')") == expected);
  CHECK_THROWS_AS(f.eval("#Eq(x 1)"), BindingError);
}

TEST_CASE("sugar and explicit forms agree with the comparison oracle") {
  std::mt19937 rng(3);
  const std::vector<std::string> pool{"0", "1", "7", "10", "-3", "2.5", "'5'", "'a'", "'b'", "'abc'", "'007'", "'7'"};
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"==", "Eq"}, {"!=", "Ne"}, {">=", "Ge"}, {"<=", "Le"}};
  auto strip = [](const std::string& t) { return t[0] == '\'' ? t.substr(1, t.size() - 2) : t; };
  for (int i = 0; i < 400; ++i) {
    Fixture f;
    const auto& a = pool[rng() % pool.size()];
    const auto& b = pool[rng() % pool.size()];
    const auto& [op, name] = pairs[rng() % pairs.size()];
    const int sugar = f.eval("(" + a + " " + op + " " + b + ")");
    const int explicit_form = f.eval("#" + name + "(" + a + " " + b + ")");
    CHECK(sugar == explicit_form);
    const int c = oracle_compare(strip(a), strip(b));
    const bool holds = op == "==" ? c == 0 : op == "!=" ? c != 0 : op == ">=" ? c >= 0 : c <= 0;
    CHECK_MESSAGE(sugar == (holds ? 1 : 0), a << " " << op << " " << b);
  }
}

TEST_CASE("assignment family") {
  Fixture f;
  CHECK(f.eval("(Flag := 0)") == 1);
  CHECK(*f.session.global("Flag") == f.s.intern_number_word(std::int64_t{0}));

  CHECK(f.eval("(x := 2), (x += 3)") == 1);
  CHECK(f.value("x") == f.s.intern_number_word(std::int64_t{5}));
  CHECK(f.eval("(x -= 5)") == 1);
  CHECK(f.value("x") == f.s.intern_number_word(std::int64_t{0}));
  CHECK(f.eval("(x -= 1)") == 1);
  CHECK(f.value("x") == f.s.intern_number_word(std::int64_t{-1}));
  CHECK(f.eval("(x := x)") == 1);
  CHECK(f.value("x") == f.s.intern_number_word(std::int64_t{-1}));

  // Fix coerces a numeric word, Move copies it as is
  CHECK(f.eval("#Fix(a '007')") == 1);
  CHECK(f.eval("#Move(b '007')") == 1);
  const auto coerced = parse_number_word("007");
  REQUIRE(coerced);
  CHECK(f.value("a") == f.s.intern_number_word(*coerced));
  CHECK(f.value("b") == f.s.intern_word("007"));
  CHECK(f.value("a") != f.value("b"));

  CHECK_THROWS_AS(f.eval("#Move(c y)"), BindingError);
  CHECK_THROWS_AS(f.eval("#Fix(1 2)"), AssignmentError);
  CHECK(f.eval("(w := 'text')") == 1);
  CHECK_THROWS_AS(f.eval("(w += 1)"), TypeError);
}

TEST_CASE("membership and parts") {
  // "input" convolves as ((in)put) when "in" exists first
  Fixture g;
  g.s.intern_word("in");
  g.s.intern_word("input");
  const auto parts = g.s.inverse_refs(g.s.inverse_refs(g.s.intern_word("input")).front());
  const bool in_is_constituent =
      std::find(parts.begin(), parts.end(), g.s.inverse_refs(g.s.intern_word("in")).front()) != parts.end();
  CHECK(g.eval("#Belong('in' 'input')") == (in_is_constituent ? 1 : 0));
  CHECK(in_is_constituent);
  CHECK(g.eval("#Belong('input' 'input')") == 0);

  Fixture f;

  const std::string hay = "input";
  for (const std::string needle : {"put", "inp", "tu", "x", "input", "inputs"}) {
    const int expected = hay.find(needle) != std::string::npos ? 1 : 0;
    CHECK_MESSAGE(f.eval("#Part('" + needle + "' 'input')") == expected, needle);
  }
  CHECK(f.eval("(l := {'a' 'b' 'c'}), #Part('b' l)") == 1);
  CHECK(f.eval("(m := {'a' 'b' 'c'}), #Part('d' m)") == 0);
}

TEST_CASE("dates") {
  Fixture f;
  CHECK(f.eval("#Tstdat('2024-02-30')") == 0);
  CHECK(f.eval("#Tstdat('2024-02-29')") == 1);
  CHECK(f.eval("#Tstdat('2023-02-29')") == 0);
  CHECK(f.eval("#Grtdat('2024-01-02' '2024-01-01')") == 1);
  CHECK(f.eval("#Ltldat('2024-01-02' '2024-01-01')") == 0);
  CHECK(f.eval("#Grtdat('soon' '2024-01-01')") == 0);
  CHECK(f.eval("#Date(d), #Tstdat(d)") == 1);
  CHECK(f.eval("#Time(t)") == 1);
  CHECK(f.s.text(f.value("t")).size() == 8);

  // chronological order matches a day count computed independently
  auto days = [](int y, int m, int d) {
    // days from civil, shifted so March starts the year
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = y - era * 400;
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
  };
  CHECK(date_ordinal("1970-01-01") == 0);
  CHECK(date_ordinal("2024-03-01") == days(2024, 3, 1));
  CHECK(date_ordinal("1999-12-31") == days(1999, 12, 31));
}

TEST_CASE("spawn and system are disabled by default") {
  Fixture f;
  CHECK_THROWS_AS(f.eval("#Spawn('true' 'x')"), UnsupportedError);
  CHECK_THROWS_AS(f.eval("#SystemR('true')"), UnsupportedError);
  Store s;
  Session enabled(s, EngineOptions{.enable_spawn = true});
  VarTable t;
  CHECK(enabled.eval_condition(condition(s, "#SystemR('true')"), t) == 1);
  CHECK(enabled.eval_condition(condition(s, "#SystemR('false')"), t) == 0);
}

TEST_CASE("break and not") {
  Store s;
  translate_text(s,
                 "$yes() -> ;\n"
                 "$stop() -> #Break();\n",
                 "n");
  Session session(s);
  VarTable t;
  CHECK(session.run_sentence(sentence(s, "#Break()"), t) == kInterrupted);
  CHECK(session.run_sentence(sentence(s, "#Not: $yes()"), t) == 0);
  CHECK(session.run_sentence(sentence(s, "#Not: $no()"), t) == 1);
  CHECK(session.run_sentence(sentence(s, "#Not: $stop()"), t) == kInterrupted);
  CHECK(session.eval_condition(condition(s, "!$yes()"), t) == 0);
  CHECK(session.eval_condition(condition(s, "!$no()"), t) == 1);
}

TEST_CASE("not is an involution on success and failure") {
  std::mt19937 rng(8);
  Store s;
  Session session(s);
  for (int i = 0; i < 200; ++i) {
    const int a = static_cast<int>(rng() % 4);
    const int b = static_cast<int>(rng() % 4);
    const std::string inner = "#Eq(" + std::to_string(a) + " " + std::to_string(b) + ")";
    VarTable t;
    const int plain = session.eval_condition(condition(s, inner), t);
    const int once = session.eval_condition(condition(s, "#Not: " + inner), t);
    const int twice = session.eval_condition(condition(s, "#Not: #Not: " + inner), t);
    CHECK(plain == (a == b ? 1 : 0));
    CHECK(once == 1 - plain);
    CHECK(twice == plain);
  }
}

TEST_CASE("builtins return only 1, 0 or -1") {
  std::mt19937 rng(21);
  const std::vector<std::string> values{"1", "2", "-4", "'x'", "'2024-05-06'", "'2024-13-01'", "{'a' 'b'}", "'input'"};
  const std::vector<std::string> calls{"Belong", "Eq", "Ne", "Ge", "Le", "Part", "Grtdat", "Ltldat", "Fix", "Move"};
  for (int i = 0; i < 500; ++i) {
    Fixture f;
    const auto& name = calls[rng() % calls.size()];
    const auto& a = values[rng() % values.size()];
    const auto& b = values[rng() % values.size()];
    const bool assigns = name == "Fix" || name == "Move";
    const std::string text = "#" + name + "(" + (assigns ? std::string("v") : a) + " " + b + ")";
    const int rc = f.session.run_sentence(sentence(f.s, text), f.table);
    CHECK_MESSAGE((rc == 1 || rc == 0 || rc == -1), text);
  }
  Fixture f;
  CHECK(f.session.run_sentence(sentence(f.s, "#Tstdat('x')"), f.table) == 0);
  CHECK(f.session.run_sentence(sentence(f.s, "#Break()"), f.table) == -1);
}

TEST_CASE("save then delete round trip on random schemes") {
  std::mt19937 rng(17);
  const char* names[] = {"k", "u", "v"};
  for (int i = 0; i < 60; ++i) {
    Store s;
    Session session(s);
    const int n = 1 + static_cast<int>(rng() % 3);
    const bool nested = rng() % 2 == 0;
    std::string scheme_text = "(";
    for (int k = 0; k < n; ++k) {
      scheme_text += k ? " " : "";
      scheme_text += (nested && k == n - 1) ? "{" + std::string(names[k]) + "}" : names[k];
    }
    scheme_text += ")";
    const RelationId scheme = sentence(s, scheme_text);
    const RelationId file = ensure_file(s, scheme);

    auto bind = [&](const std::vector<std::string>& values) {
      VarTable t;
      for (int k = 0; k < n; ++k) {
        const std::string word = "'" + values[k] + "'";
        t.set(s.variable(names[k]), term(s, nested && k == n - 1 ? "{" + word + "}" : word));
      }
      return t;
    };
    std::set<std::vector<std::string>> saved;
    for (int round = 0; round < 5; ++round) {
      std::vector<std::string> values;
      for (int k = 0; k < n; ++k) values.push_back("w" + std::to_string(rng() % 4));
      VarTable t = bind(values);
      const auto before = s.paradigm_values(file).size();
      CHECK(save_following(session, scheme, t) == kSucceeded);
      const bool fresh = saved.insert(values).second;
      CHECK(s.paradigm_values(file).size() == before + (fresh ? 1 : 0));
      CHECK(session.search_file(scheme, t, true).size() == 1);
    }
    for (const auto& values : saved) {
      VarTable t = bind(values);
      CHECK(delete_following(session, scheme, t) == kSucceeded);
      CHECK(session.search_file(scheme, t, true).empty());
    }
    CHECK(s.paradigm_values(file).empty());
    VarTable t;
    t.set(s.variable(names[0]), s.intern_word("absent"));
    CHECK(delete_following(session, scheme, t) == kFailed);
    CHECK(s.check_invariants().empty());
  }
}

TEST_CASE("save with an unbound variable is a binding error") {
  Store s;
  Session session(s);
  const RelationId scheme = sentence(s, "(k v)");
  ensure_file(s, scheme);
  VarTable t;
  t.set(s.variable("k"), s.intern_word("a"));
  CHECK_THROWS_AS(save_following(session, scheme, t), BindingError);
}
