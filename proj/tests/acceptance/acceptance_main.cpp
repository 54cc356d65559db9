// One [PASS]/[FAIL] line per acceptance criterion; exits nonzero on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "../datalog.hpp"
#include "../semantic_fixtures.hpp"
#include "../semantic_oracle.hpp"
#include "shmkb/engine.hpp"
#include "shmkb/scripted_host.hpp"
#include "shmkb/semantics.hpp"
#include "shmkb/translate.hpp"

using namespace shmkb;
using nlohmann::json;
using Clock = std::chrono::steady_clock;
using Texts = std::set<std::string>;

namespace {

class Criterion {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool passed() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

Texts texts_of(const std::vector<Answer>& answers) {
  Texts out;
  for (const auto& a : answers) out.insert(a.text);
  return out;
}

Texts values_text(const Store& s, const SemanticRule::Slot& slot) {
  Texts out;
  for (auto v : slot.values) out.insert(phrase_text(s, v));
  return out;
}

Sample sample(Store& s, const fixtures::Triple& t) { return make_sample(s, t.shape, t.texts); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("shmkb_acceptance_" + name + "_" + std::to_string(::getpid()));
}

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(SHMKB_TEST_DATA) + "/" + name);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------

void generalization(Criterion& c) {
  const auto start = Clock::now();
  Store s;
  KnowledgeBase kb(s);
  for (const auto& t : fixtures::fair_play()) kb.teach(sample(s, t));
  const auto rules = kb.rules();
  c.expect(rules.size() == 1, "expected one rule, got " + std::to_string(rules.size()));
  if (rules.size() != 1) return;
  const auto& r = rules[0];

  std::set<Texts> paradigms;
  for (const auto& slot : r.slots) paradigms.insert(values_text(s, slot));
  c.expect(paradigms == std::set<Texts>{{"Tom", "Bill"}, {"played", "spoke"}, {"play", "speak"}},
           "paradigms differ from {Tom Bill} {played spoke} {play speak}");

  std::set<std::pair<std::string, std::string>> pairs;
  bool one_pair_group = r.groups.size() == 1 && r.groups[0].slots.size() == 2;
  if (one_pair_group) {
    const auto& g = r.groups[0];
    const bool past_first = values_text(s, r.slots[static_cast<std::size_t>(g.slots[0])]).count("played") > 0;
    for (const auto& row : g.rows) {
      const auto a = phrase_text(s, row[0]);
      const auto b = phrase_text(s, row[1]);
      pairs.insert(past_first ? std::pair{b, a} : std::pair{a, b});
    }
  }
  c.expect(one_pair_group, "expected a single condition over the two verb slots");
  c.expect(pairs == std::set<std::pair<std::string, std::string>>{{"play", "played"}, {"speak", "spoke"}},
           "condition does not license exactly play/played and speak/spoke");

  const auto derived =
      make_sample(s, Shape::SentenceQuestion, {"Bill spoke fair .", "Did Bill speak fair ?", "Bill spoke fair ."});
  c.expect(kb.covered(derived), "derived triple not covered");
  kb.ingest_article("b", "Bill spoke fair.");
  c.expect(texts_of(kb.answer("Did Bill speak fair ?")) == Texts{"Bill spoke fair ."}, "derived question not answered");
  c.expect(seconds_since(start) < 1.0, "slower than 1 s");
}

void semantic_search(Criterion& c) {
  const auto start = Clock::now();
  Store s;
  KnowledgeBase kb(s);
  fixtures::teach_all(kb, fixtures::elder_younger());
  kb.ingest_article("N", fixtures::kArticleN);
  const auto answers = kb.answer("Who is elder than Tom ?");
  c.expect(texts_of(answers) == Texts{"Bill is elder than Tom .", "Jon is elder than Tom ."},
           "answers differ from the two expected");
  c.expect(answers.size() == 2, "duplicate answers");
  c.expect(seconds_since(start) < 1.0, "slower than 1 s");
}

void convolution(Criterion& c) {
  Store s;
  const auto in = s.intern_word("in");
  const auto input = s.intern_word("input");
  // input -> structure ((in) p u t)
  const auto structure = s.inverse_refs(input).front();
  const auto parts = s.inverse_refs(structure).to_vector();
  c.expect(parts.size() == 4, "input should have 4 constituents, has " + std::to_string(parts.size()));
  if (parts.size() != 4) return;
  c.expect(parts[0] == s.inverse_refs(in).front(), "first constituent is not the stored (in)");
  c.expect(s.text(parts[0]) == "in", "first constituent reads " + s.text(parts[0]));
  c.expect(s.text(parts[1]) == "p" && s.text(parts[2]) == "u" && s.text(parts[3]) == "t", "tail is not p u t");
  c.expect(s.text(input) == "input", "text round trip");
}

void article_workflow(Criterion& c) {
  Store s;
  translate_text(s, read_fixture("articles.rules"), "articles.rules");
  Session session(s);
  const RelationId scheme = intern_sentence(s, parse_rule(tokenize("-> (art+ {s});")).right.front());

  auto press = [&](const json& script) {
    ScriptedHost host(script);
    host.install(session);
    session.fire_entry_rules(0413);
    c.expect(host.pending() == 0, "script steps left unused");
    std::vector<std::string> shown;
    for (const auto& call : host.calls()) {
      if (call.name == "win3b") shown.push_back(call.args.at(0));
    }
    return shown;
  };
  auto open = [](const std::string& id) { return json{{{"set", {{"Art", id}}}, {"return", "0413"}}}; };

  press({{"win3a", open("a1")},
         {"win3b", {{{"set", {{"s", {"Tom is younger than Bill.", "Bill is younger than Jon."}}}}, {"return", "0423"}}}}});
  press({{"win3a", open("a0")}, {"win3b", {{{"set", {{"s", {"Zero."}}}}, {"return", "0423"}}}}});

  auto by_key = press({{"win3a", open("a1")}, {"win3b", json::array()}});
  c.expect(by_key == std::vector<std::string>{"('a1' {'Tom is younger than Bill.' 'Bill is younger than Jon.'})"},
           "re-read by key");
  auto all = press({{"win3a", open(" ")}, {"win3b", json::array()}});
  c.expect(all.size() == 2 && all[0].rfind("('a0'", 0) == 0 && all[1].rfind("('a1'", 0) == 0,
           "ascending iteration over art+");

  press({{"win3a", open("a1")}, {"win3b", {{{"return", "0424"}}}}});
  VarTable key;
  key.set(s.variable("art+"), s.intern_word("a1"));
  c.expect(session.search_file(scheme, key, true).empty(), "deleted article still found");
  all = press({{"win3a", open(" ")}, {"win3b", json::array()}});
  c.expect(all.size() == 1, "iteration after delete");
  c.expect(s.check_invariants().empty(), "store invariants");
}

void oracle_equivalence(Criterion& c) {
  const auto start = Clock::now();
  std::mt19937 rng(4242);
  for (int i = 0; i < 100; ++i) {
    const auto instance = datalog::generate(rng);
    if (datalog::engine_answers(instance) != datalog::fixpoint(instance)) {
      c.expect(false, "rule engine differs on:\n" + datalog::to_rules(instance));
    }
  }

  // the same count of semantic instances against the grounding oracle
  std::mt19937 sem(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t depth = 1 + sem() % 4;
    Store s;
    KnowledgeBase kb(s, {.depth_cap = depth});
    const int teaches = 2 + static_cast<int>(sem() % 8);
    for (int i = 0; i < teaches && kb.rules().size() < 6; ++i) {
      kb.teach(oracle::random_sample(s, sem, static_cast<Shape>(sem() % 3)));
    }
    std::string text;
    const int sentences = 1 + static_cast<int>(sem() % 8);
    for (int i = 0; i < sentences; ++i) text += oracle::random_phrase(sem, 2) + " . ";
    const auto article = kb.ingest_article("x", text);
    for (int q = 0; q < 4; ++q) {
      const auto question = parse_phrase(s, oracle::random_phrase(sem, 2) + " .");
      const auto expected = oracle::oracle_answers(s, kb, article.sentences, question, depth);
      const auto actual = kb.answer(question);
      if (texts_of(actual) != expected || actual.size() != expected.size()) {
        c.expect(false, "semantic answers differ in trial " + std::to_string(trial));
      }
    }
  }
  c.expect(seconds_since(start) < 60.0, "slower than 60 s");
}

void persistence(Criterion& c) {
  const auto path = scratch("persist");
  std::vector<Answer> before;
  {
    Store s;
    KnowledgeBase kb(s);
    fixtures::teach_all(kb, fixtures::elder_younger());
    kb.ingest_article("N", fixtures::kArticleN);
    before = kb.answer("Who is elder than Tom ?");
    s.snapshot(path);
  }
  {
    Store s = Store::load(path);
    KnowledgeBase kb(s);
    c.expect(kb.answer("Who is elder than Tom ?") == before, "answers differ after load");
    c.expect(s.check_invariants().empty(), "invariants after load");
  }

  // a second process reads the same file
  int fds[2];
  if (::pipe(fds) != 0) {
    c.expect(false, "pipe");
    return;
  }
  const pid_t child = ::fork();
  if (child == 0) {
    ::close(fds[0]);
    int code = 0;
    try {
      Store s = Store::load(path);
      KnowledgeBase kb(s);
      std::string out;
      for (const auto& a : kb.answer("Who is elder than Tom ?")) out += a.text + "\t" + a.article + "\n";
      if (::write(fds[1], out.data(), out.size()) != static_cast<ssize_t>(out.size())) code = 3;
    } catch (...) {
      code = 4;
    }
    ::close(fds[1]);
    ::_exit(code);
  }
  ::close(fds[1]);
  std::string received;
  char buf[512];
  for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;) received.append(buf, static_cast<std::size_t>(n));
  ::close(fds[0]);
  int status = 0;
  ::waitpid(child, &status, 0);
  std::string expected;
  for (const auto& a : before) expected += a.text + "\t" + a.article + "\n";
  c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "child process failed");
  c.expect(received == expected, "answers differ in a new process");
  std::filesystem::remove(path);
}

void scale(Criterion& c) {
  std::mt19937 rng(12);
  std::set<std::string> words;
  while (words.size() < 10000) {
    std::string w;
    const int length = 3 + static_cast<int>(rng() % 10);
    for (int i = 0; i < length; ++i) w += static_cast<char>('a' + rng() % 26);
    words.insert(w);
  }
  Store s;
  for (const auto& w : words) s.intern_word(w);
  constexpr std::size_t kLimit = 50u << 20;
  c.expect(s.arena_bytes() < kLimit, "arena holds " + std::to_string(s.arena_bytes()) + " bytes");
  const auto path = scratch("scale");
  s.snapshot(path);
  c.expect(std::filesystem::file_size(path) < kLimit, "arena file is too large");
  std::filesystem::remove(path);
  c.expect(s.stats().nodes_per_level[1] >= 10000, "fewer than 10000 words stored");
}

void return_codes(Criterion& c) {
  std::mt19937 rng(21);
  auto sentence = [](Store& s, const std::string& text) {
    return intern_sentence(s, parse_rule(tokenize("-> " + text + ";")).right.front());
  };

  // builtins answer 1, 0 or -1
  const std::vector<std::string> values{"1", "2", "-4", "'x'", "'2024-05-06'", "'2024-13-01'", "{'a' 'b'}", "'input'"};
  const std::vector<std::string> calls{"Belong", "Eq", "Ne", "Ge", "Le", "Part", "Grtdat", "Ltldat", "Fix", "Move"};
  for (int i = 0; i < 300; ++i) {
    Store s;
    Session session(s);
    VarTable t;
    const auto& name = calls[rng() % calls.size()];
    const bool assigns = name == "Fix" || name == "Move";
    const std::string text = "#" + name + "(" + (assigns ? std::string("v") : values[rng() % values.size()]) + " " +
                             values[rng() % values.size()] + ")";
    const int rc = session.run_sentence(sentence(s, text), t);
    if (rc != 1 && rc != 0 && rc != -1) c.expect(false, text + " returned " + std::to_string(rc));
  }

  // a right part stops at the first 0 or -1 and returns it
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<int> codes;
    std::string right;
    for (int k = 0; k < n; ++k) {
      const int pick = static_cast<int>(rng() % 4);
      codes.push_back(pick == 0 ? 0 : (pick == 1 ? -1 : 1));
      right += (k ? ", " : "") + std::string("#c") + std::to_string(k) + "()";
    }
    Store s;
    translate_text(s, "-> " + right + " | (key == 1);", "seq");
    Session session(s);
    int called = 0;
    for (int k = 0; k < n; ++k) {
      session.register_function("c" + std::to_string(k), [&, k](CallContext&) {
        ++called;
        return codes[static_cast<std::size_t>(k)];
      });
    }
    const int rc = session.fire_entry_rules(1);
    const auto stop = std::find_if(codes.begin(), codes.end(), [](int x) { return x != 1; });
    const int expected_calls = stop == codes.end() ? n : static_cast<int>(stop - codes.begin()) + 1;
    const int expected_rc = stop == codes.end() ? 1 : *stop;
    if (called != expected_calls || rc != expected_rc) c.expect(false, "sequence halt rule broken for " + right);
  }

  // a {} list stops on -1 and passes it on
  for (int stop_at = 0; stop_at < 4; ++stop_at) {
    Store s;
    translate_text(s, "-> { #List(z), #step(z), }, #after() | (key == 1), (z := {'a' 'b' 'c'});", "list");
    Session session(s);
    int steps = 0;
    bool after = false;
    session.register_function("step", [&](CallContext&) { return steps++ == stop_at ? kInterrupted : kSucceeded; });
    session.register_function("after", [&](CallContext&) {
      after = true;
      return kSucceeded;
    });
    const int rc = session.fire_entry_rules(1);
    const bool interrupted = stop_at < 3;
    c.expect(rc == (interrupted ? -1 : 1), "list return code with stop at " + std::to_string(stop_at));
    c.expect(steps == (interrupted ? stop_at + 1 : 3), "list kept iterating after -1");
    c.expect(after == !interrupted, "-1 did not propagate out of the list");
  }

  // key changes only for codes above 0410
  for (int code : {0, 1, 0410, 0411, 0413, 0423, 0424, 0427, 0500}) {
    Store s;
    translate_text(s, "-> #h() | (key == 1);", "key");
    Session session(s);
    session.register_function("h", [code](CallContext&) { return code; });
    session.fire_entry_rules(1);
    const std::int64_t expected = code > 0410 ? code : 1;
    c.expect(session.key() == expected, "key after code " + std::to_string(code) + " is " + std::to_string(session.key()));
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
      {"generalization: three samples give one rule with paradigms and a pairing condition", generalization},
      {"semantic search: two answers for the elder/younger article", semantic_search},
      {"convolution: input is stored as ((in)put)", convolution},
      {"article workflow: create, re-read, iterate and delete by key events", article_workflow},
      {"oracle equivalence: randomized instances match the brute-force closure", oracle_equivalence},
      {"persistence: answers survive snapshot, load and a new process", persistence},
      {"scale: 10000 words stay under 50 MB", scale},
      {"return-code protocol: 1/0/-1, halting, list propagation and key", return_codes},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Criterion c;
    const auto start = Clock::now();
    try {
      run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    std::cout << (c.passed() ? "[PASS] " : "[FAIL] ") << name << " (" << ms << " ms)\n";
    for (const auto& f : c.failures()) std::cout << "       " << f << "\n";
    failed += !c.passed();
  }
  return failed == 0 ? 0 : 1;
}
