#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "semantic_fixtures.hpp"
#include "shmkb/api.hpp"
#include "shmkb/translate.hpp"
#include "test_support.hpp"

using namespace shmkb;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args, const std::string& input = {}) {
  ::unsetenv("SHMKB_ARENA");
  args.insert(args.begin(), "shmkb");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::istringstream in(input);
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, in);
  return {code, out.str(), err.str()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string fixture_path(const std::string& name) { return std::string(SHMKB_TEST_DATA) + "/" + name; }

// The CLI flags for one fixture triple.
std::vector<std::string> teach_args(const std::string& arena, const fixtures::Triple& t) {
  std::vector<std::string> args = {"--arena", arena, "teach", "--shape", to_string(t.shape)};
  if (t.shape == Shape::SentenceQuestion) {
    args.insert(args.end(), {"--s", t.texts[0], "--q", t.texts[1]});
  } else {
    for (std::size_t i = 0; i + 1 < t.texts.size(); ++i) args.insert(args.end(), {"--cond", t.texts[i]});
  }
  args.insert(args.end(), {"--a", t.texts.back()});
  return args;
}

json teach_body(const fixtures::Triple& t) {
  json body = {{"shape", to_string(t.shape)}, {"a", t.texts.back()}};
  if (t.shape == Shape::SentenceQuestion) {
    body["s"] = t.texts[0];
    body["q"] = t.texts[1];
  } else {
    body["conds"] = std::vector<std::string>(t.texts.begin(), t.texts.end() - 1);
  }
  return body;
}

std::set<std::string> lines(const std::string& text) {
  std::set<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.insert(line);
  return out;
}

// A server on a free port for the scope of the test.
class LiveServer {
 public:
  explicit LiveServer(Service& service) : server_(service) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10);
    return c;
  }

 private:
  HttpServer server_;
  int port_ = 0;
  std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  const auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expect);
  return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect) {
  const auto res = c.Get(path);
  REQUIRE(res);
  CHECK(res->status == expect);
  return json::parse(res->body);
}

std::string answer_path(const std::string& q) { return "/answer?q=" + httplib::detail::encode_query_param(q); }

}  // namespace

TEST_CASE("config") {
  CHECK(Config::from_json({{"depth_cap", 3}, {"rules_paths", {"a.rules"}}}).depth_cap == 3);
  CHECK_THROWS_AS(Config::from_json({{"depth", 3}}), DomainError);
  CHECK_THROWS_AS(Service(Config{.depth_cap = 0}), DomainError);

  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  {
    Service s(Config{.arena_path = arena});
    fixtures::Triple t = fixtures::fair_play()[0];
    s.teach(teach_body(t));
  }
  // the cap is checked against the arena already on disk
  CHECK_THROWS(Service(Config{.arena_path = arena, .arena_cap_bytes = 16}));

  write_file(dir.path() / "config.json", json{{"arena_path", arena}, {"depth_cap", 2}}.dump());
  const auto r = cli({"--config", (dir.path() / "config.json").string(), "dump", "--stats"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["rules"] == 1);
}

TEST_CASE("cli run with the article rule file") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  const auto script = (dir.path() / "save.json").string();
  write_file(script, json{{"win3a", {{{"set", {{"Art", "a1"}}}, {"return", "0413"}}}},
                          {"win3b", {{{"set", {{"s", {"Tom is younger than Bill."}}}}, {"return", "0423"}}}}}
                         .dump());
  auto r = cli({"--arena", arena, "run", "--rules", fixture_path("articles.rules"), "--key", "0413", "--script", script});
  CHECK_MESSAGE(r.code == 0, r.err);

  // read back from the arena file by a fresh process state
  r = cli({"--arena", arena, "dump", "--articles"});
  CHECK(r.code == 0);
  CHECK(r.out == "a1\n");
  CHECK(Store::load(arena).check_invariants().empty());

  // the translated file is reused, then the key deletes the article
  write_file(script,
             json{{"win3a", {{{"set", {{"Art", "a1"}}}, {"return", "0413"}}}}, {"win3b", {{{"return", "0424"}}}}}.dump());
  r = cli({"--arena", arena, "run", "--rules", fixture_path("articles.rules"), "--key", "0413", "--script", script});
  CHECK_MESSAGE(r.code == 0, r.err);
  r = cli({"--arena", arena, "dump", "--articles"});
  CHECK(r.out.empty());
}

TEST_CASE("cli run edge cases") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  write_file(dir.path() / "empty.rules", "");
  auto r = cli({"--arena", arena, "run", "--rules", (dir.path() / "empty.rules").string(), "--key", "0413"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());

  write_file(dir.path() / "bad.rules", "-> (x :=1)\n  | (key == ;\n");
  r = cli({"--arena", arena, "run", "--rules", (dir.path() / "bad.rules").string()});
  CHECK(r.code == 1);
  CHECK(std::regex_search(r.err, std::regex(R"(\d+:\d+: )")));

  write_file(dir.path() / "fail.rules", "-> #Break() | (key == 0413);\n");
  r = cli({"--arena", arena, "run", "--rules", (dir.path() / "fail.rules").string(), "--key", "0413"});
  CHECK(r.code == 2);

  r = cli({"--arena", arena, "run", "--key", "twelve"});
  CHECK(r.code == 1);
  CHECK(r.err.find("key") != std::string::npos);

  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"nonsense"}).code == 1);
  CHECK(cli({}).code == 1);
}

TEST_CASE("cli teach, ingest and ask") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();

  auto r = cli({"--arena", arena, "ask", "Who is elder than Tom ?"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());

  for (const auto& t : fixtures::elder_younger()) {
    r = cli(teach_args(arena, t));
    CHECK_MESSAGE(r.code == 0, r.err);
  }
  write_file(dir.path() / "n.txt", fixtures::kArticleN);
  r = cli({"--arena", arena, "ingest", "--id", "N", "--file", (dir.path() / "n.txt").string()});
  CHECK(r.code == 0);
  CHECK(r.out == "N: 2 sentences\n");
  r = cli({"--arena", arena, "ask", "Who is elder than Tom ?"});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == std::set<std::string>{"Bill is elder than Tom .\tN", "Jon is elder than Tom .\tN"});

  r = cli({"--arena", arena, "dump", "--article", "N"});
  CHECK(r.out == "Tom is younger than Bill .\nBill is younger than Jon .\n");
  r = cli({"--arena", arena, "dump", "--article", "missing"});
  CHECK(r.code == 1);

  // refusing an answer through unteach, then teaching it back is rejected
  r = cli({"--arena", arena, "unteach", "--s", "Jon is elder than Tom .", "--q", "Who is elder than Tom ?", "--a",
           "Jon is elder than Tom ."});
  CHECK(r.code == 0);
  r = cli(teach_args(arena, fixtures::elder_younger()[1]));
  CHECK(r.code == 1);
  CHECK(r.err.rfind("Rejected", 0) == 0);

  r = cli({"--arena", arena, "teach", "--s", "Tom ran ."});
  CHECK(r.code == 1);
  r = cli({"--arena", arena, "teach", "--shape", "Triple", "--a", "x ."});
  CHECK(r.code == 1);
}

TEST_CASE("cli dump after the fair-play teaches shows one rule with three paradigms") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  for (const auto& t : fixtures::fair_play()) CHECK(cli(teach_args(arena, t)).code == 0);

  const auto r = cli({"--arena", arena, "dump", "--rules", "--json"});
  REQUIRE(r.code == 0);
  const auto rules = json::parse(r.out)["rules"];
  REQUIRE(rules.size() == 1);
  // structural oracle: the slots are exactly the positions where the
  // samples disagree, read straight from the taught texts
  std::set<std::set<std::string>> varying;
  const auto triples = fixtures::fair_play();
  std::vector<std::vector<std::string>> words;
  for (const auto& t : triples) {
    std::vector<std::string> w;
    for (const auto& part : t.texts) {
      std::istringstream in(part);
      for (std::string x; in >> x;) w.push_back(x);
    }
    words.push_back(w);
  }
  for (std::size_t i = 0; i < words[0].size(); ++i) {
    std::set<std::string> column;
    for (const auto& w : words) column.insert(w[i]);
    if (column.size() > 1) varying.insert(column);
  }
  std::set<std::set<std::string>> slots;
  for (const auto& slot : rules[0]["slots"]) slots.insert(slot.get<std::set<std::string>>());
  CHECK(slots == varying);
  CHECK(slots.size() == 3);

  const auto text = cli({"--arena", arena, "dump"});
  CHECK(text.out == rules[0]["text"].get<std::string>());
}

TEST_CASE("cli confirm and repl") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  const auto session = "teach SQA Tom runs . | Who runs ? | Tom runs .\n"
                       "teach SQA Bill runs . | Who runs ? | Bill runs .\n"
                       "teach CondCons Tom sleeps . | Tom rests .\n"
                       "teach CondCons Ann sleeps . | Ann rests .\n"
                       "frobnicate\n"
                       "ingest d Ann runs.\n"
                       "ask Who runs ?\n"
                       "quit\n"
                       "ask Who runs ?\n";
  auto r = cli({"--arena", arena, "repl"}, session);
  CHECK(r.code == 0);
  CHECK(r.out == "Created\nMerged\nCreated\nMerged\n1 sentences\n");
  CHECK(r.err.find("unknown command frobnicate") != std::string::npos);

  r = cli({"--arena", arena, "dump", "--proposals"});
  const auto proposals = json::parse(r.out)["proposals"];
  REQUIRE(proposals.size() == 1);
  const auto id = std::to_string(proposals[0]["id"].get<std::int64_t>());
  CHECK(cli({"--arena", arena, "confirm", "--id", id}).code == 1);
  CHECK(cli({"--arena", arena, "confirm", "--id", id, "--accept", "--reject"}).code == 1);
  CHECK(cli({"--arena", arena, "confirm", "--id", id, "--accept"}).code == 0);
  CHECK(cli({"--arena", arena, "confirm", "--id", "999", "--accept"}).code == 1);
  r = cli({"--arena", arena, "ask", "Who runs ?"});
  CHECK(r.out == "Ann runs .\td\n");
}

TEST_CASE("SHMKB_ARENA overrides --arena") {
  TempDir dir;
  const auto env_arena = (dir.path() / "env.arena").string();
  const auto flag_arena = (dir.path() / "flag.arena").string();
  std::vector<std::string> args = {"shmkb", "--arena", flag_arena, "ingest", "--id", "x", "--text", "Hi."};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::istringstream in;
  ::setenv("SHMKB_ARENA", env_arena.c_str(), 1);
  CHECK(run_cli(static_cast<int>(argv.size()), argv.data(), out, err, in) == 0);
  ::unsetenv("SHMKB_ARENA");
  CHECK(std::filesystem::exists(env_arena));
  CHECK_FALSE(std::filesystem::exists(flag_arena));
}

TEST_CASE("http endpoints") {
  Service service(Config{});
  LiveServer live(service);
  auto c = live.client();

  auto body = post(c, "/teach",
                   {{"shape", "SQA"},
                    {"s", "Tom read ( a book ) ."},
                    {"q", "who read ( a book ) ?"},
                    {"a", "Tom read ( a book ) ."}},
                   200);
  CHECK(body["outcome"] == "Created");
  CHECK(body["changed"] == true);

  CHECK(get(c, answer_path("who read ( a book ) ?"), 200)["answers"].empty());
  CHECK(get(c, answer_path("unknown question ?"), 200) == json{{"answers", json::array()}});
  post(c, "/articles", {{"id", "f2"}, {"text", "Tom read ( a book ) ."}}, 200);
  CHECK(get(c, answer_path("who read ( a book ) ?"), 200) ==
        json{{"answers", {{{"text", "Tom read ( a book ) ."}, {"article", "f2"}}}}});

  SUBCASE("400") {
    auto res = c.Post("/teach", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    post(c, "/teach", {{"shape", "SQA"}, {"s", "x ."}}, 400);
    post(c, "/teach", {{"shape", "Other"}, {"a", "x ."}}, 400);
    post(c, "/teach", {{"shape", "CondCons"}, {"conds", {"a .", "b ."}}, {"a", "x ."}}, 400);
    post(c, "/teach", {{"shape", "SQA"}, {"s", "( x ."}, {"q", "y ?"}, {"a", "z ."}}, 400);
    post(c, "/articles", {{"id", "f3"}}, 400);
    post(c, "/articles", {{"id", "two words"}, {"text", "x."}}, 400);
    post(c, "/proposals/1", {{"accept", "yes"}}, 400);
    get(c, "/answer", 400);
    res = c.Post("/teach", "[1, 2]", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  SUBCASE("404") {
    get(c, "/articles/zz", 404);
    post(c, "/proposals/77", {{"accept", true}}, 404);
  }
  SUBCASE("422") {
    const json triple = {{"shape", "SQA"}, {"s", "Ann read ."}, {"q", "who read ?"}, {"a", "Ann read ."}};
    post(c, "/teach", triple, 200);
    post(c, "/unteach", triple, 200);
    post(c, "/unteach", triple, 200);
    body = post(c, "/teach", triple, 422);
    CHECK(body["outcome"] == "Rejected");
    CHECK(get(c, "/rules", 200)["refused"].size() == 1);
  }
  SUBCASE("409") {
    Service::SnapshotGuard guard(service);
    post(c, "/articles", {{"id", "f3"}, {"text", "x."}}, 409);
    post(c, "/teach", {{"shape", "SQA"}, {"s", "a ."}, {"q", "b ?"}, {"a", "c ."}}, 409);
    // reads continue
    get(c, "/stats", 200);
  }
  SUBCASE("reads") {
    CHECK(get(c, "/articles", 200) == json{{"articles", {"f2"}}});
    const auto a = get(c, "/articles/f2", 200);
    CHECK(a["sentences"] == json{"Tom read ( a book ) ."});
    CHECK(a["scheme_links"].size() == 1);
    const auto rules = get(c, "/rules", 200);
    REQUIRE(rules["rules"].size() == 1);
    CHECK(rules["rules"][0]["shape"] == "SQA");
    CHECK(get(c, "/proposals", 200) == json{{"proposals", json::array()}});
    const auto stats = get(c, "/stats", 200);
    CHECK(stats["rules"] == 1);
    CHECK(stats["articles"] == 1);
    CHECK(post(c, "/snapshot", json::object(), 200)["ok"] == true);
  }
}

TEST_CASE("http: elder and younger through the service") {
  Service service(Config{});
  LiveServer live(service);
  auto c = live.client();
  for (const auto& t : fixtures::elder_younger()) post(c, "/teach", teach_body(t), 200);
  post(c, "/articles", {{"id", "N"}, {"text", fixtures::kArticleN}}, 200);
  const auto answers = get(c, answer_path("Who is elder than Tom ?"), 200)["answers"];
  std::set<std::string> texts;
  for (const auto& a : answers) {
    CHECK(a["article"] == "N");
    texts.insert(a["text"].get<std::string>());
  }
  CHECK(texts == std::set<std::string>{"Bill is elder than Tom .", "Jon is elder than Tom ."});
}

TEST_CASE("http: proposals") {
  Service service(Config{});
  LiveServer live(service);
  auto c = live.client();
  post(c, "/teach", {{"shape", "SQA"}, {"s", "Tom runs ."}, {"q", "Who runs ?"}, {"a", "Tom runs ."}}, 200);
  post(c, "/teach", {{"shape", "SQA"}, {"s", "Bill runs ."}, {"q", "Who runs ?"}, {"a", "Bill runs ."}}, 200);
  post(c, "/teach", {{"shape", "CondCons"}, {"conds", {"Tom sleeps ."}}, {"a", "Tom rests ."}}, 200);
  post(c, "/teach", {{"shape", "CondCons"}, {"conds", {"Ann sleeps ."}}, {"a", "Ann rests ."}}, 200);
  auto proposals = get(c, "/proposals", 200)["proposals"];
  REQUIRE(proposals.size() == 1);
  CHECK(proposals[0]["status"] == "pending");
  const auto id = proposals[0]["id"].get<std::int64_t>();
  post(c, "/proposals/" + std::to_string(id), {{"accept", false}}, 200);
  CHECK(get(c, "/proposals", 200)["proposals"][0]["status"] == "rejected");
}

TEST_CASE("every mutation survives snapshot and reload") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  const Config config{.arena_path = arena};
  std::optional<Service> service(std::in_place, config);

  auto reloaded = [&] {
    const auto before = service->state();
    service->snapshot();
    service.reset();
    service.emplace(config);
    CHECK(service->state() == before);
    return service->state();
  };

  for (const auto& t : fixtures::elder_younger()) service->teach(teach_body(t));
  CHECK(reloaded()["rules"]["rules"].size() == service->rules()["rules"].size());
  service->ingest("N", fixtures::kArticleN);
  CHECK(reloaded()["articles"].size() == 1);
  CHECK(service->answer("Who is elder than Tom ?").size() == 2);
  service->unteach(teach_body(fixtures::elder_younger()[0]));
  CHECK(reloaded()["rules"]["refused"].size() == 1);
  service->teach({{"shape", "SQA"}, {"s", "Tom runs ."}, {"q", "Who runs ?"}, {"a", "Tom runs ."}});
  service->teach({{"shape", "SQA"}, {"s", "Bill runs ."}, {"q", "Who runs ?"}, {"a", "Bill runs ."}});
  service->teach({{"shape", "CondCons"}, {"conds", {"Tom sleeps ."}}, {"a", "Tom rests ."}});
  service->teach({{"shape", "CondCons"}, {"conds", {"Ann sleeps ."}}, {"a", "Ann rests ."}});
  const auto pending = reloaded()["proposals"]["proposals"];
  REQUIRE_FALSE(pending.empty());
  const auto id = pending[0]["id"].get<std::int64_t>();
  service->confirm(id, true);
  for (const auto& p : reloaded()["proposals"]["proposals"]) {
    if (p["id"] == id) CHECK(p["status"] == "accepted");
  }
  service->ingest("N", "Jon is younger than Tom.");
  CHECK(reloaded()["articles"][0]["sentences"] == json{"Jon is younger than Tom ."});
}

TEST_CASE("cli and http produce the same state") {
  TempDir dir;
  const auto arena = (dir.path() / "kb.arena").string();
  for (const auto& t : fixtures::elder_younger()) REQUIRE(cli(teach_args(arena, t)).code == 0);
  REQUIRE(cli({"--arena", arena, "ingest", "--id", "N", "--text", fixtures::kArticleN}).code == 0);
  REQUIRE(cli({"--arena", arena, "unteach", "--s", "Jon is elder than Bill .", "--q", "Who is elder than Bill ?",
               "--a", "Jon is elder than Bill ."})
              .code == 0);
  REQUIRE(cli({"--arena", arena, "ingest", "--id", "M", "--text", "Ann is younger than Tom."}).code == 0);

  Service over_http(Config{});
  {
    LiveServer live(over_http);
    auto c = live.client();
    for (const auto& t : fixtures::elder_younger()) post(c, "/teach", teach_body(t), 200);
    post(c, "/articles", {{"id", "N"}, {"text", fixtures::kArticleN}}, 200);
    post(c, "/unteach",
         {{"shape", "SQA"},
          {"s", "Jon is elder than Bill ."},
          {"q", "Who is elder than Bill ?"},
          {"a", "Jon is elder than Bill ."}},
         200);
    post(c, "/articles", {{"id", "M"}, {"text", "Ann is younger than Tom."}}, 200);
  }
  const Service from_cli(Config{.arena_path = arena});
  CHECK(from_cli.state() == over_http.state());
  CHECK(from_cli.answer("Who is elder than Ann ?") == over_http.answer("Who is elder than Ann ?"));
}
