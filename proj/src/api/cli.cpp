#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shmkb/api.hpp"

namespace shmkb {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read " + path);
  return json::parse(in);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::int64_t parse_key(const std::string& text) {
  const auto n = parse_number_word(text);
  if (!n || !std::holds_alternative<std::int64_t>(*n)) throw DomainError("key must be an integer, got " + text);
  return std::get<std::int64_t>(*n);
}

json sample_body(const std::string& shape, const std::vector<std::string>& parts) {
  json body = {{"shape", shape}};
  if (shape == "SQA") {
    if (parts.size() != 3) throw RequestError("SQA takes s | q | a");
    body["s"] = parts[0];
    body["q"] = parts[1];
  } else {
    if (parts.empty()) throw RequestError(shape + " takes conditions and a consequence");
    body["conds"] = std::vector<std::string>(parts.begin(), parts.end() - 1);
  }
  body["a"] = parts.back();
  return body;
}

int print_teach(const json& outcome, std::ostream& out, std::ostream& err) {
  const auto status = outcome["outcome"].get<std::string>();
  if (status == "Rejected") {
    err << "Rejected: " << outcome.value("reason", "") << "\n";
    return 1;
  }
  out << status << (outcome["changed"].get<bool>() ? "" : " (unchanged)") << "\n";
  return 0;
}

void print_answers(const std::vector<Answer>& answers, std::ostream& out) {
  for (const auto& a : answers) out << a.text << "\t" << a.article << "\n";
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw DomainError("bind address must be host:port");
  return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_bar(const std::string& text) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto bar = text.find('|', start);
    out.push_back(trim(text.substr(start, bar - start)));
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

// One line of the interactive loop; false on quit.
bool repl_line(Service& service, const std::string& line, std::ostream& out, std::ostream& err) {
  std::istringstream words(line);
  std::string command;
  words >> command;
  std::string rest;
  std::getline(words, rest);
  rest = trim(rest);
  if (command.empty()) return true;
  if (command == "quit" || command == "exit") return false;
  if (command == "ask") {
    print_answers(service.answer(rest), out);
  } else if (command == "teach" || command == "unteach") {
    std::istringstream r(rest);
    std::string shape;
    r >> shape;
    std::string parts;
    std::getline(r, parts);
    const auto body = sample_body(shape, split_bar(parts));
    if (command == "teach") {
      print_teach(service.teach(body), out, err);
    } else {
      service.unteach(body);
    }
  } else if (command == "ingest") {
    std::istringstream r(rest);
    std::string id;
    r >> id;
    std::string text;
    std::getline(r, text);
    out << service.ingest(id, trim(text))["sentences"].size() << " sentences\n";
  } else if (command == "rules") {
    out << service.rules_text();
  } else if (command == "proposals") {
    out << service.proposals().dump(2) << "\n";
  } else if (command == "article") {
    out << service.article(rest).dump(2) << "\n";
  } else if (command == "confirm") {
    std::istringstream r(rest);
    std::int64_t id = 0;
    std::string verdict;
    r >> id >> verdict;
    service.confirm(id, verdict == "accept" || verdict == "yes");
  } else {
    err << "unknown command " << command
        << " (ask, teach, unteach, ingest, rules, proposals, article, confirm, quit)\n";
  }
  return true;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Relation-graph knowledge base: rules, teaching by example, semantic search"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string arena;
  std::optional<std::size_t> arena_cap;
  std::optional<std::size_t> depth_cap;
  bool enable_spawn = false;
  app.add_option("--config", config_path, "JSON file with Config fields");
  app.add_option("--arena", arena, "arena file (SHMKB_ARENA overrides)");
  app.add_option("--arena-cap", arena_cap, "arena size limit in bytes");
  app.add_option("--depth-cap", depth_cap, "derivation rounds when answering");
  app.add_flag("--enable-spawn", enable_spawn, "allow #Spawn and #SystemR");

  auto* run = app.add_subcommand("run", "translate rule files and fire the entry rules for a key");
  std::vector<std::string> rules;
  std::string key = "0";
  std::string script_path;
  run->add_option("--rules", rules, "rule files")->expected(0, -1);
  run->add_option("--key", key, "key code, octal with a leading 0");
  run->add_option("--script", script_path, "JSON script answering the host callbacks");

  std::string shape = "SQA";
  std::string s_text, q_text, a_text;
  std::vector<std::string> conds;
  auto sample_options = [&](CLI::App* sub) {
    sub->add_option("--shape", shape, "SQA, CondCons or DoubleCondCons");
    sub->add_option("--s", s_text, "sentence");
    sub->add_option("--q", q_text, "question");
    sub->add_option("--a", a_text, "answer or consequence");
    sub->add_option("--cond", conds, "condition (CondCons once, DoubleCondCons twice)");
  };
  auto* teach = app.add_subcommand("teach", "teach one sample");
  sample_options(teach);
  auto* unteach = app.add_subcommand("unteach", "withdraw one sample");
  sample_options(unteach);

  auto* ask = app.add_subcommand("ask", "print each answer and its article");
  std::string question;
  ask->add_option("question", question, "question text")->required();

  auto* ingest = app.add_subcommand("ingest", "store an article");
  std::string article_id;
  std::string text_file;
  std::string text;
  ingest->add_option("--id", article_id, "article key")->required();
  ingest->add_option("--file", text_file, "text file");
  ingest->add_option("--text", text, "article text");

  auto* dump = app.add_subcommand("dump", "print rules, an article, proposals or statistics");
  bool dump_json = false;
  bool dump_proposals = false;
  bool dump_stats = false;
  bool dump_articles = false;
  std::string dump_article;
  dump->add_flag("--rules", "generalized rules (the default)");
  dump->add_flag("--json", dump_json, "rules as JSON");
  dump->add_option("--article", dump_article, "one article");
  dump->add_flag("--articles", dump_articles, "article keys");
  dump->add_flag("--proposals", dump_proposals, "generalization proposals");
  dump->add_flag("--stats", dump_stats, "arena statistics");

  auto* confirm = app.add_subcommand("confirm", "accept or reject a generalization proposal");
  std::int64_t proposal = 0;
  confirm->add_option("--id", proposal, "proposal id")->required();
  auto* accept = confirm->add_flag("--accept", "apply the paradigm union");
  auto* reject = confirm->add_flag("--reject", "block the pair");
  accept->excludes(reject);

  auto* serve = app.add_subcommand("serve", "serve the HTTP API");
  std::string bind;
  serve->add_option("--bind", bind, "host:port");

  auto* repl = app.add_subcommand("repl", "read commands from standard input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Config config = config_path.empty() ? Config{} : Config::from_json(read_json_file(config_path));
    if (!arena.empty()) config.arena_path = arena;
    if (const char* env = std::getenv("SHMKB_ARENA"); env && *env) config.arena_path = env;
    if (arena_cap) config.arena_cap_bytes = *arena_cap;
    if (depth_cap) config.depth_cap = *depth_cap;
    if (enable_spawn) config.enable_spawn = true;
    for (const auto& r : rules) config.rules_paths.emplace_back(r);
    if (!bind.empty()) config.http_bind = bind;

    Service service(config);

    if (*run) {
      const json script = script_path.empty() ? json(nullptr) : read_json_file(script_path);
      const ReturnCode rc = service.run(parse_key(key), script);
      return rc == -1 ? 2 : 0;
    }
    if (*teach || *unteach) {
      std::vector<std::string> parts;
      if (shape == "SQA") {
        parts = {s_text, q_text, a_text};
      } else {
        parts = conds;
        parts.push_back(a_text);
      }
      const auto body = sample_body(shape, parts);
      if (*unteach) {
        service.unteach(body);
        return 0;
      }
      return print_teach(service.teach(body), out, err);
    }
    if (*ask) {
      print_answers(service.answer(question), out);
      return 0;
    }
    if (*ingest) {
      if (!text_file.empty()) text = read_text_file(text_file);
      const auto a = service.ingest(article_id, text);
      out << a["id"].get<std::string>() << ": " << a["sentences"].size() << " sentences\n";
      return 0;
    }
    if (*dump) {
      if (!dump_article.empty()) {
        const auto article = service.article(dump_article);
        for (const auto& s : article["sentences"]) out << s.get<std::string>() << "\n";
      } else if (dump_articles) {
        const auto ids = service.articles();
        for (const auto& id : ids["articles"]) out << id.get<std::string>() << "\n";
      } else if (dump_proposals) {
        out << service.proposals().dump(2) << "\n";
      } else if (dump_stats) {
        out << service.stats().dump(2) << "\n";
      } else if (dump_json) {
        out << service.rules().dump(2) << "\n";
      } else {
        out << service.rules_text();
      }
      return 0;
    }
    if (*confirm) {
      if (!*accept && !*reject) throw RequestError("confirm needs --accept or --reject");
      service.confirm(proposal, static_cast<bool>(*accept));
      return 0;
    }
    if (*serve) {
      const auto [host, port] = split_bind(config.http_bind);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      out << "listening on " << host << ":" << bound << std::endl;
      server.listen();
      return 0;
    }
    if (*repl) {
      std::string line;
      while (std::getline(in, line)) {
        try {
          if (!repl_line(service, line, out, err)) break;
        } catch (const std::exception& e) {
          err << "error: " << e.what() << "\n";
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace shmkb
