#include <mutex>

#include "shmkb/api.hpp"
#include "shmkb/scripted_host.hpp"
#include "shmkb/translate.hpp"

namespace shmkb {

using nlohmann::json;

Config Config::from_json(const json& j) {
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  Config c;
  for (const auto& [key, value] : j.items()) {
    if (key == "arena_path") c.arena_path = value.get<std::string>();
    else if (key == "arena_cap_bytes") c.arena_cap_bytes = value.get<std::size_t>();
    else if (key == "rules_paths") {
      for (const auto& p : value.get<std::vector<std::string>>()) c.rules_paths.emplace_back(p);
    }
    else if (key == "depth_cap") c.depth_cap = value.get<std::size_t>();
    else if (key == "http_bind") c.http_bind = value.get<std::string>();
    else if (key == "enable_spawn") c.enable_spawn = value.get<bool>();
    else throw DomainError("unknown config field " + key);
  }
  return c;
}

void Config::validate() const {
  if (depth_cap < 1) throw DomainError("depth_cap must be at least 1");
  if (arena_cap_bytes == 0) throw DomainError("arena_cap_bytes must be positive");
}

namespace {

std::string text_field(const json& body, const char* name) {
  if (!body.contains(name)) throw RequestError(std::string("missing field \"") + name + "\"");
  if (!body[name].is_string()) throw RequestError(std::string("field \"") + name + "\" must be a string");
  return body[name].get<std::string>();
}

json phrases_json(const Store& store, const std::vector<RelationId>& phrases) {
  json out = json::array();
  for (auto p : phrases) out.push_back(phrase_text(store, p));
  return out;
}

}  // namespace

Sample sample_from_json(Store& store, const json& body) {
  if (!body.is_object()) throw RequestError("request body must be a JSON object");
  const auto shape = parse_shape(text_field(body, "shape"));
  if (!shape) throw RequestError("shape must be SQA, CondCons or DoubleCondCons");
  std::vector<std::string> texts;
  if (*shape == Shape::SentenceQuestion) {
    texts = {text_field(body, "s"), text_field(body, "q")};
  } else {
    if (!body.contains("conds") || !body["conds"].is_array()) throw RequestError("missing array field \"conds\"");
    for (const auto& c : body["conds"]) {
      if (!c.is_string()) throw RequestError("conds must hold strings");
      texts.push_back(c.get<std::string>());
    }
    if (texts.size() + 1 != part_count(*shape)) {
      throw RequestError(to_string(*shape) + " takes " + std::to_string(part_count(*shape) - 1) + " conditions");
    }
  }
  texts.push_back(text_field(body, "a"));
  try {
    return make_sample(store, *shape, texts);
  } catch (const ParseError& e) {
    throw RequestError(e.what());
  }
}

json to_json(const Store& store, const Article& a) {
  json links = json::array();
  for (const auto& l : a.scheme_links) {
    json ids = json::array();
    for (auto r : l) ids.push_back(r.offset());
    links.push_back(ids);
  }
  return {{"id", a.id}, {"sentences", phrases_json(store, a.sentences)}, {"scheme_links", links}};
}

json to_json(const std::vector<Answer>& answers) {
  json out = json::array();
  for (const auto& a : answers) out.push_back({{"text", a.text}, {"article", a.article}});
  return {{"answers", out}};
}

// ---------------------------------------------------------------------------

Service::Service(Config config) : config_(std::move(config)) {
  config_.validate();
  const StoreOptions options{.cap_bytes = config_.arena_cap_bytes};
  const bool existing = !config_.arena_path.empty() && std::filesystem::exists(config_.arena_path);
  store_ = std::make_unique<Store>(existing ? Store::load(config_.arena_path, options) : Store(options));
  if (store_->arena_bytes() > config_.arena_cap_bytes) {
    throw DomainError("arena holds " + std::to_string(store_->arena_bytes()) + " bytes, above the cap");
  }
  kb_ = std::make_unique<KnowledgeBase>(*store_, KnowledgeOptions{.depth_cap = config_.depth_cap});
  if (!existing) persist();
}

template <class F>
auto Service::write(F&& f) {
  if (snapshots_ > 0) throw ConflictError("a snapshot is being written; retry the request");
  std::unique_lock lock(mutex_);
  if constexpr (std::is_void_v<decltype(f())>) {
    f();
    persist();
  } else {
    auto result = f();
    persist();
    return result;
  }
}

void Service::persist() {
  if (!config_.arena_path.empty()) store_->snapshot(config_.arena_path);
}

void Service::snapshot() {
  std::shared_lock lock(mutex_);
  SnapshotGuard guard(*this);
  persist();
}

json Service::teach(const json& body) {
  return write([&] {
    const auto outcome = kb_->teach(sample_from_json(*store_, body));
    json out = {{"outcome", to_string(outcome.status)}, {"changed", outcome.changed}};
    if (outcome.rule) out["rule"] = outcome.rule.offset();
    if (!outcome.reason.empty()) out["reason"] = outcome.reason;
    return out;
  });
}

void Service::unteach(const json& body) {
  write([&] { kb_->unteach(sample_from_json(*store_, body)); });
}

json Service::ingest(const std::string& id, const std::string& text) {
  return write([&] {
    try {
      return to_json(*store_, kb_->ingest_article(id, text));
    } catch (const ParseError& e) {
      throw RequestError(e.what());
    }
  });
}

void Service::confirm(std::int64_t proposal, bool accept) {
  write([&] { kb_->confirm(proposal, accept); });
}

ReturnCode Service::run(std::int64_t key, const json& script) {
  return write([&] {
    std::vector<RelationId> files;
    for (const auto& path : config_.rules_paths) {
      if (auto existing = store_->root(rule_file_root(path.string()))) {
        RelationId file = *existing;
        retranslate_if_modified(*store_, file);
        files.push_back(file);
      } else {
        files.push_back(translate_file(*store_, path));
      }
    }
    Session session(*store_, files, EngineOptions{.enable_spawn = config_.enable_spawn});
    kb_->install(session);
    std::optional<ScriptedHost> host;
    if (!script.is_null()) {
      host.emplace(script);
      host->install(session);
    }
    return session.fire_entry_rules(key);
  });
}

std::vector<Answer> Service::answer(const std::string& question) const {
  std::shared_lock lock(mutex_);
  try {
    return kb_->answer(question);
  } catch (const ParseError& e) {
    throw RequestError(e.what());
  }
}

json Service::article(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto a = kb_->article(id);
  if (!a) throw NotFoundError("no article " + id);
  return to_json(*store_, *a);
}

json Service::articles() const {
  std::shared_lock lock(mutex_);
  return {{"articles", kb_->article_ids()}};
}

json Service::rules() const {
  std::shared_lock lock(mutex_);
  const Store& s = *store_;
  json rules = json::array();
  for (const auto& r : kb_->rules()) {
    json slots = json::array();
    for (const auto& slot : r.slots) slots.push_back(phrases_json(s, slot.values));
    json groups = json::array();
    for (const auto& g : r.groups) {
      json rows = json::array();
      for (const auto& row : g.rows) rows.push_back(phrases_json(s, row));
      groups.push_back({{"slots", g.slots}, {"rows", rows}});
    }
    json samples = json::array();
    for (const auto& sample : r.samples) samples.push_back(phrases_json(s, sample.parts));
    rules.push_back({{"id", r.entry.offset()},
                     {"shape", to_string(r.shape)},
                     {"text", kb_->describe(r)},
                     {"slots", slots},
                     {"groups", groups},
                     {"samples", samples}});
  }
  json refused = json::array();
  for (const auto& sample : kb_->refused_samples()) {
    refused.push_back({{"shape", to_string(sample.shape)}, {"parts", phrases_json(s, sample.parts)}});
  }
  return {{"rules", rules}, {"refused", refused}};
}

std::string Service::rules_text() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& r : kb_->rules()) out += kb_->describe(r);
  return out;
}

json Service::proposals() const {
  std::shared_lock lock(mutex_);
  json out = json::array();
  for (const auto& p : kb_->proposals()) {
    out.push_back({{"id", p.id},
                   {"first", phrases_json(*store_, store_->paradigm_values(p.first))},
                   {"second", phrases_json(*store_, store_->paradigm_values(p.second))},
                   {"status", p.status}});
  }
  return {{"proposals", out}};
}

json Service::stats() const {
  std::shared_lock lock(mutex_);
  const auto st = store_->stats();
  return {{"nodes_per_level", st.nodes_per_level},
          {"elementary", st.elementary},
          {"dead", st.dead},
          {"arena_bytes", st.arena_bytes},
          {"rules", kb_->rules().size()},
          {"refused", kb_->refused_samples().size()},
          {"articles", kb_->article_ids().size()},
          {"proposals", kb_->proposals().size()}};
}

json Service::state() const {
  auto r = rules();
  for (auto& rule : r["rules"]) rule.erase("id");
  json articles = json::array();
  const auto ids = this->articles();
  for (const auto& id : ids["articles"]) {
    auto a = article(id.get<std::string>());
    a.erase("scheme_links");
    articles.push_back(a);
  }
  auto st = stats();
  st.erase("arena_bytes");
  return {{"rules", r}, {"articles", articles}, {"proposals", proposals()}, {"stats", st}};
}

}  // namespace shmkb
