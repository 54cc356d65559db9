#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmkb/engine.hpp"
#include "shmkb/semantics.hpp"

namespace shmkb {

struct Config {
  std::filesystem::path arena_path;  // empty: in memory only
  std::size_t arena_cap_bytes = std::size_t{1} << 32;
  std::vector<std::filesystem::path> rules_paths;
  std::size_t depth_cap = 8;
  std::string http_bind = "127.0.0.1:8080";
  bool enable_spawn = false;

  /// Reads the fields present in a JSON object; unknown fields are errors.
  static Config from_json(const nlohmann::json& j);
  void validate() const;
};

/// Request decoding shared by the CLI and the HTTP server. Throws
/// RequestError on a malformed body.
Sample sample_from_json(Store& store, const nlohmann::json& body);
nlohmann::json to_json(const Store& store, const Article& article);
nlohmann::json to_json(const std::vector<Answer>& answers);

/// The arena, its knowledge base and the rule files, behind a single
/// writer lock. Every write is persisted to the arena file before it
/// returns; readers run in parallel.
class Service {
 public:
  explicit Service(Config config);

  const Config& config() const { return config_; }

  // writes
  nlohmann::json teach(const nlohmann::json& body);  // {"outcome", ...}
  void unteach(const nlohmann::json& body);
  nlohmann::json ingest(const std::string& id, const std::string& text);
  void confirm(std::int64_t proposal, bool accept);
  /// Translates the rule files and fires the entry rules for `key`, with the
  /// semantic host functions and an optional ScriptedHost script installed.
  ReturnCode run(std::int64_t key, const nlohmann::json& script = nullptr);
  /// Writes the arena file; concurrent writes fail with ConflictError.
  void snapshot();

  // reads
  std::vector<Answer> answer(const std::string& question) const;
  nlohmann::json article(const std::string& id) const;  // NotFoundError
  nlohmann::json articles() const;
  nlohmann::json rules() const;
  std::string rules_text() const;
  nlohmann::json proposals() const;
  nlohmann::json stats() const;
  /// Everything a client can observe, for comparing two services.
  nlohmann::json state() const;

  /// Marks a snapshot as running for the guard's lifetime.
  class SnapshotGuard {
   public:
    explicit SnapshotGuard(Service& s) : s_(s) { ++s_.snapshots_; }
    ~SnapshotGuard() { --s_.snapshots_; }
    SnapshotGuard(const SnapshotGuard&) = delete;
    SnapshotGuard& operator=(const SnapshotGuard&) = delete;

   private:
    Service& s_;
  };

 private:
  template <class F>
  auto write(F&& f);
  void persist();

  Config config_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<KnowledgeBase> kb_;
  mutable std::shared_mutex mutex_;
  std::atomic<int> snapshots_{0};
};

/// Command line front end: run, teach, unteach, ask, ingest, dump, confirm,
/// serve and repl. Returns the process exit code: 0 on success, 2 when
/// `run` ends with -1, 1 on any error (reported on `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

/// JSON-over-HTTP front end of a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  /// Returns the bound port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called from another thread.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shmkb
