#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rafiq/dialog.hpp"
#include "rafiq/flowdsl.hpp"
#include "rafiq/kb.hpp"
#include "rafiq/nlg.hpp"
#include "rafiq/nlu.hpp"
#include "rafiq/payload.hpp"
#include "rafiq/vectors.hpp"

namespace rafiq::engine {

namespace fs = std::filesystem;

struct EngineConfig {
  std::vector<Lang> languages{Lang::en, Lang::ar};
  fs::path kb_dir;
  std::vector<fs::path> flows;
  fs::path intents;
  fs::path templates;
  std::vector<fs::path> gazetteers;
  std::map<Lang, fs::path> stopwords;
  std::optional<fs::path> entity_patterns;
  std::set<std::string> list_entity_types{"symptom"};
  double kb_floor = 0.5;
  double suggest_low = 0.3;
  std::size_t top_n = 5;
  kb::IndexConfig index;
  vectors::ForestParams forest{.seed = 11};
  bool rerank = true;
  long stale_window_days = 14;
  std::optional<fs::path> transcripts_dir;
  std::optional<fs::path> static_dir;
  std::string cors_origin = "*";
  std::optional<kb::Date> today;  // pins the ingest/staleness clock

  /// Relative paths resolve against `base_dir`. Unknown keys and unordered
  /// thresholds raise Error(Config).
  static EngineConfig parse(std::string_view json_text, const fs::path& base_dir);
  static EngineConfig load(const fs::path& path);

  kb::Date effective_today() const { return today.value_or(kb::today_utc()); }
};

// Everything a turn reads. Immutable once built; replaced wholesale on reindex.
struct Snapshot {
  EngineConfig config;
  kb::KnowledgeBase kb;
  kb::KBIndex index;
  nlu::IntentIndex intents;
  nlu::EntityRecognizer recognizer;
  dialog::FlowRegistry flows;
  nlg::TemplateCatalog templates;
  std::optional<vectors::ForestModel> reranker;
  dialog::PolicyConfig policy;  // thresholds plus slot elicitation from the templates
};

/// Loads and cross-checks every configured file. Throws Error(Config) naming
/// the first problem (including any flow diagnostics).
std::shared_ptr<const Snapshot> load_snapshot(const EngineConfig& config);

/// Everything `validate` reports: flow diagnostics plus catalog, template and
/// gazetteer cross-checks. Never throws for content problems.
std::vector<flow::Diagnostic> validate_config(const EngineConfig& config);

// One structured log record per pipeline phase.
using LogSink = std::function<void(const nlohmann::json&)>;

class Engine {
 public:
  explicit Engine(EngineConfig config);
  explicit Engine(std::shared_ptr<const Snapshot> snapshot);

  struct SessionStart {
    std::string session_id;
    ResponsePayload greeting;
  };
  SessionStart start_session(std::optional<Lang> lang);

  /// One user turn: connect, understand (NLU + dialog management), respond
  /// (NLG). Always returns at least one payload. Throws Error(UnknownSession).
  std::vector<ResponsePayload> handle_message(const std::string& session_id, std::string_view text);

  std::optional<dialog::DialogState> session(const std::string& session_id) const;
  std::size_t session_count() const;

  /// Re-reads the KB directory, rebuilds index and reranker, then swaps the
  /// snapshot. Turns already running finish on the old snapshot.
  void reindex();

  std::shared_ptr<const Snapshot> snapshot() const;
  std::vector<kb::StaleEntry> stale(std::optional<long> window_days = std::nullopt) const;

  void set_log_sink(LogSink sink);

 private:
  struct Session {
    std::mutex mutex;
    dialog::DialogState state;
  };

  std::shared_ptr<Session> find_session(const std::string& id) const;
  void log(const nlohmann::json& record) const;
  std::vector<ResponsePayload> run_turn(const Snapshot& snap, dialog::DialogState& state, std::string_view text,
                                        nlohmann::json& understanding) const;
  void write_transcript(const Snapshot& snap, const std::string& session_id, std::string_view text,
                        const std::vector<ResponsePayload>& responses) const;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  mutable std::mutex log_mutex_;
  LogSink log_sink_;
  std::mutex reindex_mutex_;
};

// ---------------------------------------------------------------------------
// scenario replay

struct AttachmentExpectation {
  std::string kind;
  std::string url_contains;

  bool operator==(const AttachmentExpectation&) const = default;
};

// Assertions over the payloads of one turn. Any payload may satisfy each one.
struct Expectation {
  std::optional<PayloadType> type;
  std::vector<std::string> contains;  // text, options, button labels, attachment titles
  std::vector<std::string> options_include;
  std::vector<std::string> buttons_include;
  std::vector<AttachmentExpectation> attachments_include;
  std::optional<Lang> language;                         // every payload
  std::optional<std::vector<ResponsePayload>> payloads;  // exact sequence

  bool empty() const;
  bool operator==(const Expectation&) const = default;
};

struct ScenarioTurn {
  std::string user;
  Expectation expect;

  bool operator==(const ScenarioTurn&) const = default;
};

struct ScenarioScript {
  std::string name;
  std::optional<Lang> language;  // unset: the session starts at the language picker
  std::optional<Expectation> greeting;
  std::vector<ScenarioTurn> turns;

  // Throws SyntaxError or SchemaError (no turns, or a turn without expectations).
  static ScenarioScript parse(std::string_view json_text);
  static ScenarioScript load(const fs::path& path);
  bool operator==(const ScenarioScript&) const = default;
};

nlohmann::json to_json(const Expectation& e);
nlohmann::json to_json(const ScenarioScript& s);

/// First unmet expectation, described; nullopt when all hold.
std::optional<std::string> check_expectation(const Expectation& e, const std::vector<ResponsePayload>& payloads);

struct TurnReport {
  std::string user;  // "<greeting>" for the session start
  bool passed = false;
  std::string failure;
  std::vector<ResponsePayload> responses;
};

struct ScenarioReport {
  std::string name;
  bool passed = false;
  std::vector<TurnReport> turns;
  double elapsed_ms = 0.0;
};

nlohmann::json to_json(const ScenarioReport& r);

/// Replays the script in a fresh session. Failures are report data.
ScenarioReport run_scenario(const ScenarioScript& script, Engine& engine);

}  // namespace rafiq::engine
