// rafiq: chat REPL, flow validation, corpus ingestion, staleness, scenario
// replay and the HTTP service, behind one subcommand-style binary.

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rafiq/engine.hpp"
#include "rafiq/kb.hpp"
#include "rafiq/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rafiq;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;
constexpr int kConfig = 3;

// Config and IO problems exit 3; content the user asked us to check exits 1.
int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::Io:
    case ErrorCode::EmptyKB:
    case ErrorCode::EmptyIndex:
    case ErrorCode::EmptyCatalog:
      return kConfig;
    default:
      return kFailed;
  }
}

int report_error(const Error& e, bool as_json) {
  if (as_json) {
    std::cout << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << "\n";
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
  return exit_code_for(e);
}

std::optional<kb::Date> parse_today(const std::string& s) {
  if (s.empty()) return std::nullopt;
  auto d = kb::parse_date(s);
  if (!d) throw Error(ErrorCode::Config, "--today must be YYYY-MM-DD, got '" + s + "'");
  return d;
}

// ---------------------------------------------------------------------------
// chat

std::string render_payload(const ResponsePayload& p) {
  std::string out = p.text;
  for (std::size_t i = 0; i < p.options.size(); ++i) {
    out += "\n  " + std::to_string(i + 1) + ". " + p.options[i];
  }
  for (const auto& b : p.buttons) {
    out += "\n  [" + b.label + "](" + (b.url.empty() ? "postback:" + b.postback : b.url) + ")";
  }
  for (const auto& a : p.attachments) out += "\n  <" + a.kind + ": " + a.title + "> " + a.url;
  return out;
}

// Options of the most recent payload that offered any.
std::vector<std::string> last_options(const std::vector<ResponsePayload>& payloads) {
  for (auto it = payloads.rbegin(); it != payloads.rend(); ++it) {
    if (!it->options.empty()) return it->options;
  }
  return {};
}

json exact(const std::vector<ResponsePayload>& payloads) {
  json arr = json::array();
  for (const auto& p : payloads) arr.push_back(to_json(p));
  return json{{"payloads", arr}};
}

struct ChatArgs {
  std::string config;
  std::string lang;
  std::string transcript;
  bool as_json = false;
};

int run_chat(const ChatArgs& args) {
  std::optional<Lang> lang;
  if (!args.lang.empty()) lang = parse_lang(args.lang);
  auto config = engine::EngineConfig::load(args.config);
  engine::Engine eng(config);
  auto start = eng.start_session(lang);

  auto emit = [&](const std::vector<ResponsePayload>& payloads) {
    for (const auto& p : payloads) {
      if (args.as_json) {
        std::cout << to_json(p).dump() << "\n";
      } else {
        std::cout << "bot> " << render_payload(p) << "\n";
      }
    }
    std::cout.flush();
  };

  json script{{"name", "chat " + start.session_id},
              {"language", lang ? json(std::string(to_string(*lang))) : json(nullptr)},
              {"greeting", exact({start.greeting})},
              {"turns", json::array()}};
  std::vector<ResponsePayload> last{start.greeting};
  emit(last);

  std::string line;
  while (true) {
    if (!args.as_json) std::cout << "you> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    // A bare number picks that option, sending its exact text.
    const auto options = last_options(last);
    if (line.find_first_not_of("0123456789") == std::string::npos && line.size() < 4) {
      const auto n = std::stoul(line);
      if (n >= 1 && n <= options.size()) line = options[n - 1];
    }
    last = eng.handle_message(start.session_id, line);
    emit(last);
    script["turns"].push_back(json{{"user", line}, {"expect", exact(last)}});
  }
  if (!args.as_json) std::cout << "\n";

  if (script["turns"].empty()) {
    std::cerr << "no turns; transcript not written\n";
    return kOk;
  }
  fs::path out = args.transcript;
  if (out.empty()) {
    const fs::path dir = config.transcripts_dir.value_or(fs::current_path());
    out = dir / ("chat-" + start.session_id + ".scenario.json");
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write transcript " + out.string());
  f << script.dump(2) << "\n";
  if (args.as_json) {
    std::cout << json{{"transcript", out.string()}}.dump() << "\n";
  } else {
    std::cerr << "transcript: " << out.string() << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// validate

int run_validate(const std::string& config_path, bool as_json) {
  const auto config = engine::EngineConfig::load(config_path);
  const auto diagnostics = engine::validate_config(config);
  if (as_json) {
    json arr = json::array();
    for (const auto& d : diagnostics) arr.push_back(flow::to_json(d));
    std::cout << json{{"diagnostics", arr}, {"count", diagnostics.size()}}.dump(2) << "\n";
  } else {
    for (const auto& d : diagnostics) {
      std::cout << d.flow_id << ":" << d.step_id << ": " << d.code << ": " << d.message << "\n";
    }
    std::cout << diagnostics.size() << " diagnostic" << (diagnostics.size() == 1 ? "" : "s") << "\n";
  }
  return static_cast<int>(std::min<std::size_t>(diagnostics.size(), 125));
}

// ---------------------------------------------------------------------------
// ingest / stale

struct IngestArgs {
  std::string kb_dir;
  std::vector<std::string> files;
  std::string today;
  bool as_json = false;
};

int run_ingest(const IngestArgs& args) {
  const fs::path dir = args.kb_dir;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "KB directory not found: " + dir.string());
  const kb::Date today = parse_today(args.today).value_or(kb::today_utc());

  std::set<std::string> incoming_names;
  for (const auto& f : args.files) incoming_names.insert(fs::path(f).filename().string());

  // The store as it will be after copying: existing files minus the ones replaced.
  kb::KnowledgeBase store;
  std::vector<fs::path> existing;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.is_regular_file() && kb::format_for_path(item.path()) &&
        !incoming_names.contains(item.path().filename().string())) {
      existing.push_back(item.path());
    }
  }
  std::sort(existing.begin(), existing.end());
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& p : existing) {
    store.merge(kb::ingest_source(read(p), *kb::format_for_path(p), today, p.filename().string()));
  }

  json per_file = json::array();
  std::size_t total = 0;
  std::vector<std::pair<fs::path, std::string>> accepted;
  for (const auto& f : args.files) {
    const fs::path p = f;
    const auto format = kb::format_for_path(p);
    if (!format) throw Error(ErrorCode::ParseError, p.string() + ": expected a .jsonl or .md file");
    std::string content = read(p);
    std::vector<kb::KBEntry> entries;
    try {
      entries = kb::ingest_source(content, *format, today, p.filename().string());
      store.merge(entries);
    } catch (const Error& e) {
      throw Error(e.code(), p.filename().string() + ": " + e.what());
    }
    per_file.push_back(json{{"file", p.filename().string()}, {"entries", entries.size()}});
    total += entries.size();
    accepted.emplace_back(dir / p.filename(), std::move(content));
  }
  // Everything parsed and merged; only now touch the directory.
  for (const auto& [target, content] : accepted) {
    std::ofstream out(target, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + target.string());
    out << content;
  }
  if (args.as_json) {
    std::cout << json{{"files", per_file}, {"entries", total}, {"kb_entries", store.size()}}.dump(2) << "\n";
  } else {
    std::cout << "ingested " << total << " entries (" << store.size() << " in " << dir.string() << ")\n";
  }
  return kOk;
}

struct StaleArgs {
  std::string config;
  std::string kb_dir;
  std::optional<long> window_days;
  std::string today;
  bool as_json = false;
};

int run_stale(const StaleArgs& args) {
  fs::path dir = args.kb_dir;
  long window = 14;
  std::optional<kb::Date> today = parse_today(args.today);
  if (!args.config.empty()) {
    const auto config = engine::EngineConfig::load(args.config);
    if (dir.empty()) dir = config.kb_dir;
    window = config.stale_window_days;
    if (!today) today = config.today;
  }
  if (dir.empty()) throw Error(ErrorCode::Config, "stale needs --config or --kb");
  if (args.window_days) window = *args.window_days;
  const kb::Date now = today.value_or(kb::today_utc());
  const auto store = kb::KnowledgeBase::load_dir(dir, now);
  const auto report = kb::staleness_report(store.entries(), now, window);
  if (args.as_json) {
    json arr = json::array();
    for (const auto& s : report) arr.push_back(json{{"id", s.id}, {"age_days", s.age_days}});
    std::cout << json{{"window_days", window}, {"today", kb::format_date(now)}, {"entries", arr}}.dump(2) << "\n";
  } else {
    for (const auto& s : report) std::cout << s.id << "\t" << s.age_days << " days\n";
    std::cout << report.size() << " stale of " << store.size() << " entries (window " << window << " days)\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// scenario run

int run_scenarios(const std::string& config_path, const std::vector<std::string>& files, bool as_json) {
  const auto config = engine::EngineConfig::load(config_path);
  engine::Engine eng(config);
  bool all = true;
  json reports = json::array();
  for (const auto& f : files) {
    const auto script = engine::ScenarioScript::load(f);
    const auto report = engine::run_scenario(script, eng);
    all = all && report.passed;
    if (as_json) {
      json r = engine::to_json(report);
      r["file"] = f;
      reports.push_back(std::move(r));
      continue;
    }
    std::cout << (report.passed ? "PASS" : "FAIL") << "  " << report.name << " (" << f << ", "
              << report.turns.size() << " turns, " << report.elapsed_ms << " ms)\n";
    for (const auto& t : report.turns) {
      if (!t.passed) std::cout << "      turn \"" << t.user << "\": " << t.failure << "\n";
    }
  }
  if (as_json) std::cout << json{{"passed", all}, {"scenarios", reports}}.dump(2) << "\n";
  return all ? kOk : kFailed;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  std::string config;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool quiet = false;
  bool as_json = false;
};

int run_serve(const ServeArgs& args) {
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto config = engine::EngineConfig::load(args.config);
  auto eng = std::make_shared<engine::Engine>(config);
  if (!args.quiet) {
    eng->set_log_sink([](const json& record) { std::cerr << record.dump() << "\n"; });
  }
  server::Server srv(server::ServerOptions{config.cors_origin, config.static_dir});
  srv.set_engine(eng);
  if (!srv.bind(args.host, args.port)) {
    std::cerr << "error: cannot listen on " << args.host << ":" << args.port << " (port in use or not permitted)\n";
    return kConfig;
  }
  std::thread worker([&] { srv.listen(); });
  srv.wait_until_ready();
  if (args.as_json) {
    std::cout << json{{"listening", args.host + ":" + std::to_string(args.port)}}.dump() << std::endl;
  } else {
    std::cout << "listening on http://" << args.host << ":" << args.port << std::endl;
  }
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "signal " << sig << ": draining\n";
  srv.stop();
  worker.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual retrieval chatbot engine"};
  app.require_subcommand(1);
  bool as_json = false;

  ChatArgs chat;
  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat; numbers pick options, Ctrl-D saves a scenario");
  chat_cmd->add_option("--config", chat.config, "Engine config JSON")->required()->check(CLI::ExistingFile);
  chat_cmd->add_option("--lang", chat.lang, "Session language")->check(CLI::IsMember({"en", "ar"}));
  chat_cmd->add_option("--transcript", chat.transcript, "Where to write the transcript scenario");
  chat_cmd->add_flag("--json", chat.as_json, "Print payloads as JSON lines");

  std::string validate_config;
  auto* validate_cmd = app.add_subcommand("validate", "Check flows, catalogs and templates; exit code = diagnostics");
  validate_cmd->add_option("--config", validate_config, "Engine config JSON")->required()->check(CLI::ExistingFile);
  validate_cmd->add_flag("--json", as_json, "JSON output");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Add .jsonl or .md corpus files to a KB directory");
  ingest_cmd->add_option("--kb", ingest.kb_dir, "KB directory")->required();
  ingest_cmd->add_option("files", ingest.files, "Corpus files")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--today", ingest.today, "Date bounding 'updated' (YYYY-MM-DD)");
  ingest_cmd->add_flag("--json", ingest.as_json, "JSON output");

  StaleArgs stale;
  auto* stale_cmd = app.add_subcommand("stale", "List entries not updated within the window");
  stale_cmd->add_option("--config", stale.config, "Engine config JSON")->check(CLI::ExistingFile);
  stale_cmd->add_option("--kb", stale.kb_dir, "KB directory (overrides the config)");
  stale_cmd->add_option("--window-days", stale.window_days, "Window in days")->check(CLI::NonNegativeNumber);
  stale_cmd->add_option("--today", stale.today, "Reference date (YYYY-MM-DD)");
  stale_cmd->add_flag("--json", stale.as_json, "JSON output");

  std::string scenario_config;
  std::vector<std::string> scenario_files;
  bool scenario_json = false;
  auto* scenario_cmd = app.add_subcommand("scenario", "Scenario replay");
  scenario_cmd->require_subcommand(1);
  auto* run_cmd = scenario_cmd->add_subcommand("run", "Replay scenario files; exit 0 iff all pass");
  run_cmd->add_option("--config", scenario_config, "Engine config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("files", scenario_files, "Scenario files")->required()->check(CLI::ExistingFile);
  run_cmd->add_flag("--json", scenario_json, "JSON report");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP chat API");
  serve_cmd->add_option("--config", serve.config, "Engine config JSON")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_flag("--quiet", serve.quiet, "No per-turn logs on stderr");
  serve_cmd->add_flag("--json", serve.as_json, "JSON startup line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  bool json_out = as_json;
  try {
    if (*chat_cmd) {
      json_out = chat.as_json;
      return run_chat(chat);
    }
    if (*validate_cmd) return run_validate(validate_config, as_json);
    if (*ingest_cmd) {
      json_out = ingest.as_json;
      return run_ingest(ingest);
    }
    if (*stale_cmd) {
      json_out = stale.as_json;
      return run_stale(stale);
    }
    if (*run_cmd) {
      json_out = scenario_json;
      return run_scenarios(scenario_config, scenario_files, scenario_json);
    }
    if (*serve_cmd) {
      json_out = serve.as_json;
      return run_serve(serve);
    }
  } catch (const Error& e) {
    return report_error(e, json_out);
  } catch (const std::exception& e) {
    return report_error(Error(ErrorCode::Io, e.what()), json_out);
  }
  return kUsage;
}
