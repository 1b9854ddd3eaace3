#include "rafiq/engine.hpp"

#include <algorithm>
#include <fstream>

#include "json_util.hpp"
#include "rafiq/text.hpp"

namespace rafiq::engine {

using nlohmann::json;

// ---------------------------------------------------------------------------
// configuration

namespace {

fs::path resolve(const fs::path& base, const json& j, const std::string& key) {
  if (!j.is_string() || j.get<std::string>().empty()) {
    throw Error(ErrorCode::Config, "config: '" + key + "' must be a non-empty path string");
  }
  fs::path p = j.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

std::vector<fs::path> resolve_list(const fs::path& base, const json& j, const std::string& key) {
  if (j.is_string()) return {resolve(base, j, key)};
  if (!j.is_array()) throw Error(ErrorCode::Config, "config: '" + key + "' must be a path or a list of paths");
  std::vector<fs::path> out;
  for (const auto& item : j) out.push_back(resolve(base, item, key));
  return out;
}

template <typename T>
T number(const json& j, const std::string& key) {
  if (!j.is_number()) throw Error(ErrorCode::Config, "config: '" + key + "' must be a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) throw Error(ErrorCode::Config, "config: '" + key + "' must be a non-negative integer");
  }
  return j.get<T>();
}

}  // namespace

EngineConfig EngineConfig::parse(std::string_view json_text, const fs::path& base_dir) {
  const json root = detail::parse_json(json_text, "config", ErrorCode::Config);
  detail::reject_unknown(root,
                         {"languages", "kb_dir", "flows", "intents", "templates", "gazetteers", "stopwords",
                          "entity_patterns", "list_entity_types", "thresholds", "top_n", "index", "forest", "rerank",
                          "staleness_window_days", "transcripts_dir", "static_dir", "cors_origin", "today"},
                         "config", ErrorCode::Config);
  EngineConfig c;
  auto required = [&](const char* key) -> const json& {
    if (!root.contains(key)) throw Error(ErrorCode::Config, std::string("config: missing '") + key + "'");
    return root[key];
  };
  if (root.contains("languages")) {
    c.languages.clear();
    for (const auto& l : detail::string_list(root["languages"], "config: languages", ErrorCode::Config)) {
      const auto lang = parse_lang(l);
      if (!lang) throw Error(ErrorCode::Config, "config: unsupported language '" + l + "'");
      if (std::find(c.languages.begin(), c.languages.end(), *lang) == c.languages.end()) c.languages.push_back(*lang);
    }
    if (c.languages.empty()) throw Error(ErrorCode::Config, "config: 'languages' is empty");
  }
  c.kb_dir = resolve(base_dir, required("kb_dir"), "kb_dir");
  c.flows = resolve_list(base_dir, required("flows"), "flows");
  c.intents = resolve(base_dir, required("intents"), "intents");
  c.templates = resolve(base_dir, required("templates"), "templates");
  if (root.contains("gazetteers")) c.gazetteers = resolve_list(base_dir, root["gazetteers"], "gazetteers");
  if (root.contains("stopwords")) {
    detail::require_object(root["stopwords"], "config: stopwords", ErrorCode::Config);
    for (const auto& [key, value] : root["stopwords"].items()) {
      const auto lang = parse_lang(key);
      if (!lang) throw Error(ErrorCode::Config, "config: stopwords for unsupported language '" + key + "'");
      c.stopwords[*lang] = resolve(base_dir, value, "stopwords." + key);
    }
  }
  if (root.contains("entity_patterns")) c.entity_patterns = resolve(base_dir, root["entity_patterns"], "entity_patterns");
  if (root.contains("list_entity_types")) {
    const auto list = detail::string_list(root["list_entity_types"], "config: list_entity_types", ErrorCode::Config);
    c.list_entity_types = {list.begin(), list.end()};
  }
  if (root.contains("thresholds")) {
    const json& t = root["thresholds"];
    detail::reject_unknown(t, {"kb_floor", "suggest_low"}, "config: thresholds", ErrorCode::Config);
    if (t.contains("kb_floor")) c.kb_floor = number<double>(t["kb_floor"], "thresholds.kb_floor");
    if (t.contains("suggest_low")) c.suggest_low = number<double>(t["suggest_low"], "thresholds.suggest_low");
  }
  if (!(0.0 < c.suggest_low && c.suggest_low < c.kb_floor && c.kb_floor <= 1.0)) {
    throw Error(ErrorCode::Config, "config: thresholds must satisfy 0 < suggest_low < kb_floor <= 1");
  }
  if (root.contains("top_n")) c.top_n = number<std::size_t>(root["top_n"], "top_n");
  if (c.top_n == 0) throw Error(ErrorCode::Config, "config: 'top_n' must be at least 1");
  if (root.contains("index")) {
    const json& ix = root["index"];
    detail::reject_unknown(ix, {"cluster_min", "seed", "max_iter"}, "config: index", ErrorCode::Config);
    if (ix.contains("cluster_min")) c.index.cluster_min = number<std::size_t>(ix["cluster_min"], "index.cluster_min");
    if (ix.contains("seed")) c.index.seed = number<std::uint64_t>(ix["seed"], "index.seed");
    if (ix.contains("max_iter")) c.index.max_iter = number<std::size_t>(ix["max_iter"], "index.max_iter");
  }
  if (root.contains("forest")) {
    const json& f = root["forest"];
    detail::reject_unknown(f, {"trees", "max_depth", "min_leaf", "seed", "feature_subset"}, "config: forest",
                           ErrorCode::Config);
    if (f.contains("trees")) c.forest.tree_count = number<std::size_t>(f["trees"], "forest.trees");
    if (f.contains("max_depth")) c.forest.max_depth = number<std::size_t>(f["max_depth"], "forest.max_depth");
    if (f.contains("min_leaf")) c.forest.min_leaf = number<std::size_t>(f["min_leaf"], "forest.min_leaf");
    if (f.contains("seed")) c.forest.seed = number<std::uint64_t>(f["seed"], "forest.seed");
    if (f.contains("feature_subset")) {
      c.forest.feature_subset = number<std::size_t>(f["feature_subset"], "forest.feature_subset");
    }
  }
  if (root.contains("rerank")) {
    if (!root["rerank"].is_boolean()) throw Error(ErrorCode::Config, "config: 'rerank' must be a boolean");
    c.rerank = root["rerank"].get<bool>();
  }
  if (root.contains("staleness_window_days")) {
    c.stale_window_days = number<long>(root["staleness_window_days"], "staleness_window_days");
    if (c.stale_window_days < 0) throw Error(ErrorCode::Config, "config: 'staleness_window_days' must be >= 0");
  }
  if (root.contains("transcripts_dir") && !root["transcripts_dir"].is_null()) {
    c.transcripts_dir = resolve(base_dir, root["transcripts_dir"], "transcripts_dir");
  }
  if (root.contains("static_dir") && !root["static_dir"].is_null()) {
    c.static_dir = resolve(base_dir, root["static_dir"], "static_dir");
  }
  if (root.contains("cors_origin")) {
    c.cors_origin = detail::string_field(root, "cors_origin", "config", false, ErrorCode::Config);
  }
  if (root.contains("today") && !root["today"].is_null()) {
    const auto s = detail::string_field(root, "today", "config", false, ErrorCode::Config);
    c.today = kb::parse_date(s);
    if (!c.today) throw Error(ErrorCode::Config, "config: 'today' is not a YYYY-MM-DD date");
  }
  return c;
}

EngineConfig EngineConfig::load(const fs::path& path) {
  std::string content;
  try {
    content = detail::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  return parse(content, fs::absolute(path).parent_path());
}

namespace {

dialog::PolicyConfig policy_for(const EngineConfig& config, const nlg::TemplateCatalog& templates) {
  dialog::PolicyConfig p;
  p.kb_floor = config.kb_floor;
  p.suggest_low = config.suggest_low;
  p.top_n = config.top_n;
  p.list_entity_types = config.list_entity_types;
  p.elicitation = nlg::slot_elicitation(templates);
  return p;
}

}  // namespace

namespace {

std::vector<fs::path> flow_files(const std::vector<fs::path>& entries) {
  std::vector<fs::path> out;
  for (const auto& p : entries) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& de : fs::directory_iterator(p)) {
        const auto name = de.path().filename().string();
        if (de.is_regular_file() && name.size() > 10 && name.ends_with(".flow.json")) found.push_back(de.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

text::TextPipeline load_pipeline(const EngineConfig& c) {
  std::map<Lang, text::StopwordList> lists;
  for (const auto& [lang, path] : c.stopwords) lists[lang] = text::StopwordList::load(lang, path);
  return text::TextPipeline(std::move(lists));
}

nlu::PatternSet load_patterns(const fs::path& path) {
  const json root = detail::parse_json(detail::read_file(path), path.filename().string());
  detail::require_object(root, path.filename().string());
  nlu::PatternSet out;
  for (const auto& [type, list] : root.items()) out[type] = detail::string_list(list, "entity pattern '" + type + "'");
  return out;
}

nlu::Gazetteer load_gazetteers(const std::vector<fs::path>& paths) {
  nlu::Gazetteer merged;
  for (const auto& p : paths) {
    for (auto& [type, values] : nlu::load_gazetteer(p)) {
      for (auto& [canonical, aliases] : values) {
        auto& dest = merged[type][canonical];
        dest.insert(dest.end(), aliases.begin(), aliases.end());
      }
    }
  }
  return merged;
}

// Template checks shared by validate_config and load_snapshot.
void check_templates(const nlg::TemplateCatalog& templates, const std::vector<Lang>& languages,
                     std::vector<flow::Diagnostic>& out) {
  for (auto id : nlg::kSystemTemplates) {
    if (templates.find(id) == nullptr) {
      out.push_back({"templates", std::string(id), "UnknownTemplate", "required template '" + std::string(id) + "' is missing"});
    }
  }
  for (const auto& id : templates.ids()) {
    const nlg::Template* t = templates.find(id);
    for (Lang lang : languages) {
      if (!t->text.contains(lang)) {
        out.push_back({"templates", id, "MissingLanguage", "no '" + std::string(to_string(lang)) + "' text"});
      }
    }
  }
}

std::vector<flow::FlowDocument> read_flow_documents(const EngineConfig& c) {
  std::vector<flow::FlowDocument> docs;
  for (const auto& p : flow_files(c.flows)) docs.push_back({p.filename().string(), detail::read_file(p)});
  return docs;
}

}  // namespace

std::vector<flow::Diagnostic> validate_config(const EngineConfig& c) {
  std::vector<flow::Diagnostic> out;
  auto attempt = [&](const std::string& resource, auto&& fn) {
    try {
      fn();
      return true;
    } catch (const Error& e) {
      out.push_back({resource, "-", std::string(to_string(e.code())), e.what()});
      return false;
    }
  };

  nlu::IntentCatalog catalog;
  const bool have_catalog = attempt("intents", [&] { catalog = nlu::IntentCatalog::load(c.intents); });
  nlg::TemplateCatalog templates;
  const bool have_templates = attempt("templates", [&] { templates = nlg::TemplateCatalog::load(c.templates); });
  if (have_templates) check_templates(templates, c.languages, out);
  attempt("gazetteers", [&] { load_gazetteers(c.gazetteers); });
  if (c.entity_patterns) {
    attempt("entity_patterns", [&] { nlu::EntityRecognizer({}, load_patterns(*c.entity_patterns)); });
  }
  attempt("stopwords", [&] { load_pipeline(c); });

  if (have_catalog) {
    for (const auto& intent : catalog.intents) {
      for (Lang lang : c.languages) {
        auto it = intent.triggers.find(lang);
        if (it == intent.triggers.end() || it->second.empty()) {
          out.push_back({"intents", intent.name, "MissingLanguage",
                         "no '" + std::string(to_string(lang)) + "' trigger phrases"});
        }
      }
    }
  }

  std::vector<flow::FlowDocument> docs;
  if (attempt("flows", [&] { docs = read_flow_documents(c); }) && have_catalog) {
    auto diags = flow::validate_documents(docs, catalog, have_templates ? templates.ids() : std::set<std::string>{},
                                          c.languages);
    if (!have_templates) {
      std::erase_if(diags, [](const flow::Diagnostic& d) { return d.code == "UnknownTemplate"; });
    }
    out.insert(out.end(), diags.begin(), diags.end());
  }

  attempt("kb", [&] {
    const auto base = kb::KnowledgeBase::load_dir(c.kb_dir, c.effective_today());
    for (Lang lang : c.languages) {
      if (std::none_of(base.entries().begin(), base.entries().end(), [&](const kb::KBEntry& e) { return e.lang == lang; })) {
        out.push_back({"kb", "-", "EmptyKB", "no entries in '" + std::string(to_string(lang)) + "'"});
      }
    }
    if (!have_templates) return;
    for (const auto& e : base.entries()) {
      if (!e.answer_template.empty() && templates.find(e.answer_template) == nullptr) {
        out.push_back({"kb", e.id, "UnknownTemplate", "answer template '" + e.answer_template + "' is not in the catalog"});
      }
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::shared_ptr<const Snapshot> build_snapshot(const EngineConfig& c, kb::KnowledgeBase base,
                                               nlu::IntentIndex intents, nlu::EntityRecognizer recognizer,
                                               dialog::FlowRegistry flows, nlg::TemplateCatalog templates) {
  kb::KBIndex index = kb::rebuild_index(base.entries(), c.index, intents.pipeline(), c.languages);
  std::optional<vectors::ForestModel> reranker;
  if (c.rerank) reranker = nlu::train_reranker(index, c.forest, c.top_n);
  auto policy = policy_for(c, templates);
  return std::make_shared<const Snapshot>(Snapshot{c, std::move(base), std::move(index), std::move(intents),
                                                   std::move(recognizer), std::move(flows), std::move(templates),
                                                   std::move(reranker), std::move(policy)});
}

}  // namespace

std::shared_ptr<const Snapshot> load_snapshot(const EngineConfig& c) {
  try {
    auto diags = validate_config(c);
    if (!diags.empty()) {
      std::string msg = std::to_string(diags.size()) + " configuration problem(s); first: " + diags.front().flow_id +
                        "/" + diags.front().step_id + " " + diags.front().code + ": " + diags.front().message;
      throw Error(ErrorCode::Config, msg);
    }
    auto pipeline = load_pipeline(c);
    nlu::IntentIndex intents(nlu::IntentCatalog::load(c.intents), pipeline);
    nlu::PatternSet patterns;
    if (c.entity_patterns) patterns = load_patterns(*c.entity_patterns);
    nlu::EntityRecognizer recognizer(load_gazetteers(c.gazetteers), patterns);
    std::vector<flow::DialogFlow> flows;
    for (const auto& doc : read_flow_documents(c)) flows.push_back(flow::parse_flow(doc.content));
    return build_snapshot(c, kb::KnowledgeBase::load_dir(c.kb_dir, c.effective_today()), std::move(intents),
                          std::move(recognizer), dialog::FlowRegistry(std::move(flows)),
                          nlg::TemplateCatalog::load(c.templates));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    throw Error(ErrorCode::Config, e.what());
  }
}

// ---------------------------------------------------------------------------
// engine

Engine::Engine(EngineConfig config) : snapshot_(load_snapshot(config)) {}

Engine::Engine(std::shared_ptr<const Snapshot> snapshot) : snapshot_(std::move(snapshot)) {}

std::shared_ptr<const Snapshot> Engine::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Engine::set_log_sink(LogSink sink) {
  std::lock_guard lock(log_mutex_);
  log_sink_ = std::move(sink);
}

void Engine::log(const json& record) const {
  std::lock_guard lock(log_mutex_);
  if (log_sink_) log_sink_(record);
}

Engine::SessionStart Engine::start_session(std::optional<Lang> lang) {
  const auto snap = snapshot();
  auto session = std::make_shared<Session>();
  session->state = dialog::start_session(lang);
  SessionStart out{session->state.session_id, nlg::welcome(snap->templates, lang)};
  std::lock_guard lock(sessions_mutex_);
  sessions_.emplace(out.session_id, std::move(session));
  return out;
}

std::shared_ptr<Engine::Session> Engine::find_session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::optional<dialog::DialogState> Engine::session(const std::string& session_id) const {
  auto s = find_session(session_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  return s->state;
}

std::size_t Engine::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

std::vector<ResponsePayload> Engine::run_turn(const Snapshot& snap, dialog::DialogState& state, std::string_view text,
                                              json& understanding) const {
  if (!state.lang) {
    ++state.turn_count;
    const auto choice = nlg::language_choice(text);
    understanding["language_choice"] = choice ? json(std::string(to_string(*choice))) : json(nullptr);
    if (choice) state.lang = *choice;
    return {nlg::welcome(snap.templates, state.lang)};
  }
  const Lang lang = *state.lang;
  const auto tokens = text::tokenize(text, lang);
  const auto terms = snap.index.pipeline.terms(text, lang);
  const auto prediction = nlu::classify_intent(terms, snap.intents, lang);
  const auto entities = nlu::recognize_entities(tokens, snap.recognizer, lang);
  std::vector<nlu::CandidateResponse> candidates;
  if (const kb::LangIndex* li = snap.index.lang(lang)) {
    candidates = nlu::retrieve_candidates(vectors::vectorize(terms, li->vectorizer), snap.index, lang, snap.config.top_n);
  }

  understanding["intent"] = prediction.intent ? json(*prediction.intent) : json(nullptr);
  understanding["score"] = prediction.score;
  understanding["entities"] = json::array();
  for (const auto& e : entities) understanding["entities"].push_back(json{{"type", e.type}, {"value", e.value}});
  understanding["candidates"] = json::array();
  for (const auto& c : candidates) {
    understanding["candidates"].push_back(json{{"entry", c.entry_id}, {"score", c.retrieval_score}});
  }

  const auto& policy = snap.policy;
  const dialog::Utterance utterance{state.session_id, std::string(text), lang};
  const auto tracked = dialog::track(state, prediction, entities, utterance, snap.flows, policy);
  const dialog::PolicyContext ctx{snap.flows, snap.index, snap.reranker ? &*snap.reranker : nullptr, policy};
  auto decision = dialog::decide(tracked, candidates, text, ctx);

  understanding["actions"] = json::array();
  for (const auto& a : decision.actions) understanding["actions"].push_back(dialog::to_json(a));

  const nlg::RenderContext render_ctx{snap.templates, snap.flows, snap.index};
  std::vector<ResponsePayload> out;
  for (const auto& a : decision.actions) out.push_back(nlg::render(a, decision.state, render_ctx));
  state = std::move(decision.state);
  return out;
}

void Engine::write_transcript(const Snapshot& snap, const std::string& session_id, std::string_view text,
                              const std::vector<ResponsePayload>& responses) const {
  if (!snap.config.transcripts_dir) return;
  std::error_code ec;
  fs::create_directories(*snap.config.transcripts_dir, ec);
  std::ofstream out(*snap.config.transcripts_dir / (session_id + ".jsonl"), std::ios::app | std::ios::binary);
  json line{{"user", std::string(text)}, {"responses", json::array()}};
  for (const auto& p : responses) line["responses"].push_back(to_json(p));
  out << line.dump() << '\n';
}

std::vector<ResponsePayload> Engine::handle_message(const std::string& session_id, std::string_view text) {
  auto session = find_session(session_id);
  if (!session) throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
  std::lock_guard turn_lock(session->mutex);
  const auto snap = snapshot();
  const std::size_t turn = session->state.turn_count + 1;
  log(json{{"phase", "connect"}, {"session", session_id}, {"turn", turn}, {"bytes", text.size()}});

  json understanding = json::object();
  std::vector<ResponsePayload> responses;
  dialog::DialogState next = session->state;
  try {
    responses = run_turn(*snap, next, text, understanding);
    session->state = std::move(next);
  } catch (const Error& e) {
    understanding["error"] = e.what();
    ++session->state.turn_count;
    responses = {nlg::apology(snap->templates, session->state.lang.value_or(Lang::en))};
  }
  json understand{{"phase", "understand"}, {"session", session_id}, {"turn", turn}};
  understand.update(understanding);
  log(understand);

  json types = json::array();
  for (const auto& p : responses) types.push_back(p.type == PayloadType::card ? "card" : "text");
  log(json{{"phase", "respond"}, {"session", session_id}, {"turn", turn}, {"payloads", types}});
  write_transcript(*snap, session_id, text, responses);
  return responses;
}

void Engine::reindex() {
  std::lock_guard guard(reindex_mutex_);
  const auto current = snapshot();
  const EngineConfig& c = current->config;
  auto base = kb::KnowledgeBase::load_dir(c.kb_dir, c.effective_today());
  auto next = build_snapshot(c, std::move(base), current->intents, current->recognizer, current->flows,
                             current->templates);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(next);
}

std::vector<kb::StaleEntry> Engine::stale(std::optional<long> window_days) const {
  const auto snap = snapshot();
  return kb::staleness_report(snap->kb.entries(), snap->config.effective_today(),
                              window_days.value_or(snap->config.stale_window_days));
}

// ---------------------------------------------------------------------------
// scenarios

bool Expectation::empty() const {
  return !type && contains.empty() && options_include.empty() && buttons_include.empty() &&
         attachments_include.empty() && !language && !payloads;
}

namespace {

Expectation expectation_from_json(const json& j, const std::string& where) {
  detail::reject_unknown(j,
                         {"type", "contains", "options_include", "buttons_include", "attachments_include", "language",
                          "payloads"},
                         where);
  Expectation e;
  if (j.contains("type")) {
    const auto t = detail::string_field(j, "type", where, true);
    if (t != "text" && t != "card") throw Error(ErrorCode::SchemaError, where + ": type must be 'text' or 'card'");
    e.type = t == "card" ? PayloadType::card : PayloadType::text;
  }
  if (j.contains("contains")) e.contains = detail::string_list(j["contains"], where + ".contains");
  if (j.contains("options_include")) e.options_include = detail::string_list(j["options_include"], where + ".options_include");
  if (j.contains("buttons_include")) e.buttons_include = detail::string_list(j["buttons_include"], where + ".buttons_include");
  if (j.contains("attachments_include")) {
    if (!j["attachments_include"].is_array()) {
      throw Error(ErrorCode::SchemaError, where + ".attachments_include: expected an array");
    }
    for (const auto& a : j["attachments_include"]) {
      detail::reject_unknown(a, {"kind", "url_contains"}, where + ".attachments_include");
      e.attachments_include.push_back({detail::string_field(a, "kind", where, true),
                                       detail::string_field(a, "url_contains", where, false)});
    }
  }
  if (j.contains("language")) {
    const auto l = parse_lang(detail::string_field(j, "language", where, true));
    if (!l) throw Error(ErrorCode::SchemaError, where + ": unsupported language");
    e.language = l;
  }
  if (j.contains("payloads")) {
    if (!j["payloads"].is_array()) throw Error(ErrorCode::SchemaError, where + ".payloads: expected an array");
    std::vector<ResponsePayload> list;
    try {
      for (const auto& p : j["payloads"]) list.push_back(payload_from_json(p));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::SchemaError, where + ".payloads: " + ex.what());
    }
    e.payloads = std::move(list);
  }
  if (e.empty()) throw Error(ErrorCode::SchemaError, where + ": expectations must not be empty");
  return e;
}

}  // namespace

ScenarioScript ScenarioScript::parse(std::string_view json_text) {
  const json root = detail::parse_json(json_text, "scenario");
  detail::reject_unknown(root, {"name", "language", "greeting", "turns"}, "scenario");
  ScenarioScript s;
  s.name = detail::string_field(root, "name", "scenario", true);
  if (root.contains("language") && !root["language"].is_null()) {
    s.language = parse_lang(detail::string_field(root, "language", "scenario", true));
    if (!s.language) throw Error(ErrorCode::SchemaError, "scenario: unsupported language");
  }
  if (root.contains("greeting")) s.greeting = expectation_from_json(root["greeting"], "scenario greeting");
  if (!root.contains("turns") || !root["turns"].is_array() || root["turns"].empty()) {
    throw Error(ErrorCode::SchemaError, "scenario: 'turns' must be a non-empty array");
  }
  for (std::size_t i = 0; i < root["turns"].size(); ++i) {
    const json& t = root["turns"][i];
    const std::string where = "scenario turn " + std::to_string(i + 1);
    detail::reject_unknown(t, {"user", "expect"}, where);
    ScenarioTurn turn;
    turn.user = detail::string_field(t, "user", where, true);
    if (!t.contains("expect")) throw Error(ErrorCode::SchemaError, where + ": missing 'expect'");
    turn.expect = expectation_from_json(t["expect"], where);
    s.turns.push_back(std::move(turn));
  }
  return s;
}

ScenarioScript ScenarioScript::load(const fs::path& path) { return parse(detail::read_file(path)); }

json to_json(const Expectation& e) {
  json j = json::object();
  if (e.type) j["type"] = *e.type == PayloadType::card ? "card" : "text";
  if (!e.contains.empty()) j["contains"] = e.contains;
  if (!e.options_include.empty()) j["options_include"] = e.options_include;
  if (!e.buttons_include.empty()) j["buttons_include"] = e.buttons_include;
  if (!e.attachments_include.empty()) {
    j["attachments_include"] = json::array();
    for (const auto& a : e.attachments_include) {
      j["attachments_include"].push_back(json{{"kind", a.kind}, {"url_contains", a.url_contains}});
    }
  }
  if (e.language) j["language"] = std::string(to_string(*e.language));
  if (e.payloads) {
    j["payloads"] = json::array();
    for (const auto& p : *e.payloads) j["payloads"].push_back(to_json(p));
  }
  return j;
}

json to_json(const ScenarioScript& s) {
  json j{{"name", s.name}, {"language", s.language ? json(std::string(to_string(*s.language))) : json(nullptr)}};
  if (s.greeting) j["greeting"] = to_json(*s.greeting);
  j["turns"] = json::array();
  for (const auto& t : s.turns) j["turns"].push_back(json{{"user", t.user}, {"expect", to_json(t.expect)}});
  return j;
}

std::optional<std::string> check_expectation(const Expectation& e, const std::vector<ResponsePayload>& payloads) {
  if (e.payloads) {
    if (e.payloads->size() != payloads.size()) {
      return "expected " + std::to_string(e.payloads->size()) + " payload(s), got " + std::to_string(payloads.size());
    }
    for (std::size_t i = 0; i < payloads.size(); ++i) {
      if (!((*e.payloads)[i] == payloads[i])) {
        return "payload " + std::to_string(i + 1) + " differs: expected " + to_json((*e.payloads)[i]).dump() +
               ", got " + to_json(payloads[i]).dump();
      }
    }
  }
  if (e.type && std::none_of(payloads.begin(), payloads.end(), [&](const ResponsePayload& p) { return p.type == *e.type; })) {
    return std::string("no payload of type '") + (*e.type == PayloadType::card ? "card" : "text") + "'";
  }
  for (const auto& needle : e.contains) {
    const bool found = std::any_of(payloads.begin(), payloads.end(), [&](const ResponsePayload& p) {
      if (p.text.find(needle) != std::string::npos) return true;
      for (const auto& o : p.options) {
        if (o.find(needle) != std::string::npos) return true;
      }
      for (const auto& b : p.buttons) {
        if (b.label.find(needle) != std::string::npos) return true;
      }
      for (const auto& a : p.attachments) {
        if (a.title.find(needle) != std::string::npos) return true;
      }
      return false;
    });
    if (!found) return "no payload contains \"" + needle + "\"";
  }
  for (const auto& option : e.options_include) {
    const bool found = std::any_of(payloads.begin(), payloads.end(), [&](const ResponsePayload& p) {
      return std::find(p.options.begin(), p.options.end(), option) != p.options.end();
    });
    if (!found) return "no payload offers option \"" + option + "\"";
  }
  for (const auto& label : e.buttons_include) {
    const bool found = std::any_of(payloads.begin(), payloads.end(), [&](const ResponsePayload& p) {
      return std::any_of(p.buttons.begin(), p.buttons.end(), [&](const Button& b) { return b.label == label; });
    });
    if (!found) return "no payload has button \"" + label + "\"";
  }
  for (const auto& want : e.attachments_include) {
    const bool found = std::any_of(payloads.begin(), payloads.end(), [&](const ResponsePayload& p) {
      return std::any_of(p.attachments.begin(), p.attachments.end(), [&](const Attachment& a) {
        return a.kind == want.kind && a.url.find(want.url_contains) != std::string::npos;
      });
    });
    if (!found) return "no " + want.kind + " attachment with url containing \"" + want.url_contains + "\"";
  }
  if (e.language) {
    for (const auto& p : payloads) {
      if (p.language != *e.language) return "payload in '" + std::string(to_string(p.language)) + "'";
    }
  }
  return std::nullopt;
}

json to_json(const ScenarioReport& r) {
  json j{{"name", r.name}, {"passed", r.passed}, {"elapsed_ms", r.elapsed_ms}, {"turns", json::array()}};
  for (const auto& t : r.turns) {
    json tj{{"user", t.user}, {"passed", t.passed}, {"responses", json::array()}};
    if (!t.passed) tj["failure"] = t.failure;
    for (const auto& p : t.responses) tj["responses"].push_back(to_json(p));
    j["turns"].push_back(std::move(tj));
  }
  return j;
}

ScenarioReport run_scenario(const ScenarioScript& script, Engine& engine) {
  const auto started = std::chrono::steady_clock::now();
  ScenarioReport report;
  report.name = script.name;
  auto record = [&](std::string user, const Expectation* e, std::vector<ResponsePayload> responses) {
    TurnReport t{std::move(user), true, {}, std::move(responses)};
    if (e != nullptr) {
      if (auto failure = check_expectation(*e, t.responses)) {
        t.passed = false;
        t.failure = *failure;
      }
    }
    report.turns.push_back(std::move(t));
  };
  const auto start = engine.start_session(script.language);
  if (script.greeting) record("<greeting>", &*script.greeting, {start.greeting});
  for (const auto& turn : script.turns) {
    try {
      record(turn.user, &turn.expect, engine.handle_message(start.session_id, turn.user));
    } catch (const Error& e) {
      report.turns.push_back({turn.user, false, e.what(), {}});
    }
  }
  report.passed = std::all_of(report.turns.begin(), report.turns.end(), [](const TurnReport& t) { return t.passed; });
  report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace rafiq::engine
