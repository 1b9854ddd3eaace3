// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

#include "rafiq/engine.hpp"

using namespace rafiq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 3) failures_.push_back(what);
    failed_ |= !ok;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool passed() const { return !failed_; }
  std::string detail() const {
    const auto& parts = failed_ ? failures_ : notes_;
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
    return out;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int precision = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

const engine::Snapshot& fixture() {
  static const auto snap = engine::load_snapshot(support::fixture_config());
  return *snap;
}

// ---------------------------------------------------------------------------
// scenarios

void run_script(Check& c, const std::string& file, engine::Engine& eng, engine::ScenarioReport& report) {
  const auto script = engine::ScenarioScript::load(support::data_dir() / "scenarios" / file);
  const auto start = Clock::now();
  report = engine::run_scenario(script, eng);
  const double elapsed = ms_since(start);
  for (const auto& t : report.turns) c.expect(t.passed, "turn \"" + t.user + "\": " + t.failure);
  c.expect(elapsed < 1000.0, "runtime " + fmt(elapsed) + " ms >= 1000 ms");
  c.note(std::to_string(report.turns.size()) + " turns in " + fmt(elapsed) + " ms");
}

void scenario_english(Check& c) {
  engine::Engine eng(engine::load_snapshot(support::fixture_config()));
  engine::ScenarioReport report;
  run_script(c, "scenario_en_vaccine.json", eng, report);
}

void scenario_arabic(Check& c) {
  engine::Engine eng(engine::load_snapshot(support::fixture_config()));
  engine::ScenarioReport report;
  run_script(c, "scenario_ar_diagnosis.json", eng, report);
  if (report.turns.size() != 6) return c.expect(false, "expected 6 reports including the greeting");

  // Every payload survives JSON serialization unchanged.
  std::size_t checked = 0;
  for (const auto& t : report.turns) {
    for (const auto& p : t.responses) {
      const std::string wire = to_json(p).dump();
      c.expect(payload_from_json(json::parse(wire)) == p, "payload changed through JSON: " + wire);
      c.expect(to_json(payload_from_json(json::parse(wire))).dump() == wire, "re-serialized bytes differ");
      ++checked;
    }
  }
  // Arabic strings arrive with the exact bytes of the source files.
  const auto flow = json::parse(support::read_file(support::data_dir() / "flows" / "diagnosis_check.flow.json"));
  const auto symptoms = flow["steps"]["ask_symptoms"]["option_labels"]["ar"].get<std::vector<std::string>>();
  c.expect(report.turns[2].responses.at(0).options == symptoms, "symptom labels differ from the flow file");
  c.expect(report.turns[2].responses.at(0).text == flow["steps"]["ask_symptoms"]["prompt"]["ar"].get<std::string>(),
           "symptom prompt differs from the flow file");

  const auto templates = json::parse(support::read_file(support::data_dir() / "templates.json"));
  std::string clinic;
  for (const auto& t : templates["templates"]) {
    if (t["id"] == "suggest_clinic") clinic = t["text"]["ar"];
  }
  clinic.replace(clinic.find("{city}"), 6, "Assir");
  const auto& final_turn = report.turns[5].responses;
  c.expect(!final_turn.empty() && final_turn[0].text == clinic, "clinic text differs from the template bytes");
  c.expect(!final_turn.empty() && final_turn[0].attachments.size() == 1 &&
               final_turn[0].attachments[0].kind == "location" &&
               final_turn[0].attachments[0].url.find("Assir") != std::string::npos,
           "no location attachment for Assir");
  c.note(std::to_string(checked) + " payloads byte-exact");
}

// ---------------------------------------------------------------------------
// intent threshold

void threshold_semantics(Check& c) {
  const auto& pipeline = fixture().index.pipeline;
  const auto& intents = fixture().intents;
  std::size_t phrases = 0;
  for (const auto& intent : intents.catalog().intents) {
    for (const auto& [lang, list] : intent.triggers) {
      for (const auto& phrase : list) {
        const auto p = nlu::classify_intent(pipeline.terms(phrase, lang), intents, lang);
        c.expect(p.intent == std::optional<std::string>(intent.name), "'" + phrase + "' did not select " + intent.name);
        c.expect(std::abs(p.score - 1.0) <= 1e-12, "'" + phrase + "' scored " + fmt(p.score, 15));
        ++phrases;
      }
    }
  }
  oracle::Rng rng{50};
  for (int i = 0; i < 50; ++i) {
    std::string s;
    for (int w = 0; w < 3; ++w) {
      s += (w ? " " : "");
      for (int k = 0; k < 5; ++k) s.push_back("qxzjvk"[rng.below(6)]);
    }
    for (Lang lang : kAllLangs) {
      const auto p = nlu::classify_intent(pipeline.terms(s, lang), intents, lang);
      c.expect(!p.intent, "'" + s + "' selected an intent");
    }
  }
  // One trigger makes every idf 1; counts (7, 7, 1, 1) have norm 10, so "alpha" scores 0.7 exactly.
  const std::string trigger = "alpha alpha alpha alpha alpha alpha alpha beta beta beta beta beta beta beta gamma delta";
  const nlu::IntentIndex at(nlu::IntentCatalog{{nlu::Intent{"Boundary", {{Lang::en, {trigger}}}, 0.7}}}, {});
  const auto p = nlu::classify_intent({"alpha"}, at, Lang::en);
  c.expect(p.score == 0.7, "boundary score " + fmt(p.score, 17));
  c.expect(p.intent == std::optional<std::string>("Boundary"), "score at the threshold was rejected");
  c.note(std::to_string(phrases) + " triggers at 1.0, 50 no-overlap rejected, boundary score 0.7 selected");
}

// ---------------------------------------------------------------------------
// TF-IDF and retrieval against the oracle

std::vector<std::pair<std::string, double>> oracle_scan(const std::string& query, Lang lang, const text::TextPipeline& pl,
                                                        std::size_t top_n) {
  std::vector<std::vector<std::string>> corpus;
  const auto& entries = fixture().kb.entries();
  for (const auto& e : entries) {
    if (e.lang != lang) continue;
    for (const auto& q : e.questions) corpus.push_back(pl.terms(q, lang));
  }
  const auto idf = oracle::idf(corpus);
  const auto qv = oracle::tfidf(pl.terms(query, lang), idf);
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& e : entries) {
    if (e.lang != lang) continue;
    double best = 0.0;
    for (const auto& q : e.questions) best = std::max(best, oracle::cosine(qv, oracle::tfidf(pl.terms(q, lang), idf)));
    if (best > 0.0) scored.emplace_back(e.id, best);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (scored.size() > top_n) scored.resize(top_n);
  return scored;
}

void oracle_equivalence(Check& c) {
  oracle::Rng rng{2024};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<std::string>> corpus(1 + rng.below(20));
    for (auto& d : corpus) {
      const std::size_t len = 1 + rng.below(10);
      for (std::size_t i = 0; i < len; ++i) d.push_back("t" + std::to_string(rng.below(15)));
    }
    const auto state = vectors::fit_vocabulary(corpus);
    const auto idf = oracle::idf(corpus);
    std::map<vectors::TermId, std::string> names;
    for (const auto& [t, id] : state.vocabulary) names[id] = t;
    std::vector<vectors::DocumentVector> lib;
    std::vector<oracle::SparseVec> ref;
    for (const auto& d : corpus) {
      lib.push_back(vectors::vectorize(d, state));
      ref.push_back(oracle::tfidf(d, idf));
      c.expect(lib.back().weights.size() == ref.back().size(), "weight count differs");
      for (const auto& [id, w] : lib.back().weights) worst = std::max(worst, std::abs(w - ref.back()[names.at(id)]));
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (std::size_t j = 0; j < corpus.size(); ++j) {
        worst = std::max(worst, std::abs(vectors::cosine(lib[i], lib[j]) - oracle::cosine(ref[i], ref[j])));
      }
    }
  }
  c.expect(worst <= 1e-9, "max deviation " + std::to_string(worst));

  const auto& idx = fixture().index;
  std::vector<std::pair<std::string, Lang>> queries;
  for (const auto& e : fixture().kb.entries()) {
    for (const auto& q : e.questions) queries.emplace_back(q, e.lang);
  }
  for (const char* q : {"vaccine registration", "symptoms", "mask", "covid 19 test", "Is there a vaccine for covid19?",
                        "travel quarantine", "anxiety sleep"}) {
    queries.emplace_back(q, Lang::en);
  }
  queries.emplace_back("لقاح كورونا", Lang::ar);
  std::size_t clustered = 0;
  for (Lang l : kAllLangs) clustered += idx.lang(l)->clustering ? 1 : 0;
  c.expect(clustered > 0, "no language index is clustered, pruning untested");
  for (const auto& [q, lang] : queries) {
    const auto qv = vectors::vectorize(idx.pipeline.terms(q, lang), idx.lang(lang)->vectorizer);
    const auto pruned = nlu::retrieve_candidates(qv, idx, lang, 5, true);
    const auto full = nlu::retrieve_candidates(qv, idx, lang, 5, false);
    const auto expected = oracle_scan(q, lang, idx.pipeline, 5);
    bool same = pruned.size() == expected.size() && full.size() == expected.size();
    for (std::size_t i = 0; same && i < expected.size(); ++i) {
      same = pruned[i].entry_id == expected[i].first && full[i].entry_id == expected[i].first &&
             std::abs(pruned[i].retrieval_score - expected[i].second) <= 1e-9;
    }
    c.expect(same, "ranking differs for '" + q + "'");
  }
  c.note("max deviation " + fmt(worst * 1e12, 3) + "e-12 over 100 corpora; " + std::to_string(queries.size()) +
         " fixture queries ranked identically");
}

// ---------------------------------------------------------------------------
// k-means and forest

vectors::DocumentVector point(const std::vector<double>& coords) {
  std::vector<std::pair<vectors::TermId, double>> w;
  for (std::size_t i = 0; i < coords.size(); ++i) w.emplace_back(static_cast<vectors::TermId>(i), coords[i]);
  return vectors::make_vector(std::move(w));
}

void kmeans_criterion(Check& c) {
  const std::vector<vectors::DocumentVector> pts{point({0}), point({1}), point({10}), point({11})};
  const double best = oracle::exhaustive_min_sse({{0}, {1}, {10}, {11}}, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = vectors::kmeans(pts, 2, seed);
    c.expect(std::abs(r.sse - best) <= 1e-12, "seed " + std::to_string(seed) + " SSE " + fmt(r.sse, 6));
  }
  oracle::Rng rng{99};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(30), dim = 1 + rng.below(5);
    std::vector<vectors::DocumentVector> xs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(dim);
      for (auto& x : v) x = rng.below(3) == 0 ? 0.0 : rng.uniform() * 10.0;
      xs.push_back(point(v));
    }
    const std::size_t k = 1 + rng.below(n);
    const auto seed = rng.next();
    const auto a = vectors::kmeans(xs, k, seed, 50);
    for (std::size_t i = 1; i < a.sse_history.size(); ++i) {
      c.expect(a.sse_history[i] <= a.sse_history[i - 1] + 1e-9, "SSE rose on trial " + std::to_string(trial));
    }
    c.expect(a == vectors::kmeans(xs, k, seed, 50), "rerun differs on trial " + std::to_string(trial));
  }
  c.note("optimum SSE " + fmt(best, 1) + " reached; 100 instances monotone and reproducible");
}

void forest_criterion(Check& c) {
  oracle::Rng rng{7};
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r{rng.uniform(), rng.uniform(), rng.uniform()};
    y.push_back(3 * r[0] - 2 * r[1] + 0.5 * r[2] + 0.05 * (rng.uniform() - 0.5));
    rows.push_back(r);
  }
  const vectors::ForestParams params{.seed = 11};
  const auto m = vectors::forest_fit(rows, y, params);
  c.expect(m == vectors::forest_fit(rows, y, params), "refit with the same seed differs");

  const auto flat = vectors::forest_fit(rows, std::vector<double>(rows.size(), 2.5), params);
  for (const auto& r : rows) c.expect(vectors::forest_predict(flat, r) == 2.5, "constant target not reproduced");

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double mse_forest = 0.0, mse_mean = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mse_forest += std::pow(vectors::forest_predict(m, rows[i]) - y[i], 2);
    mse_mean += std::pow(mean - y[i], 2);
  }
  mse_forest /= static_cast<double>(rows.size());
  mse_mean /= static_cast<double>(rows.size());
  c.expect(mse_forest <= mse_mean, "forest MSE " + fmt(mse_forest, 5) + " > mean MSE " + fmt(mse_mean, 5));
  c.note("MSE " + fmt(mse_forest, 4) + " vs mean predictor " + fmt(mse_mean, 4));
}

// ---------------------------------------------------------------------------
// dialog

void context_switch(Check& c) {
  engine::Engine eng(engine::load_snapshot(support::fixture_config()));
  const auto id = eng.start_session(Lang::en).session_id;
  eng.handle_message(id, "What are the preventive measures for COVID-19?");
  const auto mid = eng.session(id);
  c.expect(mid->active && mid->active->flow_id == "guidance", "the first turn did not enter the guidance flow");

  const auto out = eng.handle_message(id, "What are the symptoms of COVID-19?");
  const auto end = eng.session(id);
  c.expect(!end->active, "a flow is still active");
  c.expect(out.size() == 1, "expected one payload");
  if (out.empty()) return;
  const kb::KBEntry* answered = nullptr;
  for (const auto& e : fixture().kb.entries()) {
    if (e.answer == out[0].text) answered = &e;
  }
  c.expect(answered != nullptr && std::find(answered->tags.begin(), answered->tags.end(), "Symptoms") != answered->tags.end(),
           "final reply is not a Symptoms answer: " + out[0].text);
  const auto& guidance = *fixture().flows.find("guidance");
  for (const auto& [step_id, step] : guidance.steps) {
    for (const auto& [lang, prompt] : step.prompt) {
      c.expect(out[0].text.find(prompt) == std::string::npos, "reply repeats the guidance prompt");
    }
    for (const auto& o : step.options) {
      c.expect(std::find(out[0].options.begin(), out[0].options.end(), o) == out[0].options.end(),
               "reply offers guidance option " + o);
    }
  }
  if (answered) c.note("answered with " + answered->id);
}

json prompt(const std::string& text) { return json{{"en", text}, {"ar", "نص " + text}}; }

json base_flow() {
  return json{{"id", "mini"},
              {"trigger_intent", "FAQ"},
              {"entry", "ask"},
              {"steps",
               {{"ask",
                 {{"kind", "choice"}, {"prompt", prompt("Pick")}, {"options", {"Yes", "No"}}, {"slot", "answer"}, {"next", "route"}}},
                {"route",
                 {{"kind", "branch"},
                  {"on", "answer"},
                  {"cases", {{{"when", {{"equals", "Yes"}}}, {"next", "yes"}}, {{"when", "default"}, {"next", "done"}}}}}},
                {"yes", {{"kind", "answer"}, {"template", "mild_guidance"}, {"next", "done"}}},
                {"done", {{"kind", "end"}}}}}};
}

void flow_validator(Check& c) {
  const auto& catalog = fixture().intents.catalog();
  const auto templates = fixture().templates.ids();
  const std::vector<Lang> langs{Lang::en, Lang::ar};
  auto validate = [&](const std::vector<json>& docs) {
    std::vector<flow::FlowDocument> in;
    for (std::size_t i = 0; i < docs.size(); ++i) in.push_back({"case" + std::to_string(i), docs[i].dump()});
    std::vector<std::string> codes;
    for (const auto& d : flow::validate_documents(in, catalog, templates, langs)) codes.push_back(d.code);
    return codes;
  };

  std::vector<std::pair<std::string, std::vector<json>>> cases;
  auto dangling = base_flow();
  dangling["steps"]["route"]["cases"][0]["next"] = "sever";
  cases.push_back({"SchemaError", {dangling}});
  auto unreachable = base_flow();
  unreachable["steps"]["orphan"] = json{{"kind", "answer"}, {"template", "mild_guidance"}, {"next", "done"}};
  cases.push_back({"Unreachable", {unreachable}});
  auto no_end = base_flow();
  no_end["steps"]["yes"]["next"] = "ask";
  no_end["steps"]["route"]["cases"][1]["next"] = "yes";
  no_end["steps"].erase("done");
  cases.push_back({"NoReachableEnd", {no_end}});
  auto no_arabic = base_flow();
  no_arabic["steps"]["ask"]["prompt"].erase("ar");
  cases.push_back({"MissingLanguage", {no_arabic}});
  auto bad_template = base_flow();
  bad_template["steps"]["yes"]["template"] = "no_such_template";
  cases.push_back({"UnknownTemplate", {bad_template}});
  auto first = base_flow();
  auto second = base_flow();
  second["id"] = "mini2";
  cases.push_back({"DuplicateTrigger", {first, second}});

  for (const auto& [code, docs] : cases) {
    const auto got = validate(docs);
    std::string joined;
    for (const auto& g : got) joined += (joined.empty() ? "" : ",") + g;
    c.expect(got == std::vector<std::string>{code}, code + " case produced [" + joined + "]");
  }
  std::vector<flow::DialogFlow> fixtures;
  for (const auto& [id, f] : fixture().flows.flows()) fixtures.push_back(f);
  c.expect(flow::validate_flows(fixtures, catalog, templates, langs).empty(), "fixture flows produce diagnostics");
  c.note("6 malformed cases each named; " + std::to_string(fixtures.size()) + " fixture flows clean");
}

void staleness(Check& c) {
  const kb::Date now = *kb::parse_date("2021-10-20");
  auto entry = [&](const std::string& id, int age) {
    kb::KBEntry e;
    e.id = id;
    e.questions = {"q"};
    e.answer = "a";
    e.source = "s";
    e.updated = now - std::chrono::days{age};
    return e;
  };
  const auto report = kb::staleness_report({entry("fifteen", 15), entry("thirteen", 13)}, now);
  c.expect(report.size() == 1 && report[0] == kb::StaleEntry{"fifteen", 15}, "expected only the 15-day-old entry");
  c.note("15 days reported, 13 days not (window 14)");
}

// ---------------------------------------------------------------------------
// responsiveness

std::string pseudo_word(oracle::Rng& rng) {
  static const char* syllables[] = {"ka", "ro", "mi", "tes", "lun", "va", "dor", "pi", "sen", "qua", "zel", "bo", "rit", "na"};
  std::string w;
  const std::size_t n = 2 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) w += syllables[rng.below(std::size(syllables))];
  return w;
}

void responsiveness(Check& c) {
  support::TempDir tmp;
  const fs::path kb_dir = tmp.path() / "kb";
  fs::copy(support::data_dir() / "kb", kb_dir);
  const std::size_t fixture_entries = fixture().kb.size();
  const std::size_t synthetic = 1000 - fixture_entries;

  oracle::Rng rng{1000};
  std::vector<std::string> vocab;
  for (int i = 0; i < 1500; ++i) vocab.push_back(pseudo_word(rng));
  const std::vector<std::string> tags{"FAQ", "Guidance", "Information", "MentalSupport", "Symptoms", "Vaccines"};
  std::vector<std::string> questions;
  std::string jsonl;
  for (std::size_t i = 0; i < synthetic; ++i) {
    json variants = json::array();
    for (int v = 0; v < 2; ++v) {
      std::string q;
      const std::size_t len = 5 + rng.below(5);
      for (std::size_t k = 0; k < len; ++k) q += (k ? " " : "") + vocab[rng.below(vocab.size())];
      questions.push_back(q);
      variants.push_back(q + "?");
    }
    jsonl += json{{"id", "synthetic_" + std::to_string(i)},
                  {"lang", "en"},
                  {"questions", variants},
                  {"answer", "Synthetic answer " + std::to_string(i) + "."},
                  {"tags", {tags[rng.below(tags.size())]}},
                  {"source", "https://example.org/synthetic/" + std::to_string(i)},
                  {"updated", "2021-10-10"}}
                 .dump() +
             "\n";
  }
  support::write_file(kb_dir / "synthetic.jsonl", jsonl);

  auto cfg = json::parse(support::read_file(support::data_dir() / "config.json"));
  cfg["kb_dir"] = kb_dir.string();
  const auto load_start = Clock::now();
  engine::Engine eng(engine::EngineConfig::parse(cfg.dump(), support::data_dir()));
  const double load_ms = ms_since(load_start);
  c.expect(eng.snapshot()->kb.size() == 1000, "KB holds " + std::to_string(eng.snapshot()->kb.size()) + " entries");

  std::vector<std::string> fixture_questions;
  for (const auto& e : fixture().kb.entries()) {
    if (e.lang == Lang::en) fixture_questions.push_back(e.questions.front());
  }
  const std::vector<std::string> flow_turns{"I want to do a diagnosis check", "Fever, Cough", "No",
                                            "Is there a vaccine for covid19?", "Certified Vaccine"};

  std::vector<double> latencies;
  std::string session;
  for (int turn = 0; turn < 1000; ++turn) {
    if (turn % 20 == 0) session = eng.start_session(Lang::en).session_id;
    std::string text;
    const auto pick = rng.below(10);
    if (pick < 5) {
      text = questions[rng.below(questions.size())];
      if (rng.below(2)) text = text.substr(0, text.rfind(' '));  // a partial question
    } else if (pick < 7) {
      text = fixture_questions[rng.below(fixture_questions.size())];
    } else if (pick < 9) {
      text = flow_turns[static_cast<std::size_t>(turn) % flow_turns.size()];
    } else {
      text = pseudo_word(rng) + " " + pseudo_word(rng) + " xq";
    }
    const auto start = Clock::now();
    const auto out = eng.handle_message(session, text);
    latencies.push_back(ms_since(start));
    c.expect(!out.empty(), "empty reply for '" + text + "'");
  }
  std::sort(latencies.begin(), latencies.end());
  const double p95 = latencies[static_cast<std::size_t>(std::ceil(0.95 * latencies.size())) - 1];
  const double p50 = latencies[latencies.size() / 2];
  c.expect(p95 < 50.0, "p95 " + fmt(p95, 3) + " ms >= 50 ms");
  c.note("p50 " + fmt(p50, 3) + " ms, p95 " + fmt(p95, 3) + " ms, max " + fmt(latencies.back(), 3) +
         " ms over 1000 turns; index built in " + fmt(load_ms, 0) + " ms");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"Scenario 1: English vaccine enquiry", scenario_english},
      {"Scenario 2: Arabic diagnosis to the Assir clinic", scenario_arabic},
      {"Intent threshold semantics", threshold_semantics},
      {"TF-IDF, cosine and pruned retrieval match the oracle", oracle_equivalence},
      {"k-means optimum, monotone SSE, determinism", kmeans_criterion},
      {"Forest regression", forest_criterion},
      {"Context switch from guidance to symptoms", context_switch},
      {"Flow validator diagnostics", flow_validator},
      {"Staleness window boundary", staleness},
      {"Responsiveness: p95 under 50 ms on a 1000-entry KB", responsiveness},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.passed() ? "PASS" : "FAIL") << "  " << name << "  (" << c.detail() << ")\n";
    failed += c.passed() ? 0 : 1;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
