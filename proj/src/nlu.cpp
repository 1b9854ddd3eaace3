#include "rafiq/nlu.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "json_util.hpp"

namespace rafiq::nlu {

using nlohmann::json;

// ---------------------------------------------------------------------------
// intents

IntentCatalog IntentCatalog::parse(std::string_view json_text) {
  const json root = detail::parse_json(json_text, "intent catalog");
  detail::reject_unknown(root, {"intents"}, "intent catalog");
  if (!root.contains("intents") || !root["intents"].is_array()) {
    throw Error(ErrorCode::SchemaError, "intent catalog: 'intents' must be an array");
  }
  IntentCatalog catalog;
  std::set<std::string> names;
  for (const auto& item : root["intents"]) {
    const std::string where = "intent #" + std::to_string(catalog.intents.size());
    detail::reject_unknown(item, {"name", "threshold", "triggers"}, where);
    Intent intent;
    intent.name = detail::string_field(item, "name", where, true);
    const std::string named = "intent '" + intent.name + "'";
    if (intent.name.empty()) throw Error(ErrorCode::SchemaError, where + ": empty name");
    if (!names.insert(intent.name).second) throw Error(ErrorCode::SchemaError, named + ": duplicate name");
    if (auto t = item.find("threshold"); t != item.end()) {
      if (!t->is_number()) throw Error(ErrorCode::SchemaError, named + ": threshold must be a number");
      intent.threshold = t->get<double>();
      if (!(intent.threshold > 0.0 && intent.threshold <= 1.0)) {
        throw Error(ErrorCode::SchemaError, named + ": threshold must lie in (0, 1]");
      }
    }
    if (!item.contains("triggers") || !item["triggers"].is_object()) {
      throw Error(ErrorCode::SchemaError, named + ": 'triggers' must be an object keyed by language");
    }
    std::size_t total = 0;
    for (const auto& [lang_key, phrases] : item["triggers"].items()) {
      const auto lang = parse_lang(lang_key);
      if (!lang) throw Error(ErrorCode::SchemaError, named + ": unsupported trigger language '" + lang_key + "'");
      auto list = detail::string_list(phrases, named + ": triggers." + lang_key);
      total += list.size();
      intent.triggers[*lang] = std::move(list);
    }
    if (total == 0) throw Error(ErrorCode::SchemaError, named + ": needs at least one trigger phrase");
    catalog.intents.push_back(std::move(intent));
  }
  return catalog;
}

IntentCatalog IntentCatalog::load(const std::filesystem::path& path) {
  try {
    return parse(detail::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

const Intent* IntentCatalog::find(std::string_view name) const {
  for (const auto& i : intents) {
    if (i.name == name) return &i;
  }
  return nullptr;
}

IntentIndex::IntentIndex(IntentCatalog catalog, text::TextPipeline pipeline)
    : catalog_(std::move(catalog)), pipeline_(std::move(pipeline)) {
  if (catalog_.intents.empty()) throw Error(ErrorCode::EmptyCatalog, "the intent catalog has no intents");
  for (Lang lang : kAllLangs) {
    std::vector<std::vector<std::vector<std::string>>> per_intent;
    std::vector<std::vector<std::string>> corpus;
    for (const auto& intent : catalog_.intents) {
      auto& phrases = per_intent.emplace_back();
      if (auto it = intent.triggers.find(lang); it != intent.triggers.end()) {
        for (const auto& phrase : it->second) {
          phrases.push_back(pipeline_.terms(phrase, lang));
          corpus.push_back(phrases.back());
        }
      }
    }
    if (corpus.empty()) continue;
    LangSpace space;
    space.vectorizer = vectors::fit_vocabulary(corpus);
    for (const auto& phrases : per_intent) {
      auto& vecs = space.phrases.emplace_back();
      for (const auto& terms : phrases) vecs.push_back(vectors::vectorize(terms, space.vectorizer));
    }
    spaces_.emplace(lang, std::move(space));
  }
}

const IntentIndex::LangSpace* IntentIndex::space(Lang lang) const {
  auto it = spaces_.find(lang);
  return it == spaces_.end() ? nullptr : &it->second;
}

vectors::DocumentVector IntentIndex::vectorize(const std::vector<std::string>& terms, Lang lang) const {
  const LangSpace* s = space(lang);
  if (s == nullptr) return {};
  return vectors::vectorize(terms, s->vectorizer);
}

IntentPrediction classify_intent(const std::vector<std::string>& terms, const IntentIndex& index, Lang lang) {
  const auto& intents = index.catalog().intents;
  if (intents.empty()) throw Error(ErrorCode::EmptyCatalog, "the intent catalog has no intents");
  IntentPrediction prediction;
  const auto* space = index.space(lang);
  if (space == nullptr) return prediction;
  const auto query = vectors::vectorize(terms, space->vectorizer);
  for (std::size_t i = 0; i < intents.size(); ++i) {
    double best = 0.0;
    for (const auto& phrase : space->phrases[i]) best = std::max(best, vectors::cosine(query, phrase));
    if (best > 0.0) prediction.candidates.push_back({intents[i].name, best});
  }
  std::sort(prediction.candidates.begin(), prediction.candidates.end(),
            [](const ScoredIntent& a, const ScoredIntent& b) {
              return a.score != b.score ? a.score > b.score : a.name < b.name;
            });
  if (!prediction.candidates.empty()) {
    const auto& top = prediction.candidates.front();
    prediction.score = top.score;
    if (top.score >= index.catalog().find(top.name)->threshold) prediction.intent = top.name;
  }
  return prediction;
}

// ---------------------------------------------------------------------------
// entities

Gazetteer parse_gazetteer(std::string_view json_text) {
  const json root = detail::parse_json(json_text, "gazetteer");
  detail::require_object(root, "gazetteer");
  Gazetteer g;
  for (const auto& [type, canon] : root.items()) {
    detail::require_object(canon, "gazetteer type '" + type + "'");
    for (const auto& [value, aliases] : canon.items()) {
      g[type][value] = detail::string_list(aliases, "gazetteer " + type + "." + value);
    }
  }
  return g;
}

Gazetteer load_gazetteer(const std::filesystem::path& path) {
  try {
    return parse_gazetteer(detail::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

EntityRecognizer::EntityRecognizer(const Gazetteer& gazetteer, const PatternSet& patterns) {
  for (Lang lang : kAllLangs) {
    auto& list = aliases_[lang];
    std::set<std::tuple<std::vector<std::string>, std::string, std::string>> seen;
    for (const auto& [type, canon] : gazetteer) {
      for (const auto& [value, aliases] : canon) {
        std::vector<std::string> phrases = aliases;
        phrases.insert(phrases.begin(), value);
        for (const auto& phrase : phrases) {
          auto toks = text::normalized_forms(text::tokenize(phrase, lang));
          if (toks.empty() || !seen.emplace(toks, type, value).second) continue;
          list.push_back({std::move(toks), type, value});
        }
      }
    }
    std::stable_sort(list.begin(), list.end(),
                     [](const Alias& a, const Alias& b) { return a.tokens.size() > b.tokens.size(); });
  }
  for (const auto& [type, list] : patterns) {
    for (const auto& p : list) {
      try {
        patterns_.emplace_back(type, std::regex(p, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::Config, "entity pattern for '" + type + "' is invalid: " + p);
      }
    }
  }
}

std::vector<Entity> EntityRecognizer::recognize(const std::vector<text::Token>& tokens, Lang lang) const {
  std::vector<Entity> out;
  const auto it = aliases_.find(lang);
  std::size_t i = 0;
  while (i < tokens.size()) {
    const Alias* hit = nullptr;
    if (it != aliases_.end()) {
      for (const auto& alias : it->second) {
        const std::size_t len = alias.tokens.size();
        if (i + len > tokens.size()) continue;
        bool match = true;
        for (std::size_t k = 0; k < len && match; ++k) match = tokens[i + k].normalized == alias.tokens[k];
        if (match) {
          hit = &alias;
          break;
        }
      }
    }
    if (hit != nullptr) {
      out.push_back({hit->type, hit->canonical, i, i + hit->tokens.size(), EntitySource::gazetteer});
      i += hit->tokens.size();
      continue;
    }
    for (const auto& [type, re] : patterns_) {
      if (std::regex_match(tokens[i].normalized, re)) {
        out.push_back({type, tokens[i].surface, i, i + 1, EntitySource::pattern});
        break;
      }
    }
    ++i;
  }
  return out;
}

std::vector<Entity> recognize_entities(const std::vector<text::Token>& tokens, const EntityRecognizer& recognizer,
                                       Lang lang) {
  return recognizer.recognize(tokens, lang);
}

// ---------------------------------------------------------------------------
// retrieval

namespace {

double entry_score(const vectors::DocumentVector& query, const std::vector<vectors::DocumentVector>& variants) {
  double best = 0.0;
  for (const auto& v : variants) best = std::max(best, vectors::cosine(query, v));
  return best;
}

bool ranks_before(const CandidateResponse& a, const CandidateResponse& b) {
  return a.retrieval_score != b.retrieval_score ? a.retrieval_score > b.retrieval_score : a.entry_id < b.entry_id;
}

}  // namespace

std::vector<CandidateResponse> retrieve_candidates(const vectors::DocumentVector& query, const kb::KBIndex& index,
                                                   Lang lang, std::size_t top_n, bool use_clusters) {
  const kb::LangIndex* li = index.lang(lang);
  if (li == nullptr || li->entry_ids.empty()) {
    throw Error(ErrorCode::EmptyIndex, "no indexed entries for language " + std::string(to_string(lang)));
  }
  std::vector<CandidateResponse> found;
  if (query.norm == 0.0 || top_n == 0) return found;

  auto scan = [&](std::size_t pos) {
    const double s = entry_score(query, li->variant_vectors[pos]);
    if (s > 0.0) found.push_back({li->entry_ids[pos], s, std::nullopt});
  };

  if (li->clustering && use_clusters) {
    // Candidate clusters in order of centroid distance from the unit query.
    vectors::DocumentVector unit = query;
    for (auto& [id, w] : unit.weights) w /= query.norm;
    const auto& centroids = li->clustering->centroids;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      order.emplace_back(std::sqrt(vectors::squared_distance(unit, centroids[c])), c);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto [dist, c] = order[rank];
      if (rank > 0 && found.size() >= top_n) {
        // ||q - x|| >= dist - radius, and cos = 1 - ||q - x||^2 / 2 for unit vectors.
        const double gap = std::max(0.0, dist - li->radius[c]);
        const double bound = 1.0 - gap * gap / 2.0;
        std::nth_element(found.begin(), found.begin() + static_cast<long>(top_n - 1), found.end(), ranks_before);
        if (bound < found[top_n - 1].retrieval_score - 1e-9) continue;
      }
      for (std::size_t pos : li->members[c]) scan(pos);
    }
  } else {
    for (std::size_t pos = 0; pos < li->entry_ids.size(); ++pos) scan(pos);
  }
  std::sort(found.begin(), found.end(), ranks_before);
  if (found.size() > top_n) found.resize(top_n);
  return found;
}

// ---------------------------------------------------------------------------
// selection

std::vector<double> rerank_features(const CandidateResponse& candidate, const kb::KBIndex& index,
                                    const SelectionContext& context) {
  std::vector<double> f(kRerankFeatureCount, 0.0);
  f[0] = candidate.retrieval_score;
  const kb::KBEntry* entry = index.entry(candidate.entry_id);
  if (entry == nullptr) return f;
  if (context.last_intent) {
    f[1] = std::find(entry->tags.begin(), entry->tags.end(), *context.last_intent) != entry->tags.end() ? 1.0 : 0.0;
  }
  f[2] = entry->lang == context.lang ? 1.0 : 0.0;

  std::set<std::string> entity_terms;
  for (const auto& e : context.last_entities) {
    for (auto& t : index.pipeline.terms(e.value, entry->lang)) entity_terms.insert(std::move(t));
  }
  if (!entity_terms.empty()) {
    const kb::LangIndex* li = index.lang(entry->lang);
    auto pos = std::lower_bound(li->entry_ids.begin(), li->entry_ids.end(), entry->id);
    const auto& terms = li->entry_terms[static_cast<std::size_t>(pos - li->entry_ids.begin())];
    std::size_t shared = 0;
    for (const auto& t : entity_terms) shared += std::binary_search(terms.begin(), terms.end(), t) ? 1 : 0;
    f[3] = static_cast<double>(shared) / static_cast<double>(entity_terms.size());
  }
  return f;
}

std::vector<CandidateResponse> score_candidates(std::vector<CandidateResponse> candidates, const kb::KBIndex& index,
                                                const SelectionContext& context,
                                                const vectors::ForestModel* model) {
  if (model == nullptr) return candidates;
  for (auto& c : candidates) c.rerank_score = vectors::forest_predict(*model, rerank_features(c, index, context));
  return candidates;
}

std::optional<std::string> select_response(const std::vector<CandidateResponse>& candidates,
                                           const kb::KBIndex& index, const SelectionContext& context,
                                           const vectors::ForestModel* model) {
  if (candidates.empty()) return std::nullopt;
  const auto scored = score_candidates(candidates, index, context, model);
  const CandidateResponse* best = nullptr;
  double best_score = 0.0;
  for (const auto& c : scored) {
    const double s = c.rerank_score.value_or(c.retrieval_score);
    if (best == nullptr || s > best_score || (s == best_score && c.entry_id < best->entry_id)) {
      best = &c;
      best_score = s;
    }
  }
  return best->entry_id;
}

RankingSet synthesize_ranking_set(const kb::KBIndex& index, std::size_t top_n, std::size_t max_queries,
                                  std::uint64_t seed) {
  struct Query {
    Lang lang;
    std::vector<std::string> terms;
    const kb::KBEntry* source;
  };
  std::vector<Query> queries;
  for (const auto& [id, entry] : index.entries) {
    if (index.lang(entry.lang) == nullptr) continue;
    for (const auto& q : entry.questions) {
      auto terms = index.pipeline.terms(q, entry.lang);
      for (std::size_t drop = 0; drop < terms.size() && terms.size() >= 2; ++drop) {
        auto shorter = terms;
        shorter.erase(shorter.begin() + static_cast<long>(drop));
        queries.push_back({entry.lang, std::move(shorter), &entry});
      }
      queries.push_back({entry.lang, std::move(terms), &entry});
    }
  }
  if (queries.size() > max_queries) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = queries.size() - 1; i > 0; --i) std::swap(queries[i], queries[rng() % (i + 1)]);
    queries.resize(max_queries);
  }

  RankingSet set;
  for (const auto& q : queries) {
    const auto* li = index.lang(q.lang);
    const auto vec = vectors::vectorize(q.terms, li->vectorizer);
    const auto candidates = retrieve_candidates(vec, index, q.lang, top_n, false);
    SelectionContext ctx;
    ctx.lang = q.lang;
    if (!q.source->tags.empty()) ctx.last_intent = q.source->tags.front();
    for (const auto& c : candidates) {
      set.rows.push_back(rerank_features(c, index, ctx));
      set.targets.push_back(c.entry_id == q.source->id ? 1.0 : 0.0);
    }
  }
  return set;
}

vectors::ForestModel train_reranker(const kb::KBIndex& index, const vectors::ForestParams& params, std::size_t top_n,
                                    std::size_t max_queries) {
  const auto set = synthesize_ranking_set(index, top_n, max_queries, params.seed);
  return vectors::forest_fit(set.rows, set.targets, params);
}

}  // namespace rafiq::nlu
