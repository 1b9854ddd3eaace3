#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "rafiq/common.hpp"
#include "rafiq/kb.hpp"
#include "rafiq/text.hpp"
#include "rafiq/vectors.hpp"

namespace rafiq::nlu {

inline constexpr double kDefaultIntentThreshold = 0.7;

struct Intent {
  std::string name;
  std::map<Lang, std::vector<std::string>> triggers;
  double threshold = kDefaultIntentThreshold;

  bool operator==(const Intent&) const = default;
};

struct IntentCatalog {
  std::vector<Intent> intents;

  // {"intents":[{"name","threshold"?,"triggers":{"en":[...],"ar":[...]}}]}
  static IntentCatalog parse(std::string_view json_text);
  static IntentCatalog load(const std::filesystem::path& path);

  const Intent* find(std::string_view name) const;
};

struct ScoredIntent {
  std::string name;
  double score = 0.0;

  bool operator==(const ScoredIntent&) const = default;
};

struct IntentPrediction {
  std::optional<std::string> intent;  // set only when the winner clears its threshold
  double score = 0.0;
  std::vector<ScoredIntent> candidates;  // score descending, name ascending

  bool confident() const { return intent.has_value(); }
  bool operator==(const IntentPrediction&) const = default;
};

// Trigger phrases vectorized with one vectorizer per language.
class IntentIndex {
 public:
  /// Throws Error(EmptyCatalog) for an empty catalog.
  IntentIndex(IntentCatalog catalog, text::TextPipeline pipeline);

  const IntentCatalog& catalog() const { return catalog_; }
  const text::TextPipeline& pipeline() const { return pipeline_; }

  /// Query vector in the trigger space of `lang` (zero when nothing overlaps).
  vectors::DocumentVector vectorize(const std::vector<std::string>& terms, Lang lang) const;

  struct LangSpace {
    vectors::VectorizerState vectorizer;
    // per catalog position: the vectors of its trigger phrases in this language
    std::vector<std::vector<vectors::DocumentVector>> phrases;
  };
  const LangSpace* space(Lang lang) const;

 private:
  IntentCatalog catalog_;
  text::TextPipeline pipeline_;
  std::map<Lang, LangSpace> spaces_;
};

/// Scores each intent as its best trigger-phrase cosine against `terms`
/// (the utterance after the text pipeline). The winner is kept only when its
/// score reaches that intent's threshold.
IntentPrediction classify_intent(const std::vector<std::string>& terms, const IntentIndex& index, Lang lang);

// ---------------------------------------------------------------------------
// entity recognition

enum class EntitySource { gazetteer, pattern };

struct Entity {
  std::string type;
  std::string value;
  std::size_t start = 0;  // token span [start, end)
  std::size_t end = 0;
  EntitySource source = EntitySource::gazetteer;

  bool operator==(const Entity&) const = default;
};

// type -> canonical value -> alias phrases
using Gazetteer = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

Gazetteer parse_gazetteer(std::string_view json_text);
Gazetteer load_gazetteer(const std::filesystem::path& path);

// type -> ECMAScript patterns, each matched against a whole normalized token
using PatternSet = std::map<std::string, std::vector<std::string>>;

class EntityRecognizer {
 public:
  EntityRecognizer() = default;
  /// Aliases (and canonical values themselves) are tokenized per language.
  EntityRecognizer(const Gazetteer& gazetteer, const PatternSet& patterns);

  /// Leftmost-longest scan over `tokens`; gazetteer hits beat patterns.
  std::vector<Entity> recognize(const std::vector<text::Token>& tokens, Lang lang) const;

 private:
  struct Alias {
    std::vector<std::string> tokens;
    std::string type;
    std::string canonical;
  };
  std::map<Lang, std::vector<Alias>> aliases_;  // longest first
  std::vector<std::pair<std::string, std::regex>> patterns_;
};

std::vector<Entity> recognize_entities(const std::vector<text::Token>& tokens, const EntityRecognizer& recognizer,
                                       Lang lang);

// ---------------------------------------------------------------------------
// candidate generation and selection

struct CandidateResponse {
  std::string entry_id;
  double retrieval_score = 0.0;
  std::optional<double> rerank_score;

  bool operator==(const CandidateResponse&) const = default;
};

/// Top `top_n` entries of `lang` by cosine (best question variant), id
/// ascending on ties; zero scores are dropped. With clustering, only the
/// nearest cluster and clusters whose distance bound can still reach the
/// current top_n are scanned, so the result equals the full scan.
/// Throws Error(EmptyIndex).
std::vector<CandidateResponse> retrieve_candidates(const vectors::DocumentVector& query, const kb::KBIndex& index,
                                                   Lang lang, std::size_t top_n, bool use_clusters = true);

// The parts of dialog state the response selector reads.
struct SelectionContext {
  Lang lang = Lang::en;
  std::optional<std::string> last_intent;
  std::vector<Entity> last_entities;
};

inline constexpr std::size_t kRerankFeatureCount = 4;

/// retrieval score, intent-tag match, language match, entity token overlap.
std::vector<double> rerank_features(const CandidateResponse& candidate, const kb::KBIndex& index,
                                    const SelectionContext& context);

/// Fills rerank scores when a model is given.
std::vector<CandidateResponse> score_candidates(std::vector<CandidateResponse> candidates, const kb::KBIndex& index,
                                                const SelectionContext& context,
                                                const vectors::ForestModel* model);

/// Argmax of rerank score (or retrieval score without a model), entry id
/// ascending on ties; nullopt for no candidates.
std::optional<std::string> select_response(const std::vector<CandidateResponse>& candidates,
                                           const kb::KBIndex& index, const SelectionContext& context,
                                           const vectors::ForestModel* model);

struct RankingSet {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
};

/// Labeled rerank rows built from the KB itself: every question variant (and
/// each one-token-dropped variant) is queried with its entry's first tag as
/// context intent; the source entry is labeled 1, other candidates 0.
/// At most `max_queries` queries are used, chosen deterministically by seed.
RankingSet synthesize_ranking_set(const kb::KBIndex& index, std::size_t top_n, std::size_t max_queries,
                                  std::uint64_t seed);

vectors::ForestModel train_reranker(const kb::KBIndex& index, const vectors::ForestParams& params,
                                    std::size_t top_n = 5, std::size_t max_queries = 600);

}  // namespace rafiq::nlu
