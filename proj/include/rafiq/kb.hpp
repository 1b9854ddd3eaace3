#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rafiq/common.hpp"
#include "rafiq/payload.hpp"
#include "rafiq/text.hpp"
#include "rafiq/vectors.hpp"

namespace rafiq::kb {

using Date = std::chrono::sys_days;

std::optional<Date> parse_date(std::string_view iso);  // YYYY-MM-DD
std::string format_date(Date d);
Date today_utc();

struct KBEntry {
  std::string id;
  Lang lang = Lang::en;
  std::vector<std::string> questions;
  std::string answer;       // literal text, empty when answer_template is set
  std::string answer_template;
  std::vector<std::string> tags;
  std::string source;
  Date updated{};
  Extras extras;

  bool operator==(const KBEntry&) const = default;
};

enum class SourceFormat { jsonl, markdown };

/// Parses one corpus document.
///
/// jsonl: one entry object per line (blank lines skipped, unknown fields
/// rejected). markdown: optional `key: value` header lines (lang, source,
/// updated, tags) before the first `###` heading; each `###` heading holds
/// question variants separated by " / " with an optional trailing `{#id}`;
/// the body up to the next heading is the answer.
///
/// `default_source` fills entries without a source; `today` bounds `updated`.
/// Throws Error(ParseError) with the line or section, or Error(DuplicateId).
std::vector<KBEntry> ingest_source(std::string_view document, SourceFormat format, Date today,
                                   const std::string& default_source = {});

std::optional<SourceFormat> format_for_path(const std::filesystem::path& path);

nlohmann::json to_json(const KBEntry& e);
std::string to_jsonl(const std::vector<KBEntry>& entries);

// The entry store. Re-ingesting a source replaces every entry attributed to it.
class KnowledgeBase {
 public:
  /// Merges entries, dropping those previously attributed to any source in
  /// `incoming`. Throws Error(DuplicateId) when an id would collide.
  void merge(const std::vector<KBEntry>& incoming);

  // Reads every *.jsonl / *.md file in `dir` in name order.
  static KnowledgeBase load_dir(const std::filesystem::path& dir, Date today);

  const std::vector<KBEntry>& entries() const { return entries_; }  // sorted by id
  const KBEntry* find(std::string_view id) const;
  std::size_t size() const { return entries_.size(); }

  bool operator==(const KnowledgeBase&) const = default;

 private:
  std::vector<KBEntry> entries_;
};

struct IndexConfig {
  std::size_t cluster_min = 32;
  std::uint64_t seed = 7;
  std::size_t max_iter = 100;
};

// Per-language retrieval structures. Positions index the parallel vectors.
struct LangIndex {
  vectors::VectorizerState vectorizer;
  std::vector<std::string> entry_ids;                               // sorted
  std::vector<vectors::DocumentVector> entry_vectors;               // union of question terms
  std::vector<std::vector<vectors::DocumentVector>> variant_vectors;  // one per question
  std::vector<std::vector<std::string>> entry_terms;                // sorted, unique
  std::optional<vectors::Clustering> clustering;
  std::vector<std::vector<std::size_t>> members;  // cluster id -> positions
  std::vector<double> radius;                     // cluster id -> max variant distance to centroid
};

struct KBIndex {
  std::map<Lang, LangIndex> langs;
  std::map<std::string, KBEntry, std::less<>> entries;
  text::TextPipeline pipeline;
  std::chrono::system_clock::time_point built_at;

  const KBEntry* entry(std::string_view id) const;
  const LangIndex* lang(Lang l) const;
  std::size_t size() const { return entries.size(); }
};

/// Fits one vectorizer per language over all question variants. Entries in a
/// language are clustered with k = ceil(sqrt(n)) once n >= cluster_min.
/// Throws Error(EmptyKB) for a language in `languages` with no entries.
KBIndex rebuild_index(const std::vector<KBEntry>& entries, const IndexConfig& config,
                      const text::TextPipeline& pipeline, const std::vector<Lang>& languages = {Lang::en, Lang::ar});

struct StaleEntry {
  std::string id;
  long age_days = 0;

  bool operator==(const StaleEntry&) const = default;
};

/// Entries with now - updated > window_days, oldest first (id ascending on ties).
std::vector<StaleEntry> staleness_report(const std::vector<KBEntry>& entries, Date now, long window_days = 14);

struct QueryHit {
  const KBEntry* entry;
  double score;
};

/// Text pipeline, vectorize, then retrieve_candidates. Throws Error(EmptyIndex).
std::vector<QueryHit> query(std::string_view text, Lang lang, const KBIndex& index, std::size_t top_n);

}  // namespace rafiq::kb
