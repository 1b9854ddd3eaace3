#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rafiq/common.hpp"

namespace rafiq::text {

struct Token {
  std::string surface;
  std::string normalized;
  std::size_t position = 0;

  bool operator==(const Token&) const = default;
};

// Collects notices about dropped input (invalid UTF-8 and the like).
using Warnings = std::vector<std::string>;

/// Folds text into the canonical form used for matching.
///
/// English: ASCII lowercasing. Arabic: tashkeel and tatweel removed, alef
/// variants folded to bare alef, alef maqsura to ya, ta marbuta to ha.
/// Both languages replace punctuation with a space, split letter/digit runs,
/// collapse whitespace and trim. Invalid UTF-8 bytes are dropped and reported
/// through `warnings` when given.
std::string normalize(std::string_view raw, Lang lang, Warnings* warnings = nullptr);

/// Normalizes then splits on whitespace. Each token's surface is the span of
/// `raw` it was produced from.
std::vector<Token> tokenize(std::string_view raw, Lang lang, Warnings* warnings = nullptr);

// Decodes UTF-8, dropping invalid sequences. Exposed for tests and helpers.
std::u32string decode_utf8(std::string_view s, Warnings* warnings = nullptr);
std::string encode_utf8(std::u32string_view s);

bool is_arabic_diacritic(char32_t c);

class StopwordList {
 public:
  StopwordList() = default;

  /// Entries are normalized on insertion so they compare against token forms.
  StopwordList(Lang lang, const std::vector<std::string>& words);

  // One word per line, '#' starts a comment.
  static StopwordList parse(Lang lang, std::string_view content);
  static StopwordList load(Lang lang, const std::filesystem::path& path);

  bool contains(std::string_view normalized) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

/// Drops stopwords and re-indexes positions. Returns the input unchanged
/// when every token is a stopword.
std::vector<Token> remove_stopwords(const std::vector<Token>& tokens, const StopwordList& stopwords);

// tokenize + remove_stopwords with per-language lists.
class TextPipeline {
 public:
  TextPipeline() = default;
  explicit TextPipeline(std::map<Lang, StopwordList> stopwords) : stopwords_(std::move(stopwords)) {}

  std::vector<Token> tokens(std::string_view raw, Lang lang) const;
  std::vector<std::string> terms(std::string_view raw, Lang lang) const;

  const StopwordList& stopwords(Lang lang) const;

 private:
  std::map<Lang, StopwordList> stopwords_;
};

std::vector<std::string> normalized_forms(const std::vector<Token>& tokens);

}  // namespace rafiq::text
