#pragma once

// Independent reference computations. They share no code with the library:
// plain maps keyed by strings, formulas written out directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace oracle {

using SparseVec = std::map<std::string, double>;

// idf(t) = ln((1 + N) / (1 + df)) + 1
inline std::map<std::string, double> idf(const std::vector<std::vector<std::string>>& corpus) {
  std::map<std::string, int> df;
  for (const auto& doc : corpus) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++df[t];
  }
  std::map<std::string, double> out;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [t, d] : df) out[t] = std::log((1.0 + n) / (1.0 + d)) + 1.0;
  return out;
}

inline SparseVec tfidf(const std::vector<std::string>& doc, const std::map<std::string, double>& idf) {
  SparseVec v;
  for (const auto& t : doc) {
    auto it = idf.find(t);
    if (it != idf.end()) v[t] += it->second;
  }
  double sq = 0.0;
  for (const auto& [_, w] : v) sq += w * w;
  if (sq == 0.0) return {};
  for (auto& [_, w] : v) w /= std::sqrt(sq);
  return v;
}

inline double cosine(const SparseVec& a, const SparseVec& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, w] : a) {
    na += w * w;
    auto it = b.find(t);
    if (it != b.end()) d += w * it->second;
  }
  for (const auto& [_, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return d / (std::sqrt(na) * std::sqrt(nb));
}

// Minimum SSE over every assignment of the points to k non-empty clusters.
inline double exhaustive_min_sse(const std::vector<std::vector<double>>& points, std::size_t k) {
  const std::size_t n = points.size();
  const std::size_t dim = points.empty() ? 0 : points[0].size();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::size_t> count(k, 0);
    for (auto l : label) ++count[l];
    if (std::all_of(count.begin(), count.end(), [](std::size_t c) { return c > 0; })) {
      std::vector<std::vector<double>> mean(k, std::vector<double>(dim, 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) mean[label[i]][d] += points[i][d] / static_cast<double>(count[label[i]]);
      }
      double sse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) sse += (points[i][d] - mean[label[i]][d]) * (points[i][d] - mean[label[i]][d]);
      }
      best = std::min(best, sse);
    }
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

// The documented Arabic rule table applied code point by code point.
inline std::u32string arabic_fold(const std::u32string& in) {
  std::u32string out;
  for (char32_t c : in) {
    const bool harakat = (c >= 0x064B && c <= 0x065F) || c == 0x0670 || (c >= 0x0610 && c <= 0x061A) ||
                         (c >= 0x06D6 && c <= 0x06ED);
    if (harakat || c == 0x0640) continue;
    if (c == 0x0623 || c == 0x0625 || c == 0x0622 || c == 0x0671) c = 0x0627;
    if (c == 0x0649) c = 0x064A;
    if (c == 0x0629) c = 0x0647;
    out.push_back(c);
  }
  return out;
}

inline std::u32string utf8_to_u32(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    int len = b < 0x80 ? 1 : (b >> 5) == 6 ? 2 : (b >> 4) == 14 ? 3 : 4;
    char32_t c = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    for (int k = 1; k < len; ++k) c = (c << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(c);
    i += len;
  }
  return out;
}

// Reachable step ids from a raw flow document, following next and case targets.
inline std::set<std::string> reachable_steps(const nlohmann::json& flow) {
  std::set<std::string> seen{flow["entry"].get<std::string>()};
  std::deque<std::string> queue{flow["entry"].get<std::string>()};
  while (!queue.empty()) {
    const auto id = queue.front();
    queue.pop_front();
    const auto& step = flow["steps"][id];
    std::vector<std::string> next;
    if (step.contains("next")) next.push_back(step["next"]);
    if (step.contains("cases")) {
      for (const auto& c : step["cases"]) next.push_back(c["next"]);
    }
    for (const auto& n : next) {
      if (seen.insert(n).second) queue.push_back(n);
    }
  }
  return seen;
}

// Deterministic generator for test inputs (SplitMix64).
struct Rng {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double uniform() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
};

}  // namespace oracle
