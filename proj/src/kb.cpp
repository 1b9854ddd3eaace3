#include "rafiq/kb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "rafiq/nlu.hpp"

namespace rafiq::kb {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + sep.size();
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& where, const std::string& reason) {
  throw Error(ErrorCode::ParseError, where + ": " + reason);
}

Date checked_date(std::string_view value, Date today, const std::string& where) {
  auto d = parse_date(value);
  if (!d) parse_fail(where, "'updated' is not a valid YYYY-MM-DD date: " + std::string(value));
  if (*d > today) parse_fail(where, "'updated' " + std::string(value) + " lies in the future");
  return *d;
}

KBEntry entry_from_json(const json& j, Date today, const std::string& default_source, const std::string& where) {
  constexpr auto code = ErrorCode::ParseError;
  detail::reject_unknown(j, {"id", "lang", "questions", "answer", "tags", "source", "updated", "extras"}, where, code);
  KBEntry e;
  e.id = detail::string_field(j, "id", where, true, code);
  if (e.id.empty()) parse_fail(where, "empty id");
  const auto lang = parse_lang(detail::string_field(j, "lang", where, true, code));
  if (!lang) parse_fail(where, "'lang' must be \"en\" or \"ar\"");
  e.lang = *lang;
  if (!j.contains("questions")) parse_fail(where, "missing field 'questions'");
  e.questions = detail::string_list(j["questions"], where + ": questions", code);
  std::erase_if(e.questions, [](const std::string& q) { return trim(q).empty(); });
  if (e.questions.empty()) parse_fail(where, "an entry needs at least one question");

  auto answer = j.find("answer");
  if (answer == j.end()) parse_fail(where, "missing field 'answer'");
  if (answer->is_string()) {
    e.answer = answer->get<std::string>();
    if (trim(e.answer).empty()) parse_fail(where, "empty answer");
  } else if (answer->is_object()) {
    detail::reject_unknown(*answer, {"template"}, where + ": answer", code);
    e.answer_template = detail::string_field(*answer, "template", where + ": answer", true, code);
  } else {
    parse_fail(where, "'answer' must be a string or {\"template\": id}");
  }

  if (j.contains("tags")) e.tags = detail::string_list(j["tags"], where + ": tags", code);
  e.source = detail::string_field(j, "source", where, false, code);
  if (e.source.empty()) e.source = default_source;
  if (e.source.empty()) parse_fail(where, "missing field 'source'");
  e.updated = checked_date(detail::string_field(j, "updated", where, true, code), today, where);
  if (auto ex = j.find("extras"); ex != j.end()) {
    try {
      e.extras = extras_from_json(*ex, where + ": extras");
    } catch (const Error& err) {
      throw Error(ErrorCode::ParseError, err.what());
    }
  }
  return e;
}

std::vector<KBEntry> ingest_jsonl(std::string_view document, Date today, const std::string& default_source) {
  std::vector<KBEntry> out;
  std::istringstream in{std::string(document)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(where, e.what());
    }
    out.push_back(entry_from_json(j, today, default_source, where));
  }
  return out;
}

std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) != 0 && u < 0x80) {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (!out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "kb" : out;
}

std::vector<KBEntry> ingest_markdown(std::string_view document, Date today, const std::string& default_source) {
  struct Section {
    std::size_t line;
    std::string heading;
    std::vector<std::string> body;
  };
  std::optional<Lang> lang;
  std::string source = default_source;
  std::optional<Date> updated;
  std::vector<std::string> tags;
  std::vector<Section> sections;

  std::istringstream in{std::string(document)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("### ", 0) == 0 || line == "###") {
      sections.push_back({line_no, trim(std::string_view(line).substr(3)), {}});
      continue;
    }
    if (!sections.empty()) {
      sections.back().body.push_back(line);
      continue;
    }
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.find(':');
    const std::string where = "line " + std::to_string(line_no);
    if (colon == std::string::npos) parse_fail(where, "expected 'key: value' before the first ### heading");
    const std::string key = trim(std::string_view(t).substr(0, colon));
    const std::string value = trim(std::string_view(t).substr(colon + 1));
    if (key == "lang") {
      lang = parse_lang(value);
      if (!lang) parse_fail(where, "'lang' must be en or ar");
    } else if (key == "source") {
      source = value;
    } else if (key == "updated") {
      updated = checked_date(value, today, where);
    } else if (key == "tags") {
      tags.clear();
      for (auto& tag : split(value, ",")) {
        if (!tag.empty()) tags.push_back(tag);
      }
    } else {
      parse_fail(where, "unknown header key '" + key + "'");
    }
  }
  if (!lang) parse_fail("header", "missing 'lang'");
  if (!updated) parse_fail("header", "missing 'updated'");
  if (source.empty()) parse_fail("header", "missing 'source'");

  std::vector<KBEntry> out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& sec = sections[i];
    const std::string where = "section at line " + std::to_string(sec.line);
    std::string heading = sec.heading;
    std::string id;
    if (auto open = heading.rfind("{#"); open != std::string::npos && heading.back() == '}') {
      id = trim(std::string_view(heading).substr(open + 2, heading.size() - open - 3));
      heading = trim(std::string_view(heading).substr(0, open));
    }
    if (id.empty()) id = slug(source) + "_" + std::to_string(i + 1);
    KBEntry e;
    e.id = id;
    e.lang = *lang;
    for (auto& q : split(heading, " / ")) {
      if (!q.empty()) e.questions.push_back(q);
    }
    if (e.questions.empty()) parse_fail(where, "heading has no question text");
    std::string body;
    for (const auto& b : sec.body) body += b + "\n";
    e.answer = trim(body);
    if (e.answer.empty()) parse_fail(where, "section has no answer text");
    e.tags = tags;
    e.source = source;
    e.updated = *updated;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::optional<Date> parse_date(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
  }
  y = std::stoi(std::string(iso.substr(0, 4)));
  m = static_cast<unsigned>(std::stoi(std::string(iso.substr(5, 2))));
  d = static_cast<unsigned>(std::stoi(std::string(iso.substr(8, 2))));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

Date today_utc() { return std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now()); }

std::vector<KBEntry> ingest_source(std::string_view document, SourceFormat format, Date today,
                                   const std::string& default_source) {
  auto entries = format == SourceFormat::jsonl ? ingest_jsonl(document, today, default_source)
                                               : ingest_markdown(document, today, default_source);
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) throw Error(ErrorCode::DuplicateId, e.id);
  }
  return entries;
}

std::optional<SourceFormat> format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl") return SourceFormat::jsonl;
  if (ext == ".md" || ext == ".markdown") return SourceFormat::markdown;
  return std::nullopt;
}

json to_json(const KBEntry& e) {
  json j;
  j["id"] = e.id;
  j["lang"] = std::string(to_string(e.lang));
  j["questions"] = e.questions;
  if (e.answer_template.empty()) {
    j["answer"] = e.answer;
  } else {
    j["answer"] = json{{"template", e.answer_template}};
  }
  j["tags"] = e.tags;
  j["source"] = e.source;
  j["updated"] = format_date(e.updated);
  if (!e.extras.empty()) j["extras"] = to_json(e.extras);
  return j;
}

std::string to_jsonl(const std::vector<KBEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += to_json(e).dump() + "\n";
  return out;
}

void KnowledgeBase::merge(const std::vector<KBEntry>& incoming) {
  std::set<std::string> sources;
  for (const auto& e : incoming) sources.insert(e.source);
  std::vector<KBEntry> next;
  for (const auto& e : entries_) {
    if (!sources.contains(e.source)) next.push_back(e);
  }
  std::set<std::string> ids;
  for (const auto& e : next) ids.insert(e.id);
  for (const auto& e : incoming) {
    if (!ids.insert(e.id).second) throw Error(ErrorCode::DuplicateId, e.id);
    next.push_back(e);
  }
  std::sort(next.begin(), next.end(), [](const KBEntry& a, const KBEntry& b) { return a.id < b.id; });
  entries_ = std::move(next);
}

KnowledgeBase KnowledgeBase::load_dir(const std::filesystem::path& dir, Date today) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, "KB directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& item : std::filesystem::directory_iterator(dir)) {
    if (item.is_regular_file() && format_for_path(item.path())) files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  KnowledgeBase kb;
  for (const auto& f : files) {
    try {
      kb.merge(ingest_source(detail::read_file(f), *format_for_path(f), today, f.filename().string()));
    } catch (const Error& e) {
      throw Error(e.code(), f.filename().string() + ": " + e.what());
    }
  }
  return kb;
}

const KBEntry* KnowledgeBase::find(std::string_view id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const KBEntry& e, std::string_view v) { return e.id < v; });
  return (it != entries_.end() && it->id == id) ? &*it : nullptr;
}

const KBEntry* KBIndex::entry(std::string_view id) const {
  auto it = entries.find(id);
  return it == entries.end() ? nullptr : &it->second;
}

const LangIndex* KBIndex::lang(Lang l) const {
  auto it = langs.find(l);
  return it == langs.end() ? nullptr : &it->second;
}

KBIndex rebuild_index(const std::vector<KBEntry>& entries, const IndexConfig& config,
                      const text::TextPipeline& pipeline, const std::vector<Lang>& languages) {
  KBIndex index;
  index.pipeline = pipeline;
  index.built_at = std::chrono::system_clock::now();
  std::map<Lang, std::vector<const KBEntry*>> by_lang;
  for (const auto& e : entries) {
    if (!index.entries.emplace(e.id, e).second) throw Error(ErrorCode::DuplicateId, e.id);
  }
  for (const auto& [id, e] : index.entries) by_lang[e.lang].push_back(&e);
  for (Lang l : languages) {
    if (by_lang[l].empty()) throw Error(ErrorCode::EmptyKB, "no entries for language " + std::string(to_string(l)));
  }
  if (entries.empty()) throw Error(ErrorCode::EmptyKB, "no entries");

  for (auto& [lang, list] : by_lang) {
    if (list.empty()) continue;
    LangIndex li;
    std::vector<std::vector<std::vector<std::string>>> variant_terms;
    std::vector<std::vector<std::string>> corpus;
    for (const KBEntry* e : list) {
      li.entry_ids.push_back(e->id);
      auto& vt = variant_terms.emplace_back();
      for (const auto& q : e->questions) {
        vt.push_back(pipeline.terms(q, lang));
        corpus.push_back(vt.back());
      }
    }
    li.vectorizer = vectors::fit_vocabulary(corpus);
    for (const auto& vt : variant_terms) {
      std::vector<std::string> all;
      auto& variants = li.variant_vectors.emplace_back();
      for (const auto& terms : vt) {
        variants.push_back(vectors::vectorize(terms, li.vectorizer));
        all.insert(all.end(), terms.begin(), terms.end());
      }
      li.entry_vectors.push_back(vectors::vectorize(all, li.vectorizer));
      std::sort(all.begin(), all.end());
      all.erase(std::unique(all.begin(), all.end()), all.end());
      li.entry_terms.push_back(std::move(all));
    }
    const std::size_t n = li.entry_ids.size();
    if (n >= config.cluster_min && n > 0) {
      const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      li.clustering = vectors::kmeans(li.entry_vectors, k, config.seed, config.max_iter);
      li.members.assign(k, {});
      li.radius.assign(k, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        const std::size_t c = li.clustering->assignment[p];
        li.members[c].push_back(p);
        for (const auto& v : li.variant_vectors[p]) {
          li.radius[c] = std::max(li.radius[c], std::sqrt(vectors::squared_distance(v, li.clustering->centroids[c])));
        }
      }
    }
    index.langs.emplace(lang, std::move(li));
  }
  return index;
}

std::vector<StaleEntry> staleness_report(const std::vector<KBEntry>& entries, Date now, long window_days) {
  std::vector<StaleEntry> out;
  for (const auto& e : entries) {
    const long age = (now - e.updated).count();
    if (age > window_days) out.push_back({e.id, age});
  }
  std::sort(out.begin(), out.end(), [](const StaleEntry& a, const StaleEntry& b) {
    return a.age_days != b.age_days ? a.age_days > b.age_days : a.id < b.id;
  });
  return out;
}

std::vector<QueryHit> query(std::string_view text, Lang lang, const KBIndex& index, std::size_t top_n) {
  const LangIndex* li = index.lang(lang);
  if (li == nullptr || li->entry_ids.empty()) {
    throw Error(ErrorCode::EmptyIndex, "no index for language " + std::string(to_string(lang)));
  }
  const auto q = vectors::vectorize(index.pipeline.terms(text, lang), li->vectorizer);
  std::vector<QueryHit> hits;
  for (const auto& c : nlu::retrieve_candidates(q, index, lang, top_n)) {
    hits.push_back({index.entry(c.entry_id), c.retrieval_score});
  }
  return hits;
}

}  // namespace rafiq::kb
