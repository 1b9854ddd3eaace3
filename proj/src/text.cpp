#include "rafiq/text.hpp"

#include <fstream>
#include <sstream>

namespace rafiq::text {

namespace {

struct SourcedChar {
  char32_t cp;
  std::size_t begin;
  std::size_t end;
};

constexpr std::size_t kNoSource = static_cast<std::size_t>(-1);

std::vector<SourcedChar> decode_with_offsets(std::string_view s, Warnings* warnings) {
  std::vector<SourcedChar> out;
  out.reserve(s.size());
  std::size_t i = 0;
  std::size_t dropped = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    // Reject overlong forms, surrogates and out-of-range values.
    if (ok) {
      if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
          (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        ok = false;
      }
    }
    if (!ok) {
      ++dropped;
      ++i;
      continue;
    }
    out.push_back({cp, i, i + len});
    i += len;
  }
  if (dropped > 0 && warnings != nullptr) {
    warnings->push_back("dropped " + std::to_string(dropped) + " invalid UTF-8 byte(s)");
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return c == U' ' || (c >= U'\t' && c <= U'\r') || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

// Zero-width and bidi control characters carry no content.
bool is_invisible(char32_t c) {
  return (c >= 0x200B && c <= 0x200F) || (c >= 0x202A && c <= 0x202E) ||
         (c >= 0x2060 && c <= 0x2069) || c == 0xFEFF;
}

bool is_digit(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= 0x0660 && c <= 0x0669) || (c >= 0x06F0 && c <= 0x06F9);
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E) || c < 0x20 || c == 0x7F;
  }
  if (c >= 0xA1 && c <= 0xBF) {
    // ordinal indicators, superscripts, micro sign and fractions are not punctuation
    return c != 0xAA && c != 0xB2 && c != 0xB3 && c != 0xB5 && c != 0xB9 && c != 0xBA &&
           c != 0xBC && c != 0xBD && c != 0xBE;
  }
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2010 && c <= 0x2027) return true;
  if (c >= 0x2030 && c <= 0x205E) return true;
  if (c == 0x060C || c == 0x060D || c == 0x061B || c == 0x061E || c == 0x061F) return true;
  if (c >= 0x066A && c <= 0x066D) return true;
  if (c == 0x06D4) return true;
  if (c >= 0x3001 && c <= 0x3003) return true;
  return false;
}

constexpr char32_t kTatweel = 0x0640;

char32_t fold_arabic(char32_t c) {
  switch (c) {
    case 0x0622:  // alef with madda
    case 0x0623:  // alef with hamza above
    case 0x0625:  // alef with hamza below
    case 0x0671:  // alef wasla
      return 0x0627;
    case 0x0649:  // alef maqsura
      return 0x064A;
    case 0x0629:  // ta marbuta
      return 0x0647;
    default:
      return c;
  }
}

enum class CharClass { space, letter, digit };

std::vector<SourcedChar> normalize_sourced(std::string_view raw, Lang lang, Warnings* warnings) {
  const auto decoded = decode_with_offsets(raw, warnings);
  std::vector<SourcedChar> out;
  out.reserve(decoded.size());
  CharClass prev = CharClass::space;
  for (SourcedChar sc : decoded) {
    char32_t c = sc.cp;
    // Dropped marks still belong to the surface of the token they sit in.
    auto absorb = [&] {
      if (!out.empty() && out.back().cp != U' ') out.back().end = sc.end;
    };
    if (is_invisible(c)) {
      absorb();
      continue;
    }
    if (lang == Lang::ar) {
      if (is_arabic_diacritic(c) || c == kTatweel) {
        absorb();
        continue;
      }
      c = fold_arabic(c);
    } else if (c >= U'A' && c <= U'Z') {
      c = c - U'A' + U'a';
    }
    if (is_space(c) || is_punct(c)) {
      prev = CharClass::space;
      if (!out.empty() && out.back().cp != U' ') out.push_back({U' ', kNoSource, kNoSource});
      continue;
    }
    const CharClass cls = is_digit(c) ? CharClass::digit : CharClass::letter;
    if (prev != CharClass::space && prev != cls) out.push_back({U' ', kNoSource, kNoSource});
    out.push_back({c, sc.begin, sc.end});
    prev = cls;
  }
  if (!out.empty() && out.back().cp == U' ') out.pop_back();
  return out;
}

}  // namespace

bool is_arabic_diacritic(char32_t c) {
  return (c >= 0x0610 && c <= 0x061A) || (c >= 0x064B && c <= 0x065F) || c == 0x0670 ||
         (c >= 0x06D6 && c <= 0x06ED);
}

std::u32string decode_utf8(std::string_view s, Warnings* warnings) {
  std::u32string out;
  for (const auto& sc : decode_with_offsets(s, warnings)) out.push_back(sc.cp);
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

std::string normalize(std::string_view raw, Lang lang, Warnings* warnings) {
  std::string out;
  for (const auto& sc : normalize_sourced(raw, lang, warnings)) append_utf8(out, sc.cp);
  return out;
}

std::vector<Token> tokenize(std::string_view raw, Lang lang, Warnings* warnings) {
  const auto chars = normalize_sourced(raw, lang, warnings);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t j = i;
    while (j < chars.size() && chars[j].cp != U' ') ++j;
    Token tok;
    for (std::size_t k = i; k < j; ++k) append_utf8(tok.normalized, chars[k].cp);
    const std::size_t begin = chars[i].begin;
    const std::size_t end = chars[j - 1].end;
    tok.surface = (begin != kNoSource && end != kNoSource && end > begin)
                      ? std::string(raw.substr(begin, end - begin))
                      : tok.normalized;
    tok.position = tokens.size();
    tokens.push_back(std::move(tok));
    i = j + 1;
  }
  return tokens;
}

StopwordList::StopwordList(Lang lang, const std::vector<std::string>& words) {
  for (const auto& w : words) {
    auto n = normalize(w, lang);
    if (!n.empty()) words_.insert(std::move(n));
  }
}

StopwordList StopwordList::parse(Lang lang, std::string_view content) {
  std::vector<std::string> words;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    // a line may hold a multi-word entry after normalization; keep each word
    for (const auto& tok : tokenize(line, lang)) words.push_back(tok.normalized);
  }
  return StopwordList(lang, words);
}

StopwordList StopwordList::load(Lang lang, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read stopword list " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(lang, ss.str());
}

bool StopwordList::contains(std::string_view normalized) const {
  return words_.find(normalized) != words_.end();
}

std::vector<Token> remove_stopwords(const std::vector<Token>& tokens, const StopwordList& stopwords) {
  std::vector<Token> kept;
  for (const auto& tok : tokens) {
    if (!stopwords.contains(tok.normalized)) {
      kept.push_back(tok);
      kept.back().position = kept.size() - 1;
    }
  }
  if (kept.empty()) return tokens;
  return kept;
}

std::vector<Token> TextPipeline::tokens(std::string_view raw, Lang lang) const {
  return remove_stopwords(tokenize(raw, lang), stopwords(lang));
}

std::vector<std::string> TextPipeline::terms(std::string_view raw, Lang lang) const {
  return normalized_forms(tokens(raw, lang));
}

const StopwordList& TextPipeline::stopwords(Lang lang) const {
  static const StopwordList empty;
  auto it = stopwords_.find(lang);
  return it == stopwords_.end() ? empty : it->second;
}

std::vector<std::string> normalized_forms(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.normalized);
  return out;
}

}  // namespace rafiq::text
