#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rafiq {

enum class Lang { en, ar };

inline constexpr Lang kAllLangs[] = {Lang::en, Lang::ar};

inline std::string_view to_string(Lang lang) { return lang == Lang::en ? "en" : "ar"; }

inline std::optional<Lang> parse_lang(std::string_view s) {
  if (s == "en") return Lang::en;
  if (s == "ar") return Lang::ar;
  return std::nullopt;
}

enum class ErrorCode {
  EmptyCorpus,
  BadK,
  EmptyTrainingSet,
  DimensionMismatch,
  EmptyCatalog,
  EmptyIndex,
  ParseError,
  DuplicateId,
  EmptyKB,
  SyntaxError,
  SchemaError,
  SessionMismatch,
  UnknownFlow,
  UnknownSession,
  MissingSlot,
  UnknownTemplate,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rafiq
