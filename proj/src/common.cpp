#include "rafiq/common.hpp"

namespace rafiq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyKB: return "EmptyKB";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::SessionMismatch: return "SessionMismatch";
    case ErrorCode::UnknownFlow: return "UnknownFlow";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
  }
  return "Error";
}

}  // namespace rafiq
