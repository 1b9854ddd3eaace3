#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rafiq/common.hpp"
#include "rafiq/nlu.hpp"

namespace rafiq::flow {

enum class StepKind { prompt, choice, branch, answer, kb_answer, end };

std::string_view to_string(StepKind kind);

struct Condition {
  enum class Kind { equals, contains_any, count_gte, otherwise };
  Kind kind = Kind::otherwise;
  std::vector<std::string> values;  // one value for equals
  std::size_t count = 0;            // count_gte

  bool operator==(const Condition&) const = default;
};

struct BranchCase {
  Condition when;
  std::string next;

  bool operator==(const BranchCase&) const = default;
};

struct Step {
  std::string id;
  StepKind kind = StepKind::end;
  std::map<Lang, std::string> prompt;                   // prompt, choice, kb_answer (optional)
  std::vector<std::string> options;                     // choice: canonical values
  std::map<Lang, std::vector<std::string>> option_labels;  // choice: display labels, index-aligned
  bool multi = false;
  std::string slot;  // written by prompt/choice, read by kb_answer
  std::string on;    // branch slot
  std::vector<BranchCase> cases;
  std::string template_id;  // answer
  std::string next;

  // Labels shown for `lang`, falling back to the canonical options.
  const std::vector<std::string>& labels(Lang lang) const;
  bool operator==(const Step&) const = default;
};

struct DialogFlow {
  std::string id;
  std::string trigger_intent;
  std::string entry;
  std::map<std::string, Step> steps;

  const Step* step(std::string_view id) const;
  bool operator==(const DialogFlow&) const = default;
};

// Structural error located at a step (or "-") and field.
class FlowSchemaError : public Error {
 public:
  FlowSchemaError(std::string step, std::string field, const std::string& reason)
      : Error(ErrorCode::SchemaError, "step '" + step + "' field '" + field + "': " + reason),
        step_(std::move(step)),
        field_(std::move(field)) {}

  const std::string& step() const { return step_; }
  const std::string& field() const { return field_; }

 private:
  std::string step_;
  std::string field_;
};

/// Throws Error(SyntaxError) for malformed JSON and FlowSchemaError for shape
/// problems: unknown or missing fields, bad branch conditions, and next/case
/// targets that name no step.
DialogFlow parse_flow(std::string_view document);
DialogFlow load_flow(const std::filesystem::path& path);

nlohmann::json to_json(const DialogFlow& flow);
std::string serialize_flow(const DialogFlow& flow);

// Successor step ids (next plus every branch target).
std::vector<std::string> successors(const Step& step);

struct Reachability {
  std::vector<std::string> reachable;    // sorted
  std::vector<std::string> unreachable;  // sorted
};

Reachability reachability(const DialogFlow& flow);

struct Diagnostic {
  std::string flow_id;
  std::string step_id;  // "-" for flow-level findings
  std::string code;
  std::string message;

  auto operator<=>(const Diagnostic&) const = default;
};

nlohmann::json to_json(const Diagnostic& d);

/// Static checks over a parsed flow set. Codes: UnknownIntent,
/// DuplicateFlowId, DuplicateTrigger, Unreachable, NoReachableEnd,
/// MissingLanguage, UnknownTemplate, UnwrittenSlot. Sorted output; empty
/// means valid.
std::vector<Diagnostic> validate_flows(const std::vector<DialogFlow>& flows, const nlu::IntentCatalog& catalog,
                                       const std::set<std::string>& template_ids, const std::vector<Lang>& languages);

struct FlowDocument {
  std::string name;  // file name, used when the flow id cannot be read
  std::string content;
};

/// Parses each document and validates the ones that parse. Parse failures
/// become SyntaxError / SchemaError diagnostics.
std::vector<Diagnostic> validate_documents(const std::vector<FlowDocument>& documents,
                                           const nlu::IntentCatalog& catalog,
                                           const std::set<std::string>& template_ids,
                                           const std::vector<Lang>& languages);

}  // namespace rafiq::flow
