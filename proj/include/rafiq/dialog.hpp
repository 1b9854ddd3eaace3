#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "rafiq/common.hpp"
#include "rafiq/flowdsl.hpp"
#include "rafiq/kb.hpp"
#include "rafiq/nlu.hpp"

namespace rafiq::dialog {

// A slot holds one text or, for multi-choice steps and list entity types, a list.
using SlotValue = std::variant<std::string, std::vector<std::string>>;
using Slots = std::map<std::string, SlotValue>;

std::string slot_text(const SlotValue& v);  // lists joined with ", "
nlohmann::json to_json(const SlotValue& v);

struct ActiveStep {
  std::string flow_id;
  std::string step_id;

  bool operator==(const ActiveStep&) const = default;
};

struct DialogState {
  std::string session_id;
  std::optional<Lang> lang;  // unset until the user picks a language
  std::optional<ActiveStep> active;
  std::optional<std::string> pending_intent;  // confident intent not yet acted on
  std::optional<std::string> awaiting_slot;   // slot asked for before an answer step
  Slots slots;
  std::optional<nlu::ScoredIntent> last_intent;
  std::vector<nlu::Entity> last_entities;
  std::size_t turn_count = 0;

  bool operator==(const DialogState&) const = default;
};

nlohmann::json to_json(const DialogState& s);

/// Fresh state with a random 128-bit (version 4 UUID) session id.
DialogState start_session(std::optional<Lang> lang);

// Flows keyed by id, with the trigger intent -> flow map the policy needs.
class FlowRegistry {
 public:
  FlowRegistry() = default;
  // The first flow wins a duplicated id or trigger; validate_flows reports those.
  explicit FlowRegistry(std::vector<flow::DialogFlow> flows);

  const flow::DialogFlow* find(std::string_view id) const;
  const flow::DialogFlow* by_intent(std::string_view intent) const;
  const std::map<std::string, flow::DialogFlow, std::less<>>& flows() const { return flows_; }
  std::size_t size() const { return flows_.size(); }

 private:
  std::map<std::string, flow::DialogFlow, std::less<>> flows_;
  std::map<std::string, std::string, std::less<>> by_intent_;
};

struct Utterance {
  std::string session_id;
  std::string text;
  Lang lang = Lang::en;
};

// Slots an answer template needs, and the choices offered when one is missing.
struct SlotElicitation {
  std::map<std::string, std::set<std::string>> needs;  // template id -> placeholder names
  std::map<std::string, std::map<Lang, std::vector<std::string>>> options;  // slot -> choices

  // Template that asks the user for `slot`.
  static std::string template_for(std::string_view slot) { return "ask_slot_" + std::string(slot); }
  bool operator==(const SlotElicitation&) const = default;
};

struct PolicyConfig {
  double kb_floor = 0.5;
  double suggest_low = 0.3;
  std::size_t suggest_count = 3;
  std::size_t top_n = 5;
  std::set<std::string> list_entity_types{"symptom"};
  SlotElicitation elicitation;
};

/// Parses user input against a choice step. Matching ignores case, Arabic
/// orthographic variants and punctuation, and accepts the canonical option or
/// its label in any language. Multi-choice input is split on ',' and '،'.
/// Returns canonical values, or nullopt when any part names no option.
std::optional<SlotValue> parse_choice(const flow::Step& step, std::string_view input, Lang lang);

bool condition_holds(const flow::Condition& c, const SlotValue* value);

/// Dialogue state tracking for one user turn.
///
/// Increments turn_count, replaces last_intent/last_entities and writes
/// entities into slots (list types are unioned, others overwritten). A
/// confident intent that differs from the active flow's trigger abandons the
/// flow and becomes pending, unless the text is a valid answer to the active
/// choice step (an option postback) or to a pending slot question.
/// Throws Error(SessionMismatch).
DialogState track(const DialogState& state, const nlu::IntentPrediction& prediction,
                  const std::vector<nlu::Entity>& entities, const Utterance& utterance, const FlowRegistry& flows,
                  const PolicyConfig& policy);

enum class ActionKind { ask, answer, kb_reply, suggest, confirm, fallback };

std::string_view to_string(ActionKind kind);

struct Action {
  ActionKind kind = ActionKind::fallback;
  std::string flow_id;  // ask
  std::string step_id;  // ask
  bool reask = false;   // ask after an invalid choice
  std::string slot;         // ask for a missing slot, rendered from template_id
  std::string template_id;  // answer
  Slots bindings;           // answer, kb_reply
  std::string entry_id;                  // kb_reply; confirm: the entry awaiting confirmation
  std::vector<std::string> suggestions;  // suggest: entry ids

  bool operator==(const Action&) const = default;
};

nlohmann::json to_json(const Action& a);

struct Decision {
  DialogState state;
  std::vector<Action> actions;  // never empty
};

// Read-only resources the policy consults.
struct PolicyContext {
  const FlowRegistry& flows;
  const kb::KBIndex& index;
  const vectors::ForestModel* model = nullptr;
  PolicyConfig config;
};

/// Dialogue policy, in priority order:
///  1. an active flow consumes the text as input for its pending step;
///  2. a pending confident intent with a flow enters that flow;
///  3. a pending intent without a flow, or retrieval >= kb_floor, replies from
///     the KB through select_response;
///  4. retrieval inside (suggest_low, kb_floor) suggests the top questions;
///  5. fallback.
/// Flow steps that need no input (branch, answer, input-free kb_answer) run on
/// in the same turn, so one decision may carry several actions. An answer
/// whose template needs an unbound slot with configured choices first asks
/// for that slot.
/// Throws Error(UnknownFlow) when the active flow is not registered.
Decision decide(const DialogState& state, const std::vector<nlu::CandidateResponse>& candidates,
                std::string_view text, const PolicyContext& context);

/// Consumes `user_value` at the active step (if given), then follows next and
/// branch edges until a step waits for input or the flow ends. An invalid
/// choice leaves the state untouched and re-asks the same step.
Decision advance_flow(const DialogState& state, const flow::DialogFlow& flow,
                      const std::optional<std::string>& user_value, const PolicyContext& context);

/// Enters `flow` at its entry step.
Decision enter_flow(const DialogState& state, const flow::DialogFlow& flow, const PolicyContext& context);

}  // namespace rafiq::dialog
