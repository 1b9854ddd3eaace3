#include "rafiq/dialog.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "rafiq/text.hpp"

namespace rafiq::dialog {

using nlohmann::json;

std::string slot_text(const SlotValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  std::string out;
  for (const auto& item : std::get<std::vector<std::string>>(v)) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

json to_json(const SlotValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::vector<std::string>>(v);
}

json to_json(const DialogState& s) {
  json j;
  j["session_id"] = s.session_id;
  j["language"] = s.lang ? json(std::string(to_string(*s.lang))) : json(nullptr);
  j["active"] = s.active ? json{{"flow", s.active->flow_id}, {"step", s.active->step_id}} : json(nullptr);
  j["pending_intent"] = s.pending_intent ? json(*s.pending_intent) : json(nullptr);
  j["awaiting_slot"] = s.awaiting_slot ? json(*s.awaiting_slot) : json(nullptr);
  j["slots"] = json::object();
  for (const auto& [name, value] : s.slots) j["slots"][name] = to_json(value);
  j["last_intent"] =
      s.last_intent ? json{{"name", s.last_intent->name}, {"score", s.last_intent->score}} : json(nullptr);
  j["last_entities"] = json::array();
  for (const auto& e : s.last_entities) {
    j["last_entities"].push_back(json{{"type", e.type}, {"value", e.value}, {"start", e.start}, {"end", e.end}});
  }
  j["turn_count"] = s.turn_count;
  return j;
}

DialogState start_session(std::optional<Lang> lang) {
  static thread_local std::random_device device;
  std::array<std::uint8_t, 16> bytes{};
  for (std::size_t i = 0; i < bytes.size(); i += 4) {
    const std::uint32_t r = device();
    for (std::size_t b = 0; b < 4; ++b) bytes[i + b] = static_cast<std::uint8_t>(r >> (8 * b));
  }
  bytes[6] = static_cast<std::uint8_t>((bytes[6] & 0x0F) | 0x40);
  bytes[8] = static_cast<std::uint8_t>((bytes[8] & 0x3F) | 0x80);
  std::string id;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) id += '-';
    char hex[3];
    std::snprintf(hex, sizeof hex, "%02x", bytes[i]);
    id += hex;
  }
  DialogState s;
  s.session_id = std::move(id);
  s.lang = lang;
  return s;
}

FlowRegistry::FlowRegistry(std::vector<flow::DialogFlow> flows) {
  for (auto& f : flows) {
    if (flows_.contains(f.id)) continue;
    by_intent_.emplace(f.trigger_intent, f.id);
    flows_.emplace(f.id, std::move(f));
  }
}

const flow::DialogFlow* FlowRegistry::find(std::string_view id) const {
  auto it = flows_.find(id);
  return it == flows_.end() ? nullptr : &it->second;
}

const flow::DialogFlow* FlowRegistry::by_intent(std::string_view intent) const {
  auto it = by_intent_.find(intent);
  return it == by_intent_.end() ? nullptr : find(it->second);
}

namespace {

// Comparison key for option matching: Arabic folding plus ASCII lowercasing.
std::string choice_key(std::string_view s) { return text::normalize(text::normalize(s, Lang::ar), Lang::en); }

std::optional<std::string> match_option(const flow::Step& step, std::string_view part) {
  const std::string key = choice_key(part);
  if (key.empty()) return std::nullopt;
  for (std::size_t i = 0; i < step.options.size(); ++i) {
    if (choice_key(step.options[i]) == key) return step.options[i];
    for (const auto& [_, labels] : step.option_labels) {
      if (choice_key(labels[i]) == key) return step.options[i];
    }
  }
  return std::nullopt;
}

std::vector<std::string> split_multi(std::string_view input) {
  static const std::string arabic_comma = "\xD8\x8C";  // U+060C
  std::vector<std::string> parts;
  std::string current;
  for (std::size_t i = 0; i < input.size();) {
    if (input[i] == ',') {
      parts.push_back(current);
      current.clear();
      ++i;
    } else if (input.substr(i, arabic_comma.size()) == arabic_comma) {
      parts.push_back(current);
      current.clear();
      i += arabic_comma.size();
    } else {
      current += input[i++];
    }
  }
  parts.push_back(current);
  return parts;
}

// The offered choice for `slot` that `input` names, if any.
std::optional<std::string> match_slot_option(const SlotElicitation& elicitation, const std::string& slot,
                                             std::string_view input) {
  auto it = elicitation.options.find(slot);
  if (it == elicitation.options.end()) return std::nullopt;
  const std::string key = choice_key(input);
  if (key.empty() || it->second.empty()) return std::nullopt;
  // Lists are index-aligned across languages; the first language holds the canonical value.
  const auto& canonical = it->second.begin()->second;
  for (const auto& [_, choices] : it->second) {
    for (std::size_t i = 0; i < choices.size(); ++i) {
      if (choice_key(choices[i]) == key) return i < canonical.size() ? canonical[i] : choices[i];
    }
  }
  return std::nullopt;
}

// Slot text in the session language: canonical choice values become the
// labels of the choice step that wrote the slot, so retrieval sees user words.
std::string localized_slot_text(const flow::DialogFlow& flow, const std::string& slot, const SlotValue& value,
                                Lang lang) {
  const flow::Step* writer = nullptr;
  for (const auto& [_, st] : flow.steps) {
    if (st.kind == flow::StepKind::choice && st.slot == slot) writer = &st;
  }
  if (writer == nullptr) return slot_text(value);
  const auto& labels = writer->labels(lang);
  auto label = [&](const std::string& v) {
    auto pos = std::find(writer->options.begin(), writer->options.end(), v);
    const auto i = static_cast<std::size_t>(pos - writer->options.begin());
    return pos != writer->options.end() && i < labels.size() ? labels[i] : v;
  };
  if (const auto* one = std::get_if<std::string>(&value)) return label(*one);
  std::vector<std::string> out;
  for (const auto& v : std::get<std::vector<std::string>>(value)) out.push_back(label(v));
  return slot_text(SlotValue{out});
}

}  // namespace

std::optional<SlotValue> parse_choice(const flow::Step& step, std::string_view input, Lang) {
  if (step.kind != flow::StepKind::choice) return std::nullopt;
  // The whole input naming one option wins, so labels containing commas still work.
  if (auto whole = match_option(step, input)) {
    if (!step.multi) return SlotValue{*whole};
    return SlotValue{std::vector<std::string>{*whole}};
  }
  if (!step.multi) return std::nullopt;
  std::vector<std::string> picked;
  for (const auto& part : split_multi(input)) {
    if (choice_key(part).empty()) continue;
    auto option = match_option(step, part);
    if (!option) return std::nullopt;
    if (std::find(picked.begin(), picked.end(), *option) == picked.end()) picked.push_back(*option);
  }
  if (picked.empty()) return std::nullopt;
  return SlotValue{std::move(picked)};
}

bool condition_holds(const flow::Condition& c, const SlotValue* value) {
  using Kind = flow::Condition::Kind;
  if (c.kind == Kind::otherwise) return true;
  if (value == nullptr) return false;
  std::vector<std::string> items;
  if (const auto* s = std::get_if<std::string>(value)) {
    items.push_back(*s);
  } else {
    items = std::get<std::vector<std::string>>(*value);
  }
  auto equal = [](const std::string& a, const std::string& b) { return choice_key(a) == choice_key(b); };
  switch (c.kind) {
    case Kind::equals:
      return items.size() == 1 && equal(items.front(), c.values.front());
    case Kind::contains_any:
      return std::any_of(items.begin(), items.end(), [&](const std::string& item) {
        return std::any_of(c.values.begin(), c.values.end(), [&](const std::string& v) { return equal(item, v); });
      });
    case Kind::count_gte:
      return items.size() >= c.count;
    case Kind::otherwise:
      return true;
  }
  return false;
}

DialogState track(const DialogState& state, const nlu::IntentPrediction& prediction,
                  const std::vector<nlu::Entity>& entities, const Utterance& utterance, const FlowRegistry& flows,
                  const PolicyConfig& policy) {
  if (utterance.session_id != state.session_id) {
    throw Error(ErrorCode::SessionMismatch,
                "utterance for session '" + utterance.session_id + "' applied to '" + state.session_id + "'");
  }
  DialogState s = state;
  ++s.turn_count;
  s.last_intent = prediction.intent ? std::optional<nlu::ScoredIntent>({*prediction.intent, prediction.score})
                                    : std::nullopt;
  s.last_entities = entities;

  for (const auto& e : entities) {
    if (policy.list_entity_types.contains(e.type)) {
      std::vector<std::string> list;
      if (auto it = s.slots.find(e.type); it != s.slots.end()) {
        if (const auto* existing = std::get_if<std::vector<std::string>>(&it->second)) {
          list = *existing;
        } else {
          list.push_back(std::get<std::string>(it->second));
        }
      }
      if (std::find(list.begin(), list.end(), e.value) == list.end()) list.push_back(e.value);
      s.slots[e.type] = std::move(list);
    } else {
      s.slots[e.type] = e.value;
    }
  }

  if (!prediction.intent) return s;
  const std::string& intent = *prediction.intent;
  if (!s.active) {
    s.pending_intent = intent;
    return s;
  }
  const flow::DialogFlow* active = flows.find(s.active->flow_id);
  if (active != nullptr && active->trigger_intent == intent) return s;
  if (active != nullptr) {
    const flow::Step* step = active->step(s.active->step_id);
    if (s.awaiting_slot) {
      const bool answered =
          std::any_of(entities.begin(), entities.end(), [&](const nlu::Entity& e) { return e.type == *s.awaiting_slot; }) ||
          match_slot_option(policy.elicitation, *s.awaiting_slot, utterance.text);
      if (answered) return s;
    } else if (step != nullptr && parse_choice(*step, utterance.text, utterance.lang)) {
      return s;
    }
  }
  s.active.reset();
  s.awaiting_slot.reset();
  s.pending_intent = intent;
  return s;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::ask: return "ask";
    case ActionKind::answer: return "answer";
    case ActionKind::kb_reply: return "kb_reply";
    case ActionKind::suggest: return "suggest";
    case ActionKind::confirm: return "confirm";
    case ActionKind::fallback: return "fallback";
  }
  return "fallback";
}

json to_json(const Action& a) {
  json j{{"kind", std::string(to_string(a.kind))}};
  switch (a.kind) {
    case ActionKind::ask:
      j["flow"] = a.flow_id;
      j["step"] = a.step_id;
      if (!a.slot.empty()) j["slot"] = a.slot;
      if (a.reask) j["reask"] = true;
      break;
    case ActionKind::answer:
      j["template"] = a.template_id;
      break;
    case ActionKind::kb_reply:
    case ActionKind::confirm:
      j["entry"] = a.entry_id;
      break;
    case ActionKind::suggest:
      j["entries"] = a.suggestions;
      break;
    case ActionKind::fallback:
      break;
  }
  return j;
}

namespace {

Lang lang_of(const DialogState& s) { return s.lang.value_or(Lang::en); }

nlu::SelectionContext selection_context(const DialogState& s, const std::optional<std::string>& intent) {
  nlu::SelectionContext ctx;
  ctx.lang = lang_of(s);
  ctx.last_intent = intent ? intent : (s.last_intent ? std::optional(s.last_intent->name) : std::nullopt);
  ctx.last_entities = s.last_entities;
  return ctx;
}

std::vector<nlu::CandidateResponse> retrieve(std::string_view text, Lang lang, const PolicyContext& ctx) {
  const kb::LangIndex* li = ctx.index.lang(lang);
  if (li == nullptr) return {};
  const auto query = vectors::vectorize(ctx.index.pipeline.terms(text, lang), li->vectorizer);
  return nlu::retrieve_candidates(query, ctx.index, lang, ctx.config.top_n);
}

Action kb_reply(std::string entry_id, const DialogState& s) {
  Action a;
  a.kind = ActionKind::kb_reply;
  a.entry_id = std::move(entry_id);
  a.bindings = s.slots;
  return a;
}

Action fallback() { return Action{}; }

Action ask_slot(const std::string& flow_id, const std::string& step_id, const std::string& slot, bool reask) {
  Action a;
  a.kind = ActionKind::ask;
  a.flow_id = flow_id;
  a.step_id = step_id;
  a.slot = slot;
  a.template_id = SlotElicitation::template_for(slot);
  a.reask = reask;
  return a;
}

// Runs steps from `step_id` until one waits for input or the flow ends.
void run_from(DialogState& s, const flow::DialogFlow& flow, std::string step_id, const PolicyContext& ctx,
              std::vector<Action>& actions, std::optional<std::string> kb_query = std::nullopt) {
  for (std::size_t guard = 0; guard <= flow.steps.size(); ++guard) {
    const flow::Step* step = flow.step(step_id);
    if (step == nullptr) throw Error(ErrorCode::UnknownFlow, "flow '" + flow.id + "' has no step '" + step_id + "'");
    switch (step->kind) {
      case flow::StepKind::prompt:
      case flow::StepKind::choice: {
        s.active = ActiveStep{flow.id, step->id};
        Action a;
        a.kind = ActionKind::ask;
        a.flow_id = flow.id;
        a.step_id = step->id;
        actions.push_back(std::move(a));
        return;
      }
      case flow::StepKind::kb_answer: {
        std::string query;
        if (kb_query) {
          query = *kb_query;
          kb_query.reset();
        } else if (!step->prompt.empty()) {
          s.active = ActiveStep{flow.id, step->id};
          Action a;
          a.kind = ActionKind::ask;
          a.flow_id = flow.id;
          a.step_id = step->id;
          actions.push_back(std::move(a));
          return;
        } else if (auto it = s.slots.find(step->slot); it != s.slots.end()) {
          query = localized_slot_text(flow, step->slot, it->second, lang_of(s));
        }
        const auto candidates = retrieve(query, lang_of(s), ctx);
        auto picked = nlu::select_response(candidates, ctx.index, selection_context(s, flow.trigger_intent), ctx.model);
        actions.push_back(picked ? kb_reply(*picked, s) : fallback());
        step_id = step->next;
        break;
      }
      case flow::StepKind::branch: {
        auto it = s.slots.find(step->on);
        const SlotValue* value = it == s.slots.end() ? nullptr : &it->second;
        for (const auto& c : step->cases) {
          if (condition_holds(c.when, value)) {
            step_id = c.next;
            break;
          }
        }
        break;
      }
      case flow::StepKind::answer: {
        if (auto needs = ctx.config.elicitation.needs.find(step->template_id);
            needs != ctx.config.elicitation.needs.end()) {
          const auto missing = std::find_if(needs->second.begin(), needs->second.end(), [&](const std::string& slot) {
            return !s.slots.contains(slot) && ctx.config.elicitation.options.contains(slot);
          });
          if (missing != needs->second.end()) {
            s.active = ActiveStep{flow.id, step->id};
            s.awaiting_slot = *missing;
            actions.push_back(ask_slot(flow.id, step->id, *missing, false));
            return;
          }
        }
        s.awaiting_slot.reset();
        Action a;
        a.kind = ActionKind::answer;
        a.template_id = step->template_id;
        a.bindings = s.slots;
        actions.push_back(std::move(a));
        step_id = step->next;
        break;
      }
      case flow::StepKind::end:
        s.active.reset();
        s.awaiting_slot.reset();
        return;
    }
  }
  throw Error(ErrorCode::Config, "flow '" + flow.id + "' loops without waiting for input");
}

}  // namespace

Decision enter_flow(const DialogState& state, const flow::DialogFlow& flow, const PolicyContext& context) {
  Decision d{state, {}};
  run_from(d.state, flow, flow.entry, context, d.actions);
  if (d.actions.empty()) d.actions.push_back(fallback());
  return d;
}

Decision advance_flow(const DialogState& state, const flow::DialogFlow& flow,
                      const std::optional<std::string>& user_value, const PolicyContext& context) {
  if (!state.active || state.active->flow_id != flow.id) {
    throw Error(ErrorCode::UnknownFlow, "session is not inside flow '" + flow.id + "'");
  }
  const flow::Step* step = flow.step(state.active->step_id);
  if (step == nullptr) {
    throw Error(ErrorCode::UnknownFlow, "flow '" + flow.id + "' has no step '" + state.active->step_id + "'");
  }
  Decision d{state, {}};
  if (state.awaiting_slot && user_value) {
    const std::string& slot = *state.awaiting_slot;
    if (!d.state.slots.contains(slot)) {
      auto choice = match_slot_option(context.config.elicitation, slot, *user_value);
      if (!choice) {
        d.actions.push_back(ask_slot(flow.id, step->id, slot, true));
        return d;
      }
      d.state.slots[slot] = *choice;
    }
    d.state.awaiting_slot.reset();
    run_from(d.state, flow, step->id, context, d.actions);
  } else if (!user_value) {
    run_from(d.state, flow, step->id, context, d.actions);
  } else {
    switch (step->kind) {
      case flow::StepKind::choice: {
        auto value = parse_choice(*step, *user_value, lang_of(state));
        if (!value) {
          Action a;
          a.kind = ActionKind::ask;
          a.flow_id = flow.id;
          a.step_id = step->id;
          a.reask = true;
          d.actions.push_back(std::move(a));
          return d;
        }
        d.state.slots[step->slot] = std::move(*value);
        run_from(d.state, flow, step->next, context, d.actions);
        break;
      }
      case flow::StepKind::prompt:
        d.state.slots[step->slot] = *user_value;
        run_from(d.state, flow, step->next, context, d.actions);
        break;
      case flow::StepKind::kb_answer:
        if (!step->slot.empty()) d.state.slots[step->slot] = *user_value;
        run_from(d.state, flow, step->id, context, d.actions, *user_value);
        break;
      default:
        run_from(d.state, flow, step->id, context, d.actions);
        break;
    }
  }
  if (d.actions.empty()) d.actions.push_back(fallback());
  return d;
}

Decision decide(const DialogState& state, const std::vector<nlu::CandidateResponse>& candidates,
                std::string_view text, const PolicyContext& context) {
  if (state.active) {
    const flow::DialogFlow* flow = context.flows.find(state.active->flow_id);
    if (flow == nullptr) throw Error(ErrorCode::UnknownFlow, "unknown flow '" + state.active->flow_id + "'");
    return advance_flow(state, *flow, std::string(text), context);
  }

  DialogState s = state;
  const std::optional<std::string> intent = s.pending_intent;
  s.pending_intent.reset();

  if (intent) {
    if (const flow::DialogFlow* flow = context.flows.by_intent(*intent)) return enter_flow(s, *flow, context);
    auto picked = nlu::select_response(candidates, context.index, selection_context(s, intent), context.model);
    if (!picked) {
      // Nothing retrieved: answer with the first entry filed under the intent.
      for (const auto& [id, entry] : context.index.entries) {
        if (entry.lang == lang_of(s) && std::find(entry.tags.begin(), entry.tags.end(), *intent) != entry.tags.end()) {
          picked = id;
          break;
        }
      }
    }
    if (picked) return Decision{s, {kb_reply(*picked, s)}};
    return Decision{s, {fallback()}};
  }

  const double top = candidates.empty() ? 0.0 : candidates.front().retrieval_score;
  if (top >= context.config.kb_floor) {
    auto picked = nlu::select_response(candidates, context.index, selection_context(s, std::nullopt), context.model);
    return Decision{s, {kb_reply(*picked, s)}};
  }
  if (top > context.config.suggest_low) {
    Action a;
    a.kind = ActionKind::suggest;
    for (const auto& c : candidates) {
      if (a.suggestions.size() == context.config.suggest_count) break;
      a.suggestions.push_back(c.entry_id);
    }
    return Decision{s, {std::move(a)}};
  }
  return Decision{s, {fallback()}};
}

}  // namespace rafiq::dialog
