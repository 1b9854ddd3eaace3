#include "rafiq/flowdsl.hpp"

#include <algorithm>
#include <deque>

#include "json_util.hpp"

namespace rafiq::flow {

using nlohmann::json;

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::prompt: return "prompt";
    case StepKind::choice: return "choice";
    case StepKind::branch: return "branch";
    case StepKind::answer: return "answer";
    case StepKind::kb_answer: return "kb_answer";
    case StepKind::end: return "end";
  }
  return "end";
}

const std::vector<std::string>& Step::labels(Lang lang) const {
  auto it = option_labels.find(lang);
  return it == option_labels.end() ? options : it->second;
}

const Step* DialogFlow::step(std::string_view id) const {
  auto it = steps.find(std::string(id));
  return it == steps.end() ? nullptr : &it->second;
}

namespace {

std::optional<StepKind> parse_kind(std::string_view s) {
  for (StepKind k : {StepKind::prompt, StepKind::choice, StepKind::branch, StepKind::answer, StepKind::kb_answer,
                     StepKind::end}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

class StepReader {
 public:
  StepReader(std::string id, const json& j) : id_(std::move(id)), j_(j) {}

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail(key, "field not allowed for this step kind");
    }
  }

  std::string text(const char* key, bool required) const {
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) fail(key, "missing");
      return {};
    }
    if (!it->is_string() || it->get<std::string>().empty()) fail(key, "must be a non-empty string");
    return it->get<std::string>();
  }

  std::map<Lang, std::string> localized(const char* key, bool required) const {
    std::map<Lang, std::string> out;
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) fail(key, "missing");
      return out;
    }
    if (!it->is_object()) fail(key, "must be an object keyed by language");
    for (const auto& [lang_key, value] : it->items()) {
      const auto lang = parse_lang(lang_key);
      if (!lang) fail(std::string(key) + "." + lang_key, "unsupported language");
      if (!value.is_string()) fail(std::string(key) + "." + lang_key, "must be a string");
      out[*lang] = value.get<std::string>();
    }
    return out;
  }

  std::vector<std::string> strings(const char* key) const {
    auto it = j_.find(key);
    if (it == j_.end()) fail(key, "missing");
    if (!it->is_array()) fail(key, "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : *it) {
      if (!v.is_string()) fail(key, "must be an array of strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& field, const std::string& reason) const {
    throw FlowSchemaError(id_, field, reason);
  }

  const json& raw() const { return j_; }

 private:
  std::string id_;
  const json& j_;
};

Condition parse_condition(const StepReader& r, const json& when, const std::string& field) {
  Condition c;
  if (when.is_string()) {
    if (when.get<std::string>() != "default") r.fail(field, "the only string condition is \"default\"");
    c.kind = Condition::Kind::otherwise;
    return c;
  }
  if (!when.is_object() || when.size() != 1) r.fail(field, "expected \"default\" or a one-key condition object");
  const auto& [key, value] = *when.items().begin();
  if (key == "equals") {
    if (!value.is_string()) r.fail(field + ".equals", "must be a string");
    c.kind = Condition::Kind::equals;
    c.values = {value.get<std::string>()};
  } else if (key == "contains_any") {
    if (!value.is_array() || value.empty()) r.fail(field + ".contains_any", "must be a non-empty array of strings");
    c.kind = Condition::Kind::contains_any;
    for (const auto& v : value) {
      if (!v.is_string()) r.fail(field + ".contains_any", "must be a non-empty array of strings");
      c.values.push_back(v.get<std::string>());
    }
  } else if (key == "count_gte") {
    if (!value.is_number_integer() || value.get<long>() < 1) r.fail(field + ".count_gte", "must be an integer >= 1");
    c.kind = Condition::Kind::count_gte;
    c.count = value.get<std::size_t>();
  } else {
    r.fail(field, "unknown condition '" + key + "'");
  }
  return c;
}

Step parse_step(const std::string& id, const json& j) {
  if (!j.is_object()) throw FlowSchemaError(id, "-", "a step must be an object");
  StepReader r(id, j);
  Step s;
  s.id = id;
  const auto kind = parse_kind(r.text("kind", true));
  if (!kind) r.fail("kind", "unknown step kind '" + j["kind"].get<std::string>() + "'");
  s.kind = *kind;
  switch (s.kind) {
    case StepKind::prompt:
      r.allow({"kind", "prompt", "slot", "next"});
      s.prompt = r.localized("prompt", true);
      s.slot = r.text("slot", true);
      s.next = r.text("next", true);
      break;
    case StepKind::choice: {
      r.allow({"kind", "prompt", "options", "option_labels", "multi", "slot", "next"});
      s.prompt = r.localized("prompt", true);
      s.options = r.strings("options");
      if (s.options.empty()) r.fail("options", "a choice needs at least one option");
      if (auto it = j.find("option_labels"); it != j.end()) {
        if (!it->is_object()) r.fail("option_labels", "must be an object keyed by language");
        for (const auto& [lang_key, labels] : it->items()) {
          const auto lang = parse_lang(lang_key);
          if (!lang) r.fail("option_labels." + lang_key, "unsupported language");
          auto list = detail::string_list(labels, "option_labels");
          if (list.size() != s.options.size()) r.fail("option_labels." + lang_key, "must align with options");
          s.option_labels[*lang] = std::move(list);
        }
      }
      if (auto it = j.find("multi"); it != j.end()) {
        if (!it->is_boolean()) r.fail("multi", "must be a boolean");
        s.multi = it->get<bool>();
      }
      s.slot = r.text("slot", true);
      s.next = r.text("next", true);
      break;
    }
    case StepKind::branch: {
      r.allow({"kind", "on", "cases"});
      s.on = r.text("on", true);
      auto it = j.find("cases");
      if (it == j.end() || !it->is_array()) r.fail("cases", "must be an array");
      std::size_t defaults = 0;
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string field = "cases[" + std::to_string(i) + "]";
        const json& cj = (*it)[i];
        if (!cj.is_object()) r.fail(field, "must be an object");
        for (const auto& [key, _] : cj.items()) {
          if (key != "when" && key != "next") r.fail(field + "." + key, "unknown field");
        }
        if (!cj.contains("when")) r.fail(field + ".when", "missing");
        if (!cj.contains("next") || !cj["next"].is_string()) r.fail(field + ".next", "must be a step id");
        BranchCase bc{parse_condition(r, cj["when"], field + ".when"), cj["next"].get<std::string>()};
        if (bc.when.kind == Condition::Kind::otherwise) ++defaults;
        s.cases.push_back(std::move(bc));
      }
      if (defaults != 1) r.fail("cases", "a branch needs exactly one default case");
      if (s.cases.size() < 2) r.fail("cases", "a branch needs at least one case besides the default");
      break;
    }
    case StepKind::answer:
      r.allow({"kind", "template", "next"});
      s.template_id = r.text("template", true);
      s.next = r.text("next", true);
      break;
    case StepKind::kb_answer:
      r.allow({"kind", "prompt", "slot", "next"});
      s.prompt = r.localized("prompt", false);
      s.slot = r.text("slot", false);
      s.next = r.text("next", true);
      break;
    case StepKind::end:
      r.allow({"kind"});
      break;
  }
  return s;
}

json condition_json(const Condition& c) {
  switch (c.kind) {
    case Condition::Kind::equals: return json{{"equals", c.values.front()}};
    case Condition::Kind::contains_any: return json{{"contains_any", c.values}};
    case Condition::Kind::count_gte: return json{{"count_gte", c.count}};
    case Condition::Kind::otherwise: return "default";
  }
  return "default";
}

json localized_json(const std::map<Lang, std::string>& m) {
  json j = json::object();
  for (const auto& [lang, text] : m) j[std::string(to_string(lang))] = text;
  return j;
}

}  // namespace

DialogFlow parse_flow(std::string_view document) {
  const json root = detail::parse_json(document, "flow");
  if (!root.is_object()) throw FlowSchemaError("-", "-", "a flow must be a JSON object");
  for (const auto& [key, _] : root.items()) {
    if (key != "id" && key != "trigger_intent" && key != "entry" && key != "steps") {
      throw FlowSchemaError("-", key, "unknown field");
    }
  }
  auto top = [&](const char* key) {
    auto it = root.find(key);
    if (it == root.end() || !it->is_string() || it->get<std::string>().empty()) {
      throw FlowSchemaError("-", key, "must be a non-empty string");
    }
    return it->get<std::string>();
  };
  DialogFlow flow;
  flow.id = top("id");
  flow.trigger_intent = top("trigger_intent");
  flow.entry = top("entry");
  auto steps = root.find("steps");
  if (steps == root.end() || !steps->is_object() || steps->empty()) {
    throw FlowSchemaError("-", "steps", "must be a non-empty object");
  }
  for (const auto& [id, body] : steps->items()) flow.steps.emplace(id, parse_step(id, body));

  if (!flow.steps.contains(flow.entry)) throw FlowSchemaError("-", "entry", "unknown step '" + flow.entry + "'");
  for (const auto& [id, step] : flow.steps) {
    if (!step.next.empty() && !flow.steps.contains(step.next)) {
      throw FlowSchemaError(id, "next", "unknown step '" + step.next + "'");
    }
    for (std::size_t i = 0; i < step.cases.size(); ++i) {
      if (!flow.steps.contains(step.cases[i].next)) {
        throw FlowSchemaError(id, "cases[" + std::to_string(i) + "].next",
                              "unknown step '" + step.cases[i].next + "'");
      }
    }
  }
  return flow;
}

DialogFlow load_flow(const std::filesystem::path& path) { return parse_flow(detail::read_file(path)); }

json to_json(const DialogFlow& flow) {
  json steps = json::object();
  for (const auto& [id, s] : flow.steps) {
    json j;
    j["kind"] = std::string(to_string(s.kind));
    switch (s.kind) {
      case StepKind::prompt:
        j["prompt"] = localized_json(s.prompt);
        j["slot"] = s.slot;
        break;
      case StepKind::choice:
        j["prompt"] = localized_json(s.prompt);
        j["options"] = s.options;
        if (!s.option_labels.empty()) {
          json labels = json::object();
          for (const auto& [lang, list] : s.option_labels) labels[std::string(to_string(lang))] = list;
          j["option_labels"] = labels;
        }
        if (s.multi) j["multi"] = true;
        j["slot"] = s.slot;
        break;
      case StepKind::branch:
        j["on"] = s.on;
        j["cases"] = json::array();
        for (const auto& c : s.cases) j["cases"].push_back(json{{"when", condition_json(c.when)}, {"next", c.next}});
        break;
      case StepKind::answer:
        j["template"] = s.template_id;
        break;
      case StepKind::kb_answer:
        if (!s.prompt.empty()) j["prompt"] = localized_json(s.prompt);
        if (!s.slot.empty()) j["slot"] = s.slot;
        break;
      case StepKind::end:
        break;
    }
    if (!s.next.empty()) j["next"] = s.next;
    steps[id] = std::move(j);
  }
  return json{{"id", flow.id}, {"trigger_intent", flow.trigger_intent}, {"entry", flow.entry}, {"steps", steps}};
}

std::string serialize_flow(const DialogFlow& flow) { return to_json(flow).dump(2); }

std::vector<std::string> successors(const Step& step) {
  std::vector<std::string> out;
  if (!step.next.empty()) out.push_back(step.next);
  for (const auto& c : step.cases) out.push_back(c.next);
  return out;
}

Reachability reachability(const DialogFlow& flow) {
  std::set<std::string> seen;
  std::deque<std::string> queue;
  if (flow.steps.contains(flow.entry)) {
    seen.insert(flow.entry);
    queue.push_back(flow.entry);
  }
  while (!queue.empty()) {
    const auto id = queue.front();
    queue.pop_front();
    for (const auto& n : successors(flow.steps.at(id))) {
      if (flow.steps.contains(n) && seen.insert(n).second) queue.push_back(n);
    }
  }
  Reachability r;
  for (const auto& [id, _] : flow.steps) (seen.contains(id) ? r.reachable : r.unreachable).push_back(id);
  return r;
}

json to_json(const Diagnostic& d) {
  return json{{"flow", d.flow_id}, {"step", d.step_id}, {"code", d.code}, {"message", d.message}};
}

namespace {

// Slots written on every path from the entry to each reachable step
// (must-analysis, intersection over predecessors).
std::map<std::string, std::set<std::string>> definitely_written(const DialogFlow& flow,
                                                                const std::vector<std::string>& reachable) {
  std::set<std::string> universe;
  for (const auto& [id, s] : flow.steps) {
    if (s.kind == StepKind::prompt || s.kind == StepKind::choice) universe.insert(s.slot);
  }
  std::map<std::string, std::set<std::string>> in;
  for (const auto& id : reachable) in[id] = id == flow.entry ? std::set<std::string>{} : universe;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& id : reachable) {
      const Step& s = flow.steps.at(id);
      auto out = in[id];
      if (s.kind == StepKind::prompt || s.kind == StepKind::choice) out.insert(s.slot);
      for (const auto& n : successors(s)) {
        if (n == flow.entry || !in.contains(n)) continue;
        std::set<std::string> meet;
        std::set_intersection(in[n].begin(), in[n].end(), out.begin(), out.end(), std::inserter(meet, meet.end()));
        if (meet != in[n]) {
          in[n] = std::move(meet);
          changed = true;
        }
      }
    }
  }
  return in;
}

}  // namespace

std::vector<Diagnostic> validate_flows(const std::vector<DialogFlow>& flows, const nlu::IntentCatalog& catalog,
                                       const std::set<std::string>& template_ids,
                                       const std::vector<Lang>& languages) {
  std::vector<Diagnostic> out;
  std::vector<const DialogFlow*> sorted;
  for (const auto& f : flows) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const DialogFlow* a, const DialogFlow* b) {
    return a->id != b->id ? a->id < b->id : a->trigger_intent < b->trigger_intent;
  });

  std::map<std::string, std::size_t> id_counts;
  std::map<std::string, std::string> trigger_owner;
  for (const DialogFlow* f : sorted) {
    if (++id_counts[f->id] > 1) {
      out.push_back({f->id, "-", "DuplicateFlowId", "flow id '" + f->id + "' is defined more than once"});
    }
    if (auto [it, inserted] = trigger_owner.emplace(f->trigger_intent, f->id); !inserted) {
      out.push_back({f->id, "-", "DuplicateTrigger",
                     "trigger intent '" + f->trigger_intent + "' is already handled by flow '" + it->second + "'"});
    }
    if (catalog.find(f->trigger_intent) == nullptr) {
      out.push_back({f->id, "-", "UnknownIntent", "trigger intent '" + f->trigger_intent + "' is not in the catalog"});
    }

    const auto reach = reachability(*f);
    for (const auto& id : reach.unreachable) {
      out.push_back({f->id, id, "Unreachable", "step '" + id + "' cannot be reached from '" + f->entry + "'"});
    }
    const bool end_reachable = std::any_of(reach.reachable.begin(), reach.reachable.end(), [&](const std::string& id) {
      return f->steps.at(id).kind == StepKind::end;
    });
    if (!end_reachable) out.push_back({f->id, "-", "NoReachableEnd", "no end step is reachable from the entry"});

    for (const auto& [id, s] : f->steps) {
      if (s.kind == StepKind::prompt || s.kind == StepKind::choice) {
        for (Lang lang : languages) {
          if (!s.prompt.contains(lang)) {
            out.push_back({f->id, id, "MissingLanguage",
                           "prompt has no '" + std::string(to_string(lang)) + "' text"});
          }
        }
      }
      if (s.kind == StepKind::answer && !template_ids.contains(s.template_id)) {
        out.push_back({f->id, id, "UnknownTemplate", "template '" + s.template_id + "' is not in the catalog"});
      }
    }

    const auto written = definitely_written(*f, reach.reachable);
    for (const auto& id : reach.reachable) {
      const Step& s = f->steps.at(id);
      const std::string& read = s.kind == StepKind::branch ? s.on : (s.kind == StepKind::kb_answer ? s.slot : "");
      if (read.empty()) continue;
      if (!written.at(id).contains(read)) {
        out.push_back({f->id, id, "UnwrittenSlot",
                       "slot '" + read + "' is not written by a prompt or choice on every path reaching this step"});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Diagnostic> validate_documents(const std::vector<FlowDocument>& documents,
                                           const nlu::IntentCatalog& catalog,
                                           const std::set<std::string>& template_ids,
                                           const std::vector<Lang>& languages) {
  std::vector<Diagnostic> out;
  std::vector<DialogFlow> parsed;
  for (const auto& doc : documents) {
    // Best-effort flow id for locating parse failures.
    std::string flow_id = doc.name;
    try {
      const auto j = json::parse(doc.content);
      if (j.is_object() && j.contains("id") && j["id"].is_string()) flow_id = j["id"].get<std::string>();
    } catch (const json::exception&) {
    }
    try {
      parsed.push_back(parse_flow(doc.content));
    } catch (const FlowSchemaError& e) {
      out.push_back({flow_id, e.step(), "SchemaError", e.what()});
    } catch (const Error& e) {
      out.push_back({flow_id, "-", std::string(rafiq::to_string(e.code())), e.what()});
    }
  }
  auto rest = validate_flows(parsed, catalog, template_ids, languages);
  out.insert(out.end(), rest.begin(), rest.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rafiq::flow
