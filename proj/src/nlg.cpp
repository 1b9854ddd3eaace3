#include "rafiq/nlg.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "json_util.hpp"
#include "rafiq/text.hpp"

namespace rafiq::nlg {

using nlohmann::json;

TemplateCatalog::TemplateCatalog(std::vector<Template> templates) {
  for (auto& t : templates) {
    const std::string id = t.id;
    if (!templates_.emplace(id, std::move(t)).second) {
      throw Error(ErrorCode::DuplicateId, "template '" + id + "' is defined more than once");
    }
  }
}

namespace {

template <typename T, typename Read>
std::map<Lang, std::vector<T>> per_language_lists(const json& j, const std::string& where, Read read) {
  std::map<Lang, std::vector<T>> out;
  detail::require_object(j, where);
  for (const auto& [key, list] : j.items()) {
    const auto lang = parse_lang(key);
    if (!lang) throw Error(ErrorCode::SchemaError, where + ": unsupported language '" + key + "'");
    if (!list.is_array()) throw Error(ErrorCode::SchemaError, where + "." + key + ": expected an array");
    auto& dest = out[*lang];
    for (std::size_t i = 0; i < list.size(); ++i) dest.push_back(read(list[i], where + "." + key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

TemplateCatalog TemplateCatalog::parse(std::string_view json_text) {
  const json root = detail::parse_json(json_text, "templates");
  detail::reject_unknown(root, {"templates"}, "templates");
  if (!root.contains("templates") || !root["templates"].is_array()) {
    throw Error(ErrorCode::SchemaError, "templates: missing array 'templates'");
  }
  std::vector<Template> list;
  for (std::size_t i = 0; i < root["templates"].size(); ++i) {
    const json& tj = root["templates"][i];
    const std::string where = "templates[" + std::to_string(i) + "]";
    detail::reject_unknown(tj, {"id", "text", "options", "buttons", "attachments"}, where);
    Template t;
    t.id = detail::string_field(tj, "id", where, true);
    if (t.id.empty()) throw Error(ErrorCode::SchemaError, where + ": empty id");
    const std::string at = "template '" + t.id + "'";
    if (!tj.contains("text")) throw Error(ErrorCode::SchemaError, at + ": missing field 'text'");
    detail::require_object(tj["text"], at + ".text");
    for (const auto& [key, value] : tj["text"].items()) {
      const auto lang = parse_lang(key);
      if (!lang) throw Error(ErrorCode::SchemaError, at + ".text: unsupported language '" + key + "'");
      if (!value.is_string()) throw Error(ErrorCode::SchemaError, at + ".text." + key + ": expected a string");
      t.text[*lang] = value.get<std::string>();
    }
    if (tj.contains("options")) {
      t.options = per_language_lists<std::string>(tj["options"], at + ".options", [](const json& v, const std::string& w) {
        if (!v.is_string()) throw Error(ErrorCode::SchemaError, w + ": expected a string");
        return v.get<std::string>();
      });
    }
    if (tj.contains("buttons")) t.buttons = per_language_lists<Button>(tj["buttons"], at + ".buttons", button_from_json);
    if (tj.contains("attachments")) {
      t.attachments = per_language_lists<Attachment>(tj["attachments"], at + ".attachments", attachment_from_json);
    }
    list.push_back(std::move(t));
  }
  return TemplateCatalog(std::move(list));
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

const Template* TemplateCatalog::find(std::string_view id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

std::set<std::string> TemplateCatalog::ids() const {
  std::set<std::string> out;
  for (const auto& [id, _] : templates_) out.insert(id);
  return out;
}

namespace {

bool name_char(char c, bool first) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || (!first && std::isdigit(static_cast<unsigned char>(c)));
}

// Length of the placeholder name starting after '{' at `pos`, or 0.
std::size_t placeholder_at(std::string_view text, std::size_t pos) {
  std::size_t i = pos;
  while (i < text.size() && name_char(text[i], i == pos)) ++i;
  return i > pos && i < text.size() && text[i] == '}' ? i - pos : 0;
}

std::string percent_encode(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    const std::size_t n = placeholder_at(text, i + 1);
    if (n == 0) continue;
    std::string name(text.substr(i + 1, n));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  }
  return out;
}

dialog::SlotElicitation slot_elicitation(const TemplateCatalog& catalog) {
  dialog::SlotElicitation out;
  for (const auto& id : catalog.ids()) {
    const Template& t = *catalog.find(id);
    auto& needs = out.needs[id];
    auto add = [&](std::string_view text) {
      for (auto& name : placeholders(text)) needs.insert(std::move(name));
    };
    for (const auto& [_, text] : t.text) add(text);
    for (const auto& [_, list] : t.options) {
      for (const auto& o : list) add(o);
    }
    for (const auto& [_, list] : t.buttons) {
      for (const auto& b : list) {
        add(b.label);
        add(b.url);
        add(b.postback);
      }
    }
    for (const auto& [_, list] : t.attachments) {
      for (const auto& a : list) {
        add(a.url);
        add(a.title);
      }
    }
    if (needs.empty()) out.needs.erase(id);
    constexpr std::string_view prefix = "ask_slot_";
    if (id.starts_with(prefix) && id.size() > prefix.size()) out.options[id.substr(prefix.size())] = t.options;
  }
  return out;
}

std::string substitute(std::string_view text, const dialog::Slots& bindings, std::string_view template_id,
                       bool for_url) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::size_t n = text[i] == '{' ? placeholder_at(text, i + 1) : 0;
    if (n == 0) {
      out += text[i];
      continue;
    }
    const std::string name(text.substr(i + 1, n));
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(ErrorCode::MissingSlot,
                  "template '" + std::string(template_id) + "' needs slot '" + name + "', which is not bound");
    }
    const std::string value = dialog::slot_text(it->second);
    out += for_url ? percent_encode(value) : value;
    i += n + 1;
  }
  return out;
}

ResponsePayload render_template(const TemplateCatalog& catalog, std::string_view id, Lang lang,
                                const dialog::Slots& bindings) {
  const Template* t = catalog.find(id);
  if (t == nullptr) throw Error(ErrorCode::UnknownTemplate, "template '" + std::string(id) + "' is not in the catalog");
  auto text = t->text.find(lang);
  if (text == t->text.end()) {
    throw Error(ErrorCode::UnknownTemplate,
                "template '" + std::string(id) + "' has no '" + std::string(to_string(lang)) + "' text");
  }
  ResponsePayload p;
  p.language = lang;
  p.text = substitute(text->second, bindings, id);
  if (auto it = t->options.find(lang); it != t->options.end()) {
    for (const auto& o : it->second) p.options.push_back(substitute(o, bindings, id));
  }
  if (auto it = t->buttons.find(lang); it != t->buttons.end()) {
    for (const auto& b : it->second) {
      p.buttons.push_back(Button{substitute(b.label, bindings, id), substitute(b.url, bindings, id, true),
                                 substitute(b.postback, bindings, id)});
    }
  }
  if (auto it = t->attachments.find(lang); it != t->attachments.end()) {
    for (const auto& a : it->second) {
      p.attachments.push_back(
          Attachment{a.kind, substitute(a.url, bindings, id, true), substitute(a.title, bindings, id)});
    }
  }
  finalize_type(p);
  return p;
}

namespace {

void append_extras(ResponsePayload& p, const Extras& extras) {
  p.options.insert(p.options.end(), extras.options.begin(), extras.options.end());
  p.buttons.insert(p.buttons.end(), extras.buttons.begin(), extras.buttons.end());
  p.attachments.insert(p.attachments.end(), extras.attachments.begin(), extras.attachments.end());
}

const kb::KBEntry& entry_or_throw(const RenderContext& ctx, const std::string& id) {
  const kb::KBEntry* e = ctx.index.entry(id);
  if (e == nullptr) throw Error(ErrorCode::Config, "knowledge base has no entry '" + id + "'");
  return *e;
}

}  // namespace

ResponsePayload render(const dialog::Action& action, const dialog::DialogState& state, const RenderContext& context) {
  const Lang lang = state.lang.value_or(Lang::en);
  ResponsePayload p;
  switch (action.kind) {
    case dialog::ActionKind::ask: {
      if (!action.slot.empty()) {
        p = render_template(context.templates, action.template_id, lang, state.slots);
        if (action.reask) p.text = render_template(context.templates, "reask", lang, state.slots).text + "\n" + p.text;
        break;
      }
      const flow::DialogFlow* f = context.flows.find(action.flow_id);
      const flow::Step* step = f == nullptr ? nullptr : f->step(action.step_id);
      if (step == nullptr) {
        throw Error(ErrorCode::UnknownFlow, "no step '" + action.step_id + "' in flow '" + action.flow_id + "'");
      }
      auto prompt = step->prompt.find(lang);
      if (prompt == step->prompt.end()) {
        throw Error(ErrorCode::Config, "step '" + step->id + "' has no '" + std::string(to_string(lang)) + "' prompt");
      }
      if (action.reask) {
        p = render_template(context.templates, "reask", lang, state.slots);
        p.text += "\n" + prompt->second;
      } else {
        p.text = prompt->second;
      }
      p.options.clear();
      if (step->kind == flow::StepKind::choice) p.options = step->labels(lang);
      break;
    }
    case dialog::ActionKind::answer:
      p = render_template(context.templates, action.template_id, lang, action.bindings);
      break;
    case dialog::ActionKind::kb_reply: {
      const kb::KBEntry& e = entry_or_throw(context, action.entry_id);
      if (!e.answer_template.empty()) {
        p = render_template(context.templates, e.answer_template, lang, action.bindings);
      } else {
        p.text = e.answer;
      }
      append_extras(p, e.extras);
      break;
    }
    case dialog::ActionKind::suggest:
      p = render_template(context.templates, "suggest", lang, state.slots);
      for (const auto& id : action.suggestions) p.options.push_back(entry_or_throw(context, id).questions.front());
      break;
    case dialog::ActionKind::confirm: {
      const kb::KBEntry& e = entry_or_throw(context, action.entry_id);
      dialog::Slots bindings = state.slots;
      bindings["question"] = e.questions.front();
      p = render_template(context.templates, "confirm", lang, bindings);
      break;
    }
    case dialog::ActionKind::fallback:
      p = render_template(context.templates, "fallback", lang, state.slots);
      break;
  }
  p.language = lang;
  finalize_type(p);
  return p;
}

const std::vector<std::string>& language_options() {
  static const std::vector<std::string> options{"English", "العربية"};
  return options;
}

std::optional<Lang> language_choice(std::string_view input) {
  const std::string key = text::normalize(text::normalize(input, Lang::ar), Lang::en);
  // Keys are already in folded form.
  static const std::map<std::string, Lang> names{{"english", Lang::en}, {"en", Lang::en},
                                                 {"العربيه", Lang::ar}, {"عربي", Lang::ar},
                                                 {"arabic", Lang::ar},  {"ar", Lang::ar}};
  auto it = names.find(key);
  return it == names.end() ? std::nullopt : std::optional(it->second);
}

ResponsePayload welcome(const TemplateCatalog& catalog, std::optional<Lang> lang) {
  if (!lang) {
    ResponsePayload p = render_template(catalog, "choose_language", Lang::en, {});
    p.options = language_options();
    finalize_type(p);
    return p;
  }
  return render_template(catalog, "welcome", *lang, {});
}

ResponsePayload apology(const TemplateCatalog& catalog, Lang lang) {
  try {
    return render_template(catalog, "apology", lang, {});
  } catch (const Error&) {
    ResponsePayload p;
    p.language = lang;
    p.text = lang == Lang::ar ? "عذرا، حدث خطأ. يرجى المحاولة لاحقا." : "Sorry, something went wrong. Please try again later.";
    return p;
  }
}

}  // namespace rafiq::nlg
