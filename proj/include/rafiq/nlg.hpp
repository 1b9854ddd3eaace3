#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rafiq/common.hpp"
#include "rafiq/dialog.hpp"
#include "rafiq/kb.hpp"
#include "rafiq/payload.hpp"

namespace rafiq::nlg {

struct Template {
  std::string id;
  std::map<Lang, std::string> text;
  std::map<Lang, std::vector<std::string>> options;
  std::map<Lang, std::vector<Button>> buttons;
  std::map<Lang, std::vector<Attachment>> attachments;

  bool operator==(const Template&) const = default;
};

// Templates the engine itself renders, outside any flow.
inline constexpr std::string_view kSystemTemplates[] = {"welcome", "choose_language", "fallback",
                                                        "suggest", "reask",           "confirm",
                                                        "apology"};

class TemplateCatalog {
 public:
  TemplateCatalog() = default;
  explicit TemplateCatalog(std::vector<Template> templates);

  // {"templates":[{"id","text":{lang:..},"options"|"buttons"|"attachments":{lang:[..]}}]}
  // Throws SyntaxError, SchemaError or DuplicateId.
  static TemplateCatalog parse(std::string_view json_text);
  static TemplateCatalog load(const std::filesystem::path& path);

  const Template* find(std::string_view id) const;
  std::set<std::string> ids() const;
  std::size_t size() const { return templates_.size(); }

 private:
  std::map<std::string, Template, std::less<>> templates_;
};

/// Replaces each `{name}` with its binding. Throws Error(MissingSlot) naming
/// the template and slot when a binding is absent. With `for_url`, values are
/// percent-encoded.
std::string substitute(std::string_view text, const dialog::Slots& bindings, std::string_view template_id,
                       bool for_url = false);

// Placeholder names appearing in `text`, each once, in order of first use.
std::vector<std::string> placeholders(std::string_view text);

/// What the policy needs to ask for missing slots: each template's
/// placeholders, and the choices of every `ask_slot_<name>` template.
dialog::SlotElicitation slot_elicitation(const TemplateCatalog& catalog);

/// Renders template `id` in `lang`. Throws UnknownTemplate or MissingSlot.
ResponsePayload render_template(const TemplateCatalog& catalog, std::string_view id, Lang lang,
                                const dialog::Slots& bindings);

struct RenderContext {
  const TemplateCatalog& templates;
  const dialog::FlowRegistry& flows;
  const kb::KBIndex& index;
};

/// Turns one policy action into a payload in the session language. ask shows
/// the step prompt and its option labels; kb_reply shows the entry answer and
/// extras; suggest lists the first question of each suggested entry.
ResponsePayload render(const dialog::Action& action, const dialog::DialogState& state, const RenderContext& context);

/// Without a language: the bilingual language picker. With one: the localized
/// greeting card listing the top-level options.
ResponsePayload welcome(const TemplateCatalog& catalog, std::optional<Lang> lang);

// Options of the language picker, in the order of kAllLangs.
const std::vector<std::string>& language_options();

// Language named by a picker option or language code, if any.
std::optional<Lang> language_choice(std::string_view input);

/// The localized apology shown when a turn fails on configuration. Never throws.
ResponsePayload apology(const TemplateCatalog& catalog, Lang lang);

}  // namespace rafiq::nlg
