#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "rafiq/common.hpp"

namespace rafiq {

// A button either opens `url` or sends `postback` as the next user message.
struct Button {
  std::string label;
  std::string url;
  std::string postback;

  bool operator==(const Button&) const = default;
};

struct Attachment {
  std::string kind;  // "document" or "location"
  std::string url;
  std::string title;

  bool operator==(const Attachment&) const = default;
};

struct Extras {
  std::vector<std::string> options;
  std::vector<Button> buttons;
  std::vector<Attachment> attachments;

  bool empty() const { return options.empty() && buttons.empty() && attachments.empty(); }
  bool operator==(const Extras&) const = default;
};

enum class PayloadType { text, card };

struct ResponsePayload {
  PayloadType type = PayloadType::text;
  Lang language = Lang::en;
  std::string text;
  std::vector<std::string> options;
  std::vector<Button> buttons;
  std::vector<Attachment> attachments;

  bool operator==(const ResponsePayload&) const = default;
};

// Sets `type` from the card rule: card iff any of options/buttons/attachments.
void finalize_type(ResponsePayload& payload);

nlohmann::json to_json(const Button& b);
nlohmann::json to_json(const Attachment& a);
nlohmann::json to_json(const ResponsePayload& p);
ResponsePayload payload_from_json(const nlohmann::json& j);

// Strict readers; unknown keys raise Error(SchemaError) naming `where`.
Button button_from_json(const nlohmann::json& j, const std::string& where);
Attachment attachment_from_json(const nlohmann::json& j, const std::string& where);
Extras extras_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const Extras& e);

}  // namespace rafiq
