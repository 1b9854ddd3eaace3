#include "rafiq/payload.hpp"

#include "json_util.hpp"

namespace rafiq {

using nlohmann::json;

using detail::reject_unknown;
using detail::string_field;

void finalize_type(ResponsePayload& payload) {
  payload.type = (payload.options.empty() && payload.buttons.empty() && payload.attachments.empty())
                     ? PayloadType::text
                     : PayloadType::card;
}

json to_json(const Button& b) {
  json j{{"label", b.label}};
  if (!b.url.empty()) j["url"] = b.url;
  if (!b.postback.empty()) j["postback"] = b.postback;
  return j;
}

json to_json(const Attachment& a) { return json{{"kind", a.kind}, {"url", a.url}, {"title", a.title}}; }

json to_json(const ResponsePayload& p) {
  json j;
  j["type"] = p.type == PayloadType::card ? "card" : "text";
  j["language"] = std::string(to_string(p.language));
  j["text"] = p.text;
  j["options"] = p.options;
  j["buttons"] = json::array();
  for (const auto& b : p.buttons) j["buttons"].push_back(to_json(b));
  j["attachments"] = json::array();
  for (const auto& a : p.attachments) j["attachments"].push_back(to_json(a));
  return j;
}

ResponsePayload payload_from_json(const json& j) {
  ResponsePayload p;
  p.type = j.at("type").get<std::string>() == "card" ? PayloadType::card : PayloadType::text;
  p.language = parse_lang(j.at("language").get<std::string>()).value_or(Lang::en);
  p.text = j.value("text", "");
  p.options = j.value("options", std::vector<std::string>{});
  for (const auto& b : j.value("buttons", json::array())) p.buttons.push_back(button_from_json(b, "button"));
  for (const auto& a : j.value("attachments", json::array())) {
    p.attachments.push_back(attachment_from_json(a, "attachment"));
  }
  return p;
}

Button button_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"label", "url", "postback"}, where);
  Button b;
  b.label = string_field(j, "label", where, true);
  b.url = string_field(j, "url", where, false);
  b.postback = string_field(j, "postback", where, false);
  if (b.url.empty() == b.postback.empty()) {
    throw Error(ErrorCode::SchemaError, where + ": a button needs exactly one of 'url' or 'postback'");
  }
  return b;
}

Attachment attachment_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"kind", "url", "title"}, where);
  Attachment a;
  a.kind = string_field(j, "kind", where, true);
  if (a.kind != "document" && a.kind != "location") {
    throw Error(ErrorCode::SchemaError, where + ": attachment kind must be 'document' or 'location'");
  }
  a.url = string_field(j, "url", where, true);
  a.title = string_field(j, "title", where, false);
  return a;
}

Extras extras_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"options", "buttons", "attachments"}, where);
  Extras e;
  if (auto it = j.find("options"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::SchemaError, where + ": 'options' must be an array");
    for (const auto& o : *it) {
      if (!o.is_string()) throw Error(ErrorCode::SchemaError, where + ": options must be strings");
      e.options.push_back(o.get<std::string>());
    }
  }
  if (auto it = j.find("buttons"); it != j.end()) {
    for (const auto& b : *it) e.buttons.push_back(button_from_json(b, where + ".buttons"));
  }
  if (auto it = j.find("attachments"); it != j.end()) {
    for (const auto& a : *it) e.attachments.push_back(attachment_from_json(a, where + ".attachments"));
  }
  return e;
}

json to_json(const Extras& e) {
  json j = json::object();
  if (!e.options.empty()) j["options"] = e.options;
  if (!e.buttons.empty()) {
    j["buttons"] = json::array();
    for (const auto& b : e.buttons) j["buttons"].push_back(to_json(b));
  }
  if (!e.attachments.empty()) {
    j["attachments"] = json::array();
    for (const auto& a : e.attachments) j["attachments"].push_back(to_json(a));
  }
  return j;
}

}  // namespace rafiq
