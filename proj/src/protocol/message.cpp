#include "cnl/protocol/message.hpp"

#include <array>
#include <utility>

namespace cnl::protocol {

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 10> kNames = {{
    {MessageType::hello, "HELLO"},
    {MessageType::task_announce, "TASK_ANNOUNCE"},
    {MessageType::pubkey_share, "PUBKEY_SHARE"},
    {MessageType::he_role_notify, "HE_ROLE_NOTIFY"},
    {MessageType::emb_submit, "EMB_SUBMIT"},
    {MessageType::sum_broadcast, "SUM_BROADCAST"},
    {MessageType::status_query, "STATUS_QUERY"},
    {MessageType::status_reply, "STATUS_REPLY"},
    {MessageType::result_fetch, "RESULT_FETCH"},
    {MessageType::error, "ERROR"},
}};

}  // namespace

std::string to_string(MessageType t) {
  for (const auto& [k, name] : kNames) {
    if (k == t) return std::string(name);
  }
  return "ERROR";
}

MessageType message_type_from_string(std::string_view s) {
  for (const auto& [k, name] : kNames) {
    if (name == s) return k;
  }
  throw ProtocolError("unknown message type: " + std::string(s));
}

std::string Message::serialize() const {
  nlohmann::json j = {{"v", kVersion}, {"type", to_string(type)}, {"task_id", task_id},
                      {"sender", sender}, {"payload", payload}};
  return j.dump();
}

Message Message::parse(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("frame is not a JSON object");
  if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != kVersion) {
    throw ProtocolError("unsupported protocol version");
  }
  for (const char* key : {"type", "sender"}) {
    if (!j.contains(key) || !j[key].is_string()) throw ProtocolError(std::string("missing field: ") + key);
  }
  Message m;
  m.type = message_type_from_string(j["type"].get<std::string>());
  m.sender = j["sender"].get<std::string>();
  if (j.contains("task_id") && j["task_id"].is_string()) m.task_id = j["task_id"].get<std::string>();
  if (m.task_id.empty() && m.type != MessageType::hello && m.type != MessageType::error) {
    throw ProtocolError("missing task_id");
  }
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) throw ProtocolError("payload must be an object");
    m.payload = j["payload"];
  }
  return m;
}

Message make_error(const std::string& sender, const std::string& task_id, const std::string& what) {
  Message m;
  m.type = MessageType::error;
  m.sender = sender;
  m.task_id = task_id;
  m.payload = {{"error", what}};
  return m;
}

}  // namespace cnl::protocol
