#pragma once

#include "json.hpp"

#include <string>
#include <string_view>

namespace cnl::protocol {

enum class MessageType {
  hello,
  task_announce,
  pubkey_share,
  he_role_notify,
  emb_submit,
  sum_broadcast,
  status_query,
  status_reply,
  result_fetch,
  error,
};

/// Wire names: "HELLO", "TASK_ANNOUNCE", ...
std::string to_string(MessageType t);
MessageType message_type_from_string(std::string_view s);

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Message {
  static constexpr int kVersion = 1;

  MessageType type = MessageType::hello;
  std::string task_id;
  std::string sender;
  nlohmann::json payload = nlohmann::json::object();

  /// {"v":1,"type":...,"task_id":...,"sender":...,"payload":{...}}
  std::string serialize() const;
  /// Throws ProtocolError on malformed JSON, wrong version, unknown type, or
  /// a missing task_id on anything but HELLO/ERROR.
  static Message parse(std::string_view text);
};

Message make_error(const std::string& sender, const std::string& task_id, const std::string& what);

}  // namespace cnl::protocol
