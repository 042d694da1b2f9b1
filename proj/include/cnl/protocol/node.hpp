#pragma once

#include "cnl/crypto/codec.hpp"
#include "cnl/crypto/seal.hpp"
#include "cnl/protocol/config.hpp"
#include "cnl/protocol/message.hpp"
#include "cnl/protocol/transport.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <thread>

namespace cnl::protocol {

enum class TaskState { idle, announced, embedding_computing, submitted, aggregating, broadcast, done };

std::string to_string(TaskState s);
TaskState task_state_from_string(const std::string& s);

struct NodeOptions {
  double timeout_secs = 30.0;
  /// Overrides the task's he_agency_count when set.
  std::optional<std::size_t> he_count;
  std::size_t paillier_bits = 2048;
  /// Seeded Paillier keys and encryption randomness. Deterministic, insecure.
  bool test_keys = false;
  std::uint64_t seed = 0;
  bool capture_frames = false;
  /// Submit to a random non-empty subset of HE agencies instead of exactly
  /// one. Sums then count such a sender more than once.
  bool multi_submit = false;
  int send_retries = 3;
  /// Reuse an existing identity instead of loading or generating one.
  std::optional<crypto::IdentityKey> identity;

  void apply(const EnvOverrides& env);
};

struct ExchangeResult {
  std::vector<double> sum;
  std::size_t addend_count = 0;
  bool partial = false;
  std::vector<std::string> missing_agencies;
};

struct NodeStats {
  std::size_t announces_sent = 0;
  std::size_t announces_received = 0;
  std::size_t registrations = 0;
  std::size_t frames_received = 0;
};

struct CapturedFrame {
  MessageType type;
  std::string task_id;
  std::string sender;
  std::string raw;
};

/// One CNNS peer: a TCP listener answering every request frame with one reply
/// frame, plus client operations driving a task through announce, key share,
/// HE role selection, encrypted submission, HE aggregation and result fetch.
class Node {
 public:
  using TaskHook = std::function<void(Node&, const TaskConfig&)>;

  Node(PeerConfig cfg, NodeOptions opts = {});
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Binds and starts serving. Throws TransportError if the port is taken.
  void start();
  /// Closes the listener and waits for in-flight handlers.
  void stop();
  /// Simulated crash: stops answering and sending immediately.
  void kill();
  bool running() const { return running_.load(); }

  const std::string& id() const { return cfg_.node_id; }
  const PeerConfig& config() const { return cfg_; }
  const NodeOptions& options() const { return opts_; }
  std::string identity_pem() const { return identity_.public_pem(); }

  /// HELLO handshake; records the peer's identity key on first contact.
  bool hello(const std::string& peer);
  std::size_t hello_all();

  /// Runs on a background worker whenever a task registers at this node.
  void set_task_hook(TaskHook hook);

  /// Registers the task locally and floods TASK_ANNOUNCE to all neighbors.
  void announce_task(const TaskConfig& task);
  bool has_task(const std::string& task_id) const;
  std::optional<TaskConfig> task(const std::string& task_id) const;
  TaskState state(const std::string& task_id) const;
  /// Forward-only; earlier states are ignored.
  void set_state(const std::string& task_id, TaskState s);

  /// Generates this node's per-task Paillier key if needed and sends
  /// PUBKEY_SHARE to every neighbor.
  void share_public_key(const std::string& task_id);
  std::optional<crypto::PublicKey> own_public_key(const std::string& task_id) const;
  std::optional<crypto::PublicKey> peer_public_key(const std::string& task_id, const std::string& owner) const;

  /// Uniform sample of n neighbors without replacement, returned sorted.
  static std::vector<std::string> select_he_agencies(std::vector<std::string> neighbors, std::size_t n,
                                                     std::mt19937_64& rng);

  /// Acting as target: picks HE agencies and sends HE_ROLE_NOTIFY to all
  /// neighbors. Returns the chosen agencies.
  std::vector<std::string> notify_he_roles(const std::string& task_id, int round);

  /// Acting as a neighbor of `target`: waits for its role notice and public
  /// key, then submits Enc(values) to one HE agency and skip markers to the
  /// rest. Returns false if the notice or key never arrived.
  bool submit_embedding(const std::string& task_id, int round, const std::string& target,
                        const std::vector<double>& values);

  /// Acting as target: polls the HE agencies with backoff and decrypts the
  /// combined sum. `length` is the expected vector length.
  ExchangeResult fetch_result(const std::string& task_id, int round, std::size_t length);

  /// notify_he_roles + submit to every neighbor target + fetch_result.
  ExchangeResult exchange_round(const std::string& task_id, int round, const std::vector<double>& values);

  struct PeerStatus {
    TaskState state = TaskState::idle;
    bool closed = false;
  };
  /// STATUS_QUERY about the (target, round) window at `peer`.
  PeerStatus query_status(const std::string& peer, const std::string& task_id, const std::string& target,
                          int round);

  NodeStats stats() const;
  std::vector<CapturedFrame> captured() const;
  /// Ciphertexts currently held by this node in its HE role for the task.
  std::size_t stored_ciphertexts(const std::string& task_id) const;

 private:
  using Clock = std::chrono::steady_clock;

  struct Delivery {
    std::optional<crypto::CiphertextVector> sum;
    std::size_t addend_count = 0;
    bool partial = false;
  };

  struct Inbox {
    std::map<std::string, crypto::CiphertextVector> received;  // by sender
    std::set<std::string> reported;
    std::optional<std::set<std::string>> expected;
    Clock::time_point opened;
    bool closed = false;
    std::optional<Delivery> unacked;  // kept for RESULT_FETCH until the target has it
  };

  struct RoleNotice {
    std::vector<std::string> he_list;
    std::vector<std::string> expected;
  };

  struct TaskRecord {
    TaskConfig cfg;
    TaskState state = TaskState::announced;
    std::optional<crypto::KeyPair> key;
    std::map<std::string, crypto::PublicKey> peer_keys;
    std::map<std::pair<std::string, int>, RoleNotice> roles;
    std::map<std::pair<std::string, int>, Inbox> inboxes;
    std::map<int, std::vector<std::string>> my_he_lists;
    std::map<int, Clock::time_point> my_round_start;
    std::map<int, std::map<std::string, Delivery>> deliveries;
  };

  void accept_loop();
  void reaper_loop();
  void serve_connection(int fd);
  Message handle(const Message& m);
  Message handle_announce(const Message& m, const nlohmann::json& control);
  Message handle_pubkey(const Message& m, const nlohmann::json& control);
  Message handle_role(const Message& m, const nlohmann::json& control);
  Message handle_submit(const Message& m, const nlohmann::json& control);
  Message handle_sum(const Message& m, const nlohmann::json& control);
  Message handle_status(const Message& m, const nlohmann::json& control);
  Message handle_fetch(const Message& m, const nlohmann::json& control);

  bool register_task(const TaskConfig& task);
  void close_inbox(const std::string& task_id, const std::string& target, int round);
  Message reply(MessageType type, const std::string& task_id, const std::string& peer, nlohmann::json control,
                nlohmann::json clear = nlohmann::json::object());

  std::string address_of(const std::string& peer) const;
  void ensure_identity(const std::string& peer);
  nlohmann::json seal_for(const std::string& peer, const nlohmann::json& control,
                          nlohmann::json clear = nlohmann::json::object());
  nlohmann::json open_control(const Message& m) const;
  Message call(const std::string& peer, const Message& m);
  Message call_with_retry(const std::string& peer, const Message& m);
  Message make(MessageType type, const std::string& task_id) const;
  crypto::RandomSource fresh_randomness();
  std::chrono::milliseconds timeout() const;
  std::chrono::milliseconds io_timeout() const;

  PeerConfig cfg_;
  NodeOptions opts_;
  crypto::IdentityKey identity_;

  std::unique_ptr<Listener> listener_;
  std::thread accept_thread_, reaper_thread_;
  std::vector<std::thread> workers_;
  std::atomic<bool> running_{false};
  std::atomic<bool> killed_{false};
  std::atomic<int> active_handlers_{0};

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, TaskRecord> tasks_;
  std::map<std::string, std::string> peer_identities_;
  std::map<std::string, std::string> contacts_;  // non-neighbor addresses learned from role notices
  std::set<std::string> seen_tasks_;
  std::mt19937_64 rng_;
  std::uint64_t draws_ = 0;
  NodeStats stats_;
  std::vector<CapturedFrame> captured_;
  TaskHook hook_;
};

}  // namespace cnl::protocol
