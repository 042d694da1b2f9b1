#include "cnl/protocol/node.hpp"

#include "cnl/crypto/secure_sum.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <iostream>

namespace cnl::protocol {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<TaskState, const char*>, 7> kStateNames = {{
    {TaskState::idle, "Idle"},
    {TaskState::announced, "Announced"},
    {TaskState::embedding_computing, "EmbeddingComputing"},
    {TaskState::submitted, "Submitted"},
    {TaskState::aggregating, "Aggregating"},
    {TaskState::broadcast, "Broadcast"},
    {TaskState::done, "Done"},
}};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void warn(const std::string& node, const std::string& what) { std::cerr << "[" << node << "] " << what << "\n"; }

void advance(TaskState& cur, TaskState next) {
  if (static_cast<int>(next) > static_cast<int>(cur)) cur = next;
}

}  // namespace

std::string to_string(TaskState s) {
  for (const auto& [k, name] : kStateNames) {
    if (k == s) return name;
  }
  return "Idle";
}

TaskState task_state_from_string(const std::string& s) {
  for (const auto& [k, name] : kStateNames) {
    if (s == name) return k;
  }
  throw ProtocolError("unknown task state: " + s);
}

void NodeOptions::apply(const EnvOverrides& env) {
  if (env.timeout_secs) timeout_secs = *env.timeout_secs;
  if (env.he_count) he_count = *env.he_count;
}

Node::Node(PeerConfig cfg, NodeOptions opts) : cfg_(std::move(cfg)), opts_(std::move(opts)) {
  cfg_.validate();
  if (!(opts_.timeout_secs > 0.0)) throw ConfigError("timeout must be positive");
  if (opts_.identity) {
    identity_ = *opts_.identity;
  } else if (!cfg_.identity_key_path.empty()) {
    identity_ = crypto::IdentityKey::load_or_create(cfg_.identity_key_path);
  } else {
    identity_ = crypto::IdentityKey::generate();
  }
  rng_.seed(opts_.seed ^ fnv1a(cfg_.node_id));
  peer_identities_[cfg_.node_id] = identity_.public_pem();
}

Node::~Node() { stop(); }

void Node::start() {
  if (running_) return;
  listener_ = std::make_unique<Listener>(Endpoint::parse(cfg_.listen));
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  reaper_thread_ = std::thread([this] { reaper_loop(); });
}

void Node::stop() {
  const bool was_running = running_.exchange(false);
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (reaper_thread_.joinable()) reaper_thread_.join();
  cv_.notify_all();
  const auto deadline = Clock::now() + std::chrono::seconds(10);
  while (active_handlers_.load() > 0 && Clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
  (void)was_running;
}

void Node::kill() {
  killed_ = true;
  stop();
}

std::chrono::milliseconds Node::timeout() const {
  return std::chrono::milliseconds(static_cast<long long>(opts_.timeout_secs * 1000.0));
}

std::chrono::milliseconds Node::io_timeout() const {
  return std::max(std::chrono::milliseconds(10000), 2 * timeout());
}

void Node::accept_loop() {
  while (running_) {
    const int fd = listener_->accept_for(std::chrono::milliseconds(50));
    if (fd < 0) continue;
    if (killed_ || !running_) {
      close_fd(fd);
      continue;
    }
    ++active_handlers_;
    std::thread([this, fd] {
      serve_connection(fd);
      --active_handlers_;
    }).detach();
  }
}

void Node::serve_connection(int fd) {
  set_io_timeout(fd, io_timeout());
  try {
    auto raw = read_frame(fd);
    if (!raw || killed_) {
      close_fd(fd);
      return;
    }
    Message out;
    try {
      const Message m = Message::parse(*raw);
      {
        std::lock_guard lk(mu_);
        ++stats_.frames_received;
        if (opts_.capture_frames) captured_.push_back({m.type, m.task_id, m.sender, *raw});
      }
      out = handle(m);
    } catch (const ProtocolError& e) {
      out = make_error(cfg_.node_id, "", e.what());
    }
    if (!killed_) write_frame(fd, out.serialize());
  } catch (const std::exception& e) {
    if (!killed_) warn(cfg_.node_id, std::string("connection error: ") + e.what());
  }
  close_fd(fd);
}

void Node::reaper_loop() {
  while (running_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (killed_) return;
    std::vector<std::tuple<std::string, std::string, int>> due;
    {
      std::lock_guard lk(mu_);
      const auto now = Clock::now();
      for (auto& [tid, rec] : tasks_) {
        for (auto& [key, inbox] : rec.inboxes) {
          if (inbox.closed) continue;
          bool complete = inbox.expected.has_value();
          if (complete) {
            for (const auto& e : *inbox.expected) {
              if (!inbox.reported.count(e)) {
                complete = false;
                break;
              }
            }
          }
          if (complete || now - inbox.opened >= timeout()) due.emplace_back(tid, key.first, key.second);
        }
      }
    }
    for (const auto& [tid, target, round] : due) {
      try {
        close_inbox(tid, target, round);
      } catch (const std::exception& e) {
        warn(cfg_.node_id, std::string("aggregation failed: ") + e.what());
      }
    }
  }
}

void Node::close_inbox(const std::string& task_id, const std::string& target, int round) {
  std::map<std::string, crypto::CiphertextVector> received;
  bool partial = false;
  std::optional<crypto::PublicKey> pk;
  {
    std::lock_guard lk(mu_);
    auto& rec = tasks_.at(task_id);
    auto& inbox = rec.inboxes.at({target, round});
    if (inbox.closed) return;
    inbox.closed = true;
    received.swap(inbox.received);
    if (!inbox.expected) {
      partial = true;
    } else {
      for (const auto& e : *inbox.expected) {
        if (!inbox.reported.count(e)) partial = true;
      }
    }
    if (auto it = rec.peer_keys.find(target); it != rec.peer_keys.end()) pk = it->second;
    advance(rec.state, TaskState::aggregating);
  }

  Delivery d;
  d.partial = partial;
  if (!received.empty()) {
    if (!pk) {
      warn(cfg_.node_id, "no public key for " + target + "; dropping submissions");
      d.partial = true;
    } else {
      std::vector<crypto::CiphertextVector> parts;
      for (auto& [sender, c] : received) parts.push_back(std::move(c));
      try {
        auto sum = crypto::secure_sum(*pk, parts);
        d.addend_count = sum.addend_count;
        d.sum = std::move(sum);
      } catch (const std::exception& e) {
        warn(cfg_.node_id, std::string("secure_sum rejected submissions: ") + e.what());
        d.partial = true;
      }
    }
  }
  received.clear();

  const json control = {{"target", target}, {"round", round}, {"addend_count", d.addend_count}, {"partial", d.partial}};
  json clear = json::object();
  if (d.sum) clear["ciphertext"] = d.sum->to_json();
  bool acked = false;
  std::vector<std::string> recipients = cfg_.neighbor_ids();
  if (std::find(recipients.begin(), recipients.end(), target) == recipients.end()) recipients.push_back(target);
  for (const auto& peer : recipients) {
    try {
      Message m = make(MessageType::sum_broadcast, task_id);
      m.payload = seal_for(peer, control, clear);
      const Message r = call(peer, m);
      if (peer == target && r.type != MessageType::error) acked = true;
    } catch (const std::exception& e) {
      if (!killed_) warn(cfg_.node_id, "SUM_BROADCAST to " + peer + " failed: " + e.what());
    }
  }

  std::lock_guard lk(mu_);
  auto& rec = tasks_.at(task_id);
  auto& inbox = rec.inboxes.at({target, round});
  if (!acked) inbox.unacked = std::move(d);
  advance(rec.state, TaskState::broadcast);
  advance(rec.state, TaskState::done);
  cv_.notify_all();
}

Message Node::make(MessageType type, const std::string& task_id) const {
  Message m;
  m.type = type;
  m.task_id = task_id;
  m.sender = cfg_.node_id;
  return m;
}

std::string Node::address_of(const std::string& peer) const {
  if (peer == cfg_.node_id) return cfg_.listen;
  if (const auto* n = cfg_.neighbor(peer)) return n->addr;
  std::lock_guard lk(mu_);
  if (auto it = contacts_.find(peer); it != contacts_.end()) return it->second;
  throw ProtocolError("no address for peer " + peer);
}

Message Node::call(const std::string& peer, const Message& m) {
  if (killed_) throw TransportError("node is down");
  const std::string raw = round_trip(Endpoint::parse(address_of(peer)), m.serialize(), io_timeout());
  return Message::parse(raw);
}

Message Node::call_with_retry(const std::string& peer, const Message& m) {
  std::string last;
  for (int attempt = 0; attempt < std::max(1, opts_.send_retries); ++attempt) {
    try {
      return call(peer, m);
    } catch (const TransportError& e) {
      last = e.what();
      if (killed_) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    }
  }
  throw TransportError("unreachable after retries: " + peer + " (" + last + ")");
}

bool Node::hello(const std::string& peer) {
  Message m = make(MessageType::hello, "");
  m.payload = {{"node_id", cfg_.node_id}, {"identity", identity_.public_pem()}};
  try {
    const Message r = call(peer, m);
    if (r.type != MessageType::hello || r.payload.value("node_id", std::string()) != peer) return false;
    const std::string pem = r.payload.value("identity", std::string());
    if (pem.empty()) return false;
    std::lock_guard lk(mu_);
    auto [it, inserted] = peer_identities_.emplace(peer, pem);
    if (!inserted && it->second != pem) {
      warn(cfg_.node_id, "identity of " + peer + " changed; keeping the first one");
      return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::size_t Node::hello_all() {
  std::size_t ok = 0;
  for (const auto& n : cfg_.neighbors) ok += hello(n.id) ? 1 : 0;
  return ok;
}

void Node::ensure_identity(const std::string& peer) {
  {
    std::lock_guard lk(mu_);
    if (peer_identities_.count(peer)) return;
  }
  if (!hello(peer)) throw TransportError("no identity for " + peer);
}

json Node::seal_for(const std::string& peer, const json& control, json clear) {
  ensure_identity(peer);
  std::string pem;
  {
    std::lock_guard lk(mu_);
    pem = peer_identities_.at(peer);
  }
  clear["sealed"] = crypto::base64_encode(crypto::control_seal(pem, crypto::to_bytes(control.dump())));
  return clear;
}

json Node::open_control(const Message& m) const {
  if (!m.payload.contains("sealed")) return m.payload;
  if (!m.payload["sealed"].is_string()) throw ProtocolError("\"sealed\" must be a base64 string");
  try {
    const auto plain = crypto::control_open(identity_, crypto::base64_decode(m.payload["sealed"].get<std::string>()));
    return json::parse(crypto::to_string(plain));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("cannot open sealed payload: ") + e.what());
  }
}

Message Node::reply(MessageType type, const std::string& task_id, const std::string& peer, json control,
                    json clear) {
  Message r = make(type, task_id);
  bool known = false;
  {
    std::lock_guard lk(mu_);
    known = peer_identities_.count(peer) > 0;
  }
  if (known) {
    r.payload = seal_for(peer, control, std::move(clear));
  } else {
    r.payload = std::move(clear);
    for (auto& [k, v] : control.items()) r.payload[k] = v;
  }
  return r;
}

Message Node::handle(const Message& m) {
  try {
    if (m.type == MessageType::hello) {
      const std::string pem = m.payload.value("identity", std::string());
      if (!pem.empty()) {
        std::lock_guard lk(mu_);
        auto [it, inserted] = peer_identities_.emplace(m.sender, pem);
        if (!inserted && it->second != pem) return make_error(cfg_.node_id, "", "identity mismatch for " + m.sender);
      }
      Message r = make(MessageType::hello, "");
      r.payload = {{"node_id", cfg_.node_id}, {"identity", identity_.public_pem()}};
      return r;
    }
    const json control = open_control(m);
    if (m.type == MessageType::task_announce) return handle_announce(m, control);
    {
      std::lock_guard lk(mu_);
      if (!tasks_.count(m.task_id)) return make_error(cfg_.node_id, m.task_id, "unknown task " + m.task_id);
    }
    switch (m.type) {
      case MessageType::pubkey_share: return handle_pubkey(m, control);
      case MessageType::he_role_notify: return handle_role(m, control);
      case MessageType::emb_submit: return handle_submit(m, control);
      case MessageType::sum_broadcast: return handle_sum(m, control);
      case MessageType::status_query: return handle_status(m, control);
      case MessageType::result_fetch: return handle_fetch(m, control);
      default: return make_error(cfg_.node_id, m.task_id, "unexpected message " + to_string(m.type));
    }
  } catch (const std::exception& e) {
    return make_error(cfg_.node_id, m.task_id, e.what());
  }
}

bool Node::register_task(const TaskConfig& task) {
  std::lock_guard lk(mu_);
  if (!seen_tasks_.insert(task.task_id).second) return false;
  TaskRecord rec;
  rec.cfg = task;
  tasks_.emplace(task.task_id, std::move(rec));
  ++stats_.registrations;
  if (hook_) {
    workers_.emplace_back([this, task, hook = hook_] {
      try {
        hook(*this, task);
      } catch (const std::exception& e) {
        warn(cfg_.node_id, "task " + task.task_id + " failed: " + e.what());
      }
    });
  }
  cv_.notify_all();
  return true;
}

Message Node::handle_announce(const Message& m, const json& control) {
  const TaskConfig task = TaskConfig::from_json(control.at("task"));
  if (task.task_id != m.task_id) return make_error(cfg_.node_id, m.task_id, "task_id mismatch");
  {
    std::lock_guard lk(mu_);
    ++stats_.announces_received;
  }
  const bool fresh = register_task(task);
  if (fresh) {
    for (const auto& n : cfg_.neighbors) {
      if (n.id == m.sender) continue;
      try {
        Message fwd = make(MessageType::task_announce, task.task_id);
        fwd.payload = seal_for(n.id, {{"task", task.to_json()}});
        {
          std::lock_guard lk(mu_);
          ++stats_.announces_sent;
        }
        call(n.id, fwd);
      } catch (const std::exception& e) {
        if (!killed_) warn(cfg_.node_id, "announce to " + n.id + " failed: " + e.what());
      }
    }
  }
  return reply(MessageType::status_reply, m.task_id, m.sender,
               {{"duplicate", !fresh}, {"state", to_string(state(m.task_id))}});
}

Message Node::handle_pubkey(const Message& m, const json& control) {
  const auto pk = crypto::PublicKey::from_json(control.at("public_key"));
  std::lock_guard lk(mu_);
  auto& rec = tasks_.at(m.task_id);
  auto it = rec.peer_keys.find(m.sender);
  if (it != rec.peer_keys.end() && !(it->second == pk)) {
    warn(cfg_.node_id, "public key of " + m.sender + " replaced for task " + m.task_id);
  }
  rec.peer_keys.insert_or_assign(m.sender, pk);
  cv_.notify_all();
  return make(MessageType::status_reply, m.task_id);
}

Message Node::handle_role(const Message& m, const json& control) {
  const std::string target = control.at("target").get<std::string>();
  const int round = control.at("round").get<int>();
  if (target != m.sender) return make_error(cfg_.node_id, m.task_id, "role notice must come from its target");
  RoleNotice notice{control.at("he_list").get<std::vector<std::string>>(),
                    control.at("expected").get<std::vector<std::string>>()};
  std::lock_guard lk(mu_);
  // the target vouches for its agencies, which need not be our neighbors
  for (const auto& c : control.value("he_contacts", json::array())) {
    const std::string id = c.at("id").get<std::string>();
    if (id == cfg_.node_id || cfg_.neighbor(id)) continue;
    contacts_.insert_or_assign(id, c.at("addr").get<std::string>());
    if (c.contains("identity")) peer_identities_.emplace(id, c["identity"].get<std::string>());
  }
  auto& rec = tasks_.at(m.task_id);
  if (std::find(notice.he_list.begin(), notice.he_list.end(), cfg_.node_id) != notice.he_list.end()) {
    auto [it, inserted] = rec.inboxes.try_emplace({target, round});
    if (inserted) it->second.opened = Clock::now();
    it->second.expected = std::set<std::string>(notice.expected.begin(), notice.expected.end());
  }
  rec.roles[{target, round}] = std::move(notice);
  cv_.notify_all();
  return make(MessageType::status_reply, m.task_id);
}

Message Node::handle_submit(const Message& m, const json& control) {
  const std::string target = control.at("target").get<std::string>();
  const int round = control.at("round").get<int>();
  const bool skip = control.value("skip", false);
  std::optional<crypto::CiphertextVector> c;
  if (!skip) {
    if (!m.payload.contains("ciphertext")) return make_error(cfg_.node_id, m.task_id, "submission without ciphertext");
    c = crypto::CiphertextVector::from_json(m.payload["ciphertext"]);
  }
  std::lock_guard lk(mu_);
  auto& rec = tasks_.at(m.task_id);
  auto [it, inserted] = rec.inboxes.try_emplace({target, round});
  auto& inbox = it->second;
  if (inserted) inbox.opened = Clock::now();
  if (inbox.closed) return make_error(cfg_.node_id, m.task_id, "submission window closed");
  if (inbox.reported.insert(m.sender).second && c) inbox.received.emplace(m.sender, std::move(*c));
  advance(rec.state, TaskState::aggregating);
  return make(MessageType::status_reply, m.task_id);
}

Message Node::handle_sum(const Message& m, const json& control) {
  const std::string target = control.at("target").get<std::string>();
  const int round = control.at("round").get<int>();
  const bool mine = target == cfg_.node_id;
  if (mine) {
    Delivery d;
    d.addend_count = control.at("addend_count").get<std::size_t>();
    d.partial = control.value("partial", false);
    if (m.payload.contains("ciphertext")) d.sum = crypto::CiphertextVector::from_json(m.payload["ciphertext"]);
    if (d.addend_count > 0 && !d.sum) return make_error(cfg_.node_id, m.task_id, "sum without ciphertext");
    std::lock_guard lk(mu_);
    tasks_.at(m.task_id).deliveries[round].insert_or_assign(m.sender, std::move(d));
    cv_.notify_all();
  }
  Message r = make(MessageType::status_reply, m.task_id);
  r.payload = {{"stored", mine}};
  return r;
}

Message Node::handle_status(const Message& m, const json& control) {
  bool closed = false;
  TaskState s;
  {
    std::lock_guard lk(mu_);
    const auto& rec = tasks_.at(m.task_id);
    s = rec.state;
    if (control.contains("target")) {
      auto it = rec.inboxes.find({control["target"].get<std::string>(), control.value("round", 0)});
      closed = it != rec.inboxes.end() && it->second.closed;
    }
  }
  return reply(MessageType::status_reply, m.task_id, m.sender, {{"state", to_string(s)}, {"closed", closed}});
}

Message Node::handle_fetch(const Message& m, const json& control) {
  const std::string target = control.at("target").get<std::string>();
  const int round = control.at("round").get<int>();
  if (target != m.sender) return make_error(cfg_.node_id, m.task_id, "only the target may fetch its sum");
  std::optional<Delivery> d;
  {
    std::lock_guard lk(mu_);
    auto& rec = tasks_.at(m.task_id);
    auto it = rec.inboxes.find({target, round});
    if (it == rec.inboxes.end() || !it->second.closed || !it->second.unacked) {
      return make_error(cfg_.node_id, m.task_id, "no pending result");
    }
    d = std::move(it->second.unacked);
    it->second.unacked.reset();
  }
  json clear = json::object();
  if (d->sum) clear["ciphertext"] = d->sum->to_json();
  return reply(MessageType::sum_broadcast, m.task_id, m.sender,
               {{"target", target}, {"round", round}, {"addend_count", d->addend_count}, {"partial", d->partial}},
               std::move(clear));
}

void Node::set_task_hook(TaskHook hook) {
  std::lock_guard lk(mu_);
  hook_ = std::move(hook);
}

void Node::announce_task(const TaskConfig& task) {
  task.validate();
  if (!cfg_.neighbors.empty() && task.he_agency_count > cfg_.neighbors.size() && !opts_.he_count) {
    throw ConfigError("he_agency_count exceeds the initiator's neighbor count");
  }
  register_task(task);
  for (const auto& n : cfg_.neighbors) {
    try {
      Message m = make(MessageType::task_announce, task.task_id);
      m.payload = seal_for(n.id, {{"task", task.to_json()}});
      {
        std::lock_guard lk(mu_);
        ++stats_.announces_sent;
      }
      call(n.id, m);
    } catch (const std::exception& e) {
      warn(cfg_.node_id, "announce to " + n.id + " failed: " + e.what());
    }
  }
}

bool Node::has_task(const std::string& task_id) const {
  std::lock_guard lk(mu_);
  return tasks_.count(task_id) > 0;
}

std::optional<TaskConfig> Node::task(const std::string& task_id) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second.cfg;
}

TaskState Node::state(const std::string& task_id) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  return it == tasks_.end() ? TaskState::idle : it->second.state;
}

void Node::set_state(const std::string& task_id, TaskState s) {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  if (it != tasks_.end()) advance(it->second.state, s);
}

crypto::RandomSource Node::fresh_randomness() {
  if (!opts_.test_keys) return crypto::RandomSource::os();
  std::lock_guard lk(mu_);
  return crypto::RandomSource::seeded(rng_());
}

void Node::share_public_key(const std::string& task_id) {
  bool need_key = false;
  {
    std::lock_guard lk(mu_);
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ProtocolError("unknown task " + task_id);
    need_key = !it->second.key;
  }
  if (need_key) {
    auto rs = fresh_randomness();
    auto kp = crypto::paillier_keygen(opts_.paillier_bits, rs,
                                      opts_.test_keys ? crypto::KeyMode::test : crypto::KeyMode::production);
    std::lock_guard lk(mu_);
    auto& rec = tasks_.at(task_id);
    if (!rec.key) rec.key = std::move(kp);
  }
  json control;
  {
    std::lock_guard lk(mu_);
    control = {{"public_key", tasks_.at(task_id).key->pub.to_json()}};
  }
  for (const auto& n : cfg_.neighbors) {
    try {
      Message m = make(MessageType::pubkey_share, task_id);
      m.payload = seal_for(n.id, control);
      const Message r = call_with_retry(n.id, m);
      if (r.type == MessageType::error) warn(cfg_.node_id, "PUBKEY_SHARE rejected by " + n.id);
    } catch (const std::exception& e) {
      warn(cfg_.node_id, std::string("PUBKEY_SHARE: ") + e.what());
    }
  }
}

std::optional<crypto::PublicKey> Node::own_public_key(const std::string& task_id) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end() || !it->second.key) return std::nullopt;
  return it->second.key->pub;
}

std::optional<crypto::PublicKey> Node::peer_public_key(const std::string& task_id, const std::string& owner) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  auto k = it->second.peer_keys.find(owner);
  if (k == it->second.peer_keys.end()) return std::nullopt;
  return k->second;
}

std::vector<std::string> Node::select_he_agencies(std::vector<std::string> neighbors, std::size_t n,
                                                  std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("select_he_agencies: n must be >= 1");
  if (n > neighbors.size()) throw std::invalid_argument("select_he_agencies: n exceeds the neighbor count");
  std::sort(neighbors.begin(), neighbors.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, neighbors.size() - 1);
    std::swap(neighbors[i], neighbors[pick(rng)]);
  }
  neighbors.resize(n);
  std::sort(neighbors.begin(), neighbors.end());
  return neighbors;
}

std::vector<std::string> Node::notify_he_roles(const std::string& task_id, int round) {
  const auto neighbors = cfg_.neighbor_ids();
  std::vector<std::string> he;
  {
    std::lock_guard lk(mu_);
    auto& rec = tasks_.at(task_id);
    if (!neighbors.empty()) {
      const std::size_t want = std::min(opts_.he_count.value_or(rec.cfg.he_agency_count), neighbors.size());
      he = select_he_agencies(neighbors, want, rng_);
    }
    rec.my_he_lists[round] = he;
    rec.my_round_start[round] = Clock::now();
    rec.deliveries[round].clear();
  }
  json contacts = json::array();
  for (const auto& h : he) {
    try {
      ensure_identity(h);
    } catch (const std::exception&) {
      // submitters will try HELLO themselves
    }
    std::lock_guard lk(mu_);
    json c = {{"id", h}, {"addr", cfg_.neighbor(h)->addr}};
    if (auto it = peer_identities_.find(h); it != peer_identities_.end()) c["identity"] = it->second;
    contacts.push_back(std::move(c));
  }
  const json control = {{"target", cfg_.node_id}, {"round", round}, {"he_list", he},
                        {"he_contacts", contacts}, {"expected", neighbors}};
  for (const auto& n : neighbors) {
    try {
      Message m = make(MessageType::he_role_notify, task_id);
      m.payload = seal_for(n, control);
      call(n, m);
    } catch (const std::exception& e) {
      if (!killed_) warn(cfg_.node_id, "HE_ROLE_NOTIFY to " + n + " failed: " + e.what());
    }
  }
  return he;
}

bool Node::submit_embedding(const std::string& task_id, int round, const std::string& target,
                            const std::vector<double>& values) {
  std::vector<std::string> he;
  crypto::PublicKey pk;
  {
    std::unique_lock lk(mu_);
    const bool ready = cv_.wait_for(lk, timeout(), [&] {
      if (killed_) return true;
      auto& rec = tasks_.at(task_id);
      return rec.roles.count({target, round}) > 0 && rec.peer_keys.count(target) > 0;
    });
    if (!ready || killed_) return false;
    auto& rec = tasks_.at(task_id);
    he = rec.roles.at({target, round}).he_list;
    pk = rec.peer_keys.at(target);
    advance(rec.state, TaskState::submitted);
  }
  if (he.empty()) return false;

  std::set<std::string> dest;
  {
    std::lock_guard lk(mu_);
    if (opts_.multi_submit) {
      while (dest.empty()) {
        for (const auto& h : he) {
          if (std::bernoulli_distribution(0.5)(rng_)) dest.insert(h);
        }
      }
    } else {
      dest.insert(he[std::uniform_int_distribution<std::size_t>(0, he.size() - 1)(rng_)]);
    }
  }

  auto rs = fresh_randomness();
  const crypto::FixedPointCodec codec(pk.n);
  const json cipher = crypto::encrypt_vector(pk, codec, values, rs).to_json();
  for (const auto& h : he) {
    const bool send = dest.count(h) > 0;
    try {
      Message m = make(MessageType::emb_submit, task_id);
      json clear = json::object();
      if (send) clear["ciphertext"] = cipher;
      m.payload = seal_for(h, {{"target", target}, {"round", round}, {"skip", !send}}, std::move(clear));
      const Message r = call(h, m);
      if (r.type == MessageType::error) {
        warn(cfg_.node_id, "EMB_SUBMIT rejected by " + h + ": " + r.payload.value("error", std::string()));
      }
    } catch (const std::exception& e) {
      if (!killed_) warn(cfg_.node_id, "EMB_SUBMIT to " + h + " failed: " + e.what());
    }
  }
  return true;
}

Node::PeerStatus Node::query_status(const std::string& peer, const std::string& task_id, const std::string& target,
                                    int round) {
  Message m = make(MessageType::status_query, task_id);
  m.payload = seal_for(peer, {{"target", target}, {"round", round}});
  const Message r = call(peer, m);
  if (r.type == MessageType::error) throw ProtocolError(r.payload.value("error", std::string("status query failed")));
  const json c = open_control(r);
  PeerStatus s;
  s.state = task_state_from_string(c.at("state").get<std::string>());
  s.closed = c.value("closed", false);
  return s;
}

ExchangeResult Node::fetch_result(const std::string& task_id, int round, std::size_t length) {
  std::vector<std::string> he;
  Clock::time_point start;
  crypto::KeyPair key;
  {
    std::lock_guard lk(mu_);
    auto& rec = tasks_.at(task_id);
    if (!rec.my_he_lists.count(round)) throw ProtocolError("fetch_result before notify_he_roles");
    if (!rec.key) throw ProtocolError("fetch_result without a task key");
    he = rec.my_he_lists.at(round);
    start = rec.my_round_start.at(round);
    key = *rec.key;
  }
  const auto deadline = start + timeout() + timeout() / 2;
  auto backoff = std::chrono::milliseconds(100);
  auto missing_now = [&] {
    std::vector<std::string> out;
    const auto& got = tasks_.at(task_id).deliveries[round];
    for (const auto& h : he) {
      if (!got.count(h)) out.push_back(h);
    }
    return out;
  };

  for (;;) {
    std::vector<std::string> missing;
    {
      std::unique_lock lk(mu_);
      cv_.wait_until(lk, std::min(deadline, Clock::now() + backoff), [&] { return missing_now().empty() || killed_; });
      missing = missing_now();
    }
    if (missing.empty() || Clock::now() >= deadline || killed_) break;
    for (const auto& h : missing) {
      try {
        if (!query_status(h, task_id, cfg_.node_id, round).closed) continue;
        Message m = make(MessageType::result_fetch, task_id);
        m.payload = seal_for(h, {{"target", cfg_.node_id}, {"round", round}});
        const Message r = call(h, m);
        if (r.type != MessageType::sum_broadcast) continue;
        const json c = open_control(r);
        Delivery d;
        d.addend_count = c.at("addend_count").get<std::size_t>();
        d.partial = c.value("partial", false);
        if (r.payload.contains("ciphertext")) d.sum = crypto::CiphertextVector::from_json(r.payload["ciphertext"]);
        std::lock_guard lk(mu_);
        tasks_.at(task_id).deliveries[round].insert_or_assign(h, std::move(d));
      } catch (const std::exception&) {
        // agency down or not ready; retry after backoff
      }
    }
    backoff = std::min(backoff * 2, std::chrono::milliseconds(3200));
  }

  ExchangeResult res;
  res.sum.assign(length, 0.0);
  std::vector<crypto::CiphertextVector> parts;
  {
    std::lock_guard lk(mu_);
    const auto& got = tasks_.at(task_id).deliveries[round];
    for (const auto& h : he) {
      auto it = got.find(h);
      if (it == got.end()) {
        res.missing_agencies.push_back(h);
        res.partial = true;
        continue;
      }
      res.partial = res.partial || it->second.partial;
      if (it->second.sum) parts.push_back(*it->second.sum);
    }
  }
  if (!parts.empty()) {
    const auto total = crypto::secure_sum(key.pub, parts);
    const crypto::FixedPointCodec codec(key.pub.n, total.scale_log2);
    auto values = crypto::decrypt_vector(key.pub, key.priv, codec, total);
    if (values.size() != length) throw ProtocolError("aggregated vector has the wrong length");
    res.sum = std::move(values);
    res.addend_count = total.addend_count;
  }
  return res;
}

ExchangeResult Node::exchange_round(const std::string& task_id, int round, const std::vector<double>& values) {
  notify_he_roles(task_id, round);
  for (const auto& t : cfg_.neighbor_ids()) submit_embedding(task_id, round, t, values);
  auto res = fetch_result(task_id, round, values.size());
  set_state(task_id, TaskState::done);
  return res;
}

NodeStats Node::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

std::vector<CapturedFrame> Node::captured() const {
  std::lock_guard lk(mu_);
  return captured_;
}

std::size_t Node::stored_ciphertexts(const std::string& task_id) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return 0;
  std::size_t n = 0;
  for (const auto& [key, inbox] : it->second.inboxes) {
    n += inbox.received.size();
    if (inbox.unacked && inbox.unacked->sum) ++n;
  }
  return n;
}

}  // namespace cnl::protocol
