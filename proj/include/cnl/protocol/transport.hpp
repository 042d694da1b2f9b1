#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cnl::protocol {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::size_t kMaxFrameBytes = 256u << 20;

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  /// "host:port"; throws std::invalid_argument.
  static Endpoint parse(const std::string& addr);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// 4-byte big-endian length, then the bytes.
void write_frame(int fd, const std::string& payload);
/// nullopt on a clean EOF before the length prefix. Throws TransportError on
/// truncation, oversize frames or socket errors.
std::optional<std::string> read_frame(int fd);

/// Bound, listening TCP socket. Throws TransportError when the port is taken.
class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  /// Waits up to `wait` for a connection; -1 on timeout.
  int accept_for(std::chrono::milliseconds wait);
  void close();
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

void set_io_timeout(int fd, std::chrono::milliseconds t);
void close_fd(int fd);

/// Opens a connection, sends one frame, reads one reply frame, closes.
std::string round_trip(const Endpoint& ep, const std::string& frame, std::chrono::milliseconds io_timeout);

}  // namespace cnl::protocol
