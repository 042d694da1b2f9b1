#include "cnl/protocol/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace cnl::protocol {

Endpoint Endpoint::parse(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw std::invalid_argument("address must be host:port, got '" + addr + "'");
  }
  Endpoint ep;
  ep.host = addr.substr(0, colon);
  const std::string port = addr.substr(colon + 1);
  std::size_t used = 0;
  unsigned long p = 0;
  try {
    p = std::stoul(port, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in '" + addr + "'");
  }
  if (used != port.size() || p > 65535) throw std::invalid_argument("bad port in '" + addr + "'");
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

namespace {

void write_all(int fd, const char* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

// false on EOF before any byte was read
bool read_all(int fd, char* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host " + ep.host);
  }
  sockaddr_in sa{};
  std::memcpy(&sa, res->ai_addr, sizeof(sa));
  freeaddrinfo(res);
  sa.sin_port = htons(ep.port);
  return sa;
}

}  // namespace

void write_frame(int fd, const std::string& payload) {
  if (payload.size() > kMaxFrameBytes) throw TransportError("frame too large");
  const auto len = static_cast<std::uint32_t>(payload.size());
  const unsigned char hdr[4] = {static_cast<unsigned char>(len >> 24), static_cast<unsigned char>(len >> 16),
                                static_cast<unsigned char>(len >> 8), static_cast<unsigned char>(len)};
  write_all(fd, reinterpret_cast<const char*>(hdr), 4);
  write_all(fd, payload.data(), payload.size());
}

std::optional<std::string> read_frame(int fd) {
  unsigned char hdr[4];
  if (!read_all(fd, reinterpret_cast<char*>(hdr), 4)) return std::nullopt;
  const std::uint32_t len = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                            (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
  if (len > kMaxFrameBytes) throw TransportError("frame too large");
  std::string out(len, '\0');
  if (len > 0 && !read_all(fd, out.data(), len)) throw TransportError("connection closed mid-frame");
  return out;
}

void set_io_timeout(int fd, std::chrono::milliseconds t) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(t.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

Listener::Listener(const Endpoint& ep) {
  const sockaddr_in sa = resolve(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) != 0) {
    const std::string err = std::strerror(errno);
    close();
    throw TransportError("cannot bind " + ep.str() + ": " + err);
  }
  if (::listen(fd_, 128) != 0) {
    close();
    throw TransportError("listen failed on " + ep.str());
  }
  sockaddr_in bound{};
  socklen_t blen = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
  port_ = ntohs(bound.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

int Listener::accept_for(std::chrono::milliseconds wait) {
  if (fd_ < 0) return -1;
  pollfd p{fd_, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(wait.count()));
  if (r <= 0 || !(p.revents & POLLIN)) return -1;
  return ::accept(fd_, nullptr, nullptr);
}

std::string round_trip(const Endpoint& ep, const std::string& frame, std::chrono::milliseconds io_timeout) {
  const sockaddr_in sa = resolve(ep);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  set_io_timeout(fd, io_timeout);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw TransportError("cannot connect to " + ep.str() + ": " + err);
  }
  std::optional<std::string> reply;
  try {
    write_frame(fd, frame);
    reply = read_frame(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (!reply) throw TransportError("peer closed without reply: " + ep.str());
  return *reply;
}

}  // namespace cnl::protocol
