#include "proofaug/remote_itp.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "proofaug/error.hpp"

namespace proofaug {

// ------------------------------------------------------------ LineSocket

LineSocket::LineSocket(const std::string& host, std::uint16_t port,
                       std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0)
    throw ItpUnavailable("cannot resolve " + host + ": " + ::gai_strerror(rc));

  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (fd_ < 0)
    throw ItpUnavailable("cannot connect to " + host + ":" + service + ": " + std::strerror(errno));
}

LineSocket::~LineSocket() { reset(); }

LineSocket::LineSocket(LineSocket&& other) noexcept
    : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

LineSocket& LineSocket::operator=(LineSocket&& other) noexcept {
  if (this != &other) {
    reset();
    fd_ = other.fd_;
    buffer_ = std::move(other.buffer_);
    other.fd_ = -1;
  }
  return *this;
}

void LineSocket::reset() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buffer_.clear();
}

void LineSocket::send_line(std::string_view line) {
  if (fd_ < 0) throw ItpUnavailable("socket is not connected");
  std::string data(line);
  data += '\n';
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ItpUnavailable(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string LineSocket::recv_line(std::chrono::milliseconds timeout) {
  if (fd_ < 0) throw ItpUnavailable("socket is not connected");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BackendTimeout("no reply within timeout");
    pollfd p{fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ItpUnavailable(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) throw BackendTimeout("no reply within timeout");
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) throw ItpUnavailable("connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ItpUnavailable(std::string("recv failed: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ------------------------------------------------------------ endpoint

RemoteEndpoint RemoteEndpoint::parse(std::string_view url) {
  if (url.substr(0, 6) == "tcp://") url.remove_prefix(6);
  const auto colon = url.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= url.size())
    throw ConfigError("remote endpoint must look like host:port, got '" + std::string(url) + "'");
  RemoteEndpoint ep;
  ep.host = std::string(url.substr(0, colon));
  try {
    const int port = std::stoi(std::string(url.substr(colon + 1)));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ConfigError("invalid port in '" + std::string(url) + "'");
  }
  return ep;
}

// ------------------------------------------------------------ backend

RemoteBackend::RemoteBackend(RemoteEndpoint endpoint, std::chrono::milliseconds step_timeout)
    : endpoint_(std::move(endpoint)), step_timeout_(step_timeout) {}

std::string RemoteBackend::describe() const {
  return "remote:" + endpoint_.host + ":" + std::to_string(endpoint_.port);
}

std::unique_ptr<Session> RemoteBackend::open(std::string_view theorem) {
  LineSocket socket(endpoint_.host, endpoint_.port, std::chrono::seconds(5));
  return std::make_unique<RemoteSession>(std::string(theorem), std::move(socket), step_timeout_);
}

// ------------------------------------------------------------ session

namespace {
constexpr std::chrono::milliseconds kReplyGrace{5000};
}

RemoteSession::RemoteSession(std::string theorem, LineSocket socket,
                             std::chrono::milliseconds step_timeout)
    : theorem_(std::move(theorem)), socket_(std::move(socket)), step_timeout_(step_timeout) {
  nlohmann::json reply = request({{"op", "init"}, {"theorem", theorem_}}, kReplyGrace);
  if (!reply.value("ok", false))
    throw ItpUnavailable("server rejected theorem: " + reply.value("err", std::string("?")));
  initial_ = read_state(reply);
  current_ = initial_;
}

RemoteSession::~RemoteSession() {
  try {
    close();
  } catch (...) {
  }
}

nlohmann::json RemoteSession::request(const nlohmann::json& body,
                                      std::chrono::milliseconds timeout) {
  if (closed_) throw SessionClosed("remote session for '" + theorem_ + "' is closed");
  socket_.send_line(body.dump());
  const std::string line = socket_.recv_line(timeout);
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ItpUnavailable(std::string("malformed reply from prover: ") + e.what());
  }
}

ITPState RemoteSession::read_state(const nlohmann::json& reply) const {
  ITPState s = state_from_json(reply.at("state"));
  s.checkpoint = reply.value("checkpoint", std::uint64_t{0});
  return s;
}

ITPState RemoteSession::initial() {
  current_ = initial_;
  return initial_;
}

ITPState RemoteSession::apply(const ITPState& from, const ProofStep& step) {
  if (closed_) throw SessionClosed("remote session for '" + theorem_ + "' is closed");
  ++transitions_;
  if (from.error) return from;
  nlohmann::json reply;
  try {
    reply = request({{"op", "apply"},
                     {"from", from.checkpoint},
                     {"step", step.text},
                     {"timeout_ms", step_timeout_.count()}},
                    step_timeout_ + kReplyGrace);
  } catch (const BackendTimeout&) {
    // The connection may still deliver a stale reply; drop it.
    socket_.reset();
    closed_ = true;
    ITPState s;
    s.error = true;
    s.timed_out = true;
    s.state_text = "timeout: no reply from prover";
    s.checkpoint = from.checkpoint;
    return s;
  }
  if (reply.value("ok", false)) {
    ITPState s = read_state(reply);
    if (!s.error) current_ = s;
    else s.checkpoint = from.checkpoint;
    return s;
  }
  const std::string code = reply.value("err", std::string("error"));
  if (code == "unknown_checkpoint")
    throw UnknownCheckpoint("prover does not know checkpoint " + std::to_string(from.checkpoint));
  if (code == "closed") throw SessionClosed("prover closed the session");
  ITPState s;
  s.error = true;
  s.timed_out = code == "timeout";
  s.state_text = code;
  s.message = reply.value("message", code);
  s.checkpoint = from.checkpoint;
  current_ = from;
  return s;
}

ITPState RemoteSession::current() {
  nlohmann::json reply = request({{"op", "state"}}, kReplyGrace);
  if (!reply.value("ok", false))
    throw ItpUnavailable("state query failed: " + reply.value("err", std::string("?")));
  current_ = read_state(reply);
  return current_;
}

void RemoteSession::restore(const ITPState& state) {
  if (closed_) throw SessionClosed("remote session for '" + theorem_ + "' is closed");
  // Checkpoints are addressed explicitly by the next apply.
  current_ = state;
}

void RemoteSession::close() {
  if (closed_) return;
  try {
    socket_.send_line(nlohmann::json{{"op", "close"}}.dump());
    socket_.recv_line(std::chrono::milliseconds(500));
  } catch (const Error&) {
  }
  socket_.reset();
  closed_ = true;
}

}  // namespace proofaug
