#pragma once

// Client for a PISA-style prover server speaking line-delimited JSON over TCP.
//
//   -> {"op":"init","theorem":X}            <- {"ok":true,"state":{...},"checkpoint":N}
//   -> {"op":"apply","from":N,"step":S,"timeout_ms":T}
//                                           <- {"ok":true,"state":{...},"checkpoint":M}
//                                            | {"ok":false,"err":code}
//   -> {"op":"state"}                       <- {"ok":true,"state":{...},"checkpoint":N}
//   -> {"op":"close"}                       <- {"ok":true}

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "proofaug/itp.hpp"

namespace proofaug {

// Blocking line-oriented TCP connection.
class LineSocket {
 public:
  LineSocket() = default;
  LineSocket(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);
  explicit LineSocket(int fd) : fd_(fd) {}
  ~LineSocket();
  LineSocket(LineSocket&& other) noexcept;
  LineSocket& operator=(LineSocket&& other) noexcept;
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;

  bool valid() const { return fd_ >= 0; }
  void send_line(std::string_view line);
  // Throws BackendTimeout when nothing arrives within `timeout`.
  std::string recv_line(std::chrono::milliseconds timeout);
  void reset();

 private:
  int fd_ = -1;
  std::string buffer_;
};

struct RemoteEndpoint {
  std::string host;
  std::uint16_t port = 0;

  // Accepts "host:port" or "tcp://host:port".
  static RemoteEndpoint parse(std::string_view url);
};

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteEndpoint endpoint,
                         std::chrono::milliseconds step_timeout = std::chrono::seconds(10));

  std::unique_ptr<Session> open(std::string_view theorem) override;
  std::string describe() const override;

 private:
  RemoteEndpoint endpoint_;
  std::chrono::milliseconds step_timeout_;
};

class RemoteSession : public Session {
 public:
  RemoteSession(std::string theorem, LineSocket socket, std::chrono::milliseconds step_timeout);
  ~RemoteSession() override;

  const std::string& theorem() const override { return theorem_; }
  ITPState initial() override;
  ITPState apply(const ITPState& from, const ProofStep& step) override;
  ITPState current() override;
  void restore(const ITPState& state) override;
  void close() override;
  bool closed() const override { return closed_; }
  void set_step_timeout(std::chrono::milliseconds timeout) override { step_timeout_ = timeout; }

 private:
  nlohmann::json request(const nlohmann::json& body, std::chrono::milliseconds timeout);
  ITPState read_state(const nlohmann::json& reply) const;

  std::string theorem_;
  LineSocket socket_;
  std::chrono::milliseconds step_timeout_;
  ITPState initial_;
  ITPState current_;
  bool closed_ = false;
};

}  // namespace proofaug
