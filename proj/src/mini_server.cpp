#include "proofaug/mini_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "proofaug/error.hpp"
#include "proofaug/remote_itp.hpp"

namespace proofaug {

MiniServer::MiniServer(MiniBackend backend, std::uint16_t port, std::string host)
    : backend_(std::move(backend)), host_(std::move(host)), port_(port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ItpUnavailable(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1)
    throw ConfigError("MiniServer needs an IPv4 address, got '" + host_ + "'");
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw ItpUnavailable("cannot listen on " + host_ + ":" + std::to_string(port_) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

MiniServer::~MiniServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void MiniServer::start() {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void MiniServer::stop() {
  running_ = false;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void MiniServer::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void MiniServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    ++connections_;
    std::lock_guard<std::mutex> lock(mutex_);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void MiniServer::serve(int fd) {
  LineSocket sock(fd);
  std::unique_ptr<MiniSession> session;
  auto reply_state = [&](const ITPState& s) {
    sock.send_line(nlohmann::json{{"ok", true}, {"state", to_json(s)}, {"checkpoint", s.checkpoint}}.dump());
  };
  auto reply_err = [&](const std::string& code, const std::string& message) {
    sock.send_line(nlohmann::json{{"ok", false}, {"err", code}, {"message", message}}.dump());
  };
  while (running_) {
    std::string line;
    try {
      line = sock.recv_line(std::chrono::milliseconds(200));
    } catch (const BackendTimeout&) {
      continue;
    } catch (const Error&) {
      return;  // peer went away
    }
    try {
      const nlohmann::json req = nlohmann::json::parse(line);
      const std::string op = req.value("op", "");
      if (op == "init") {
        session = backend_.open_mini(req.at("theorem").get<std::string>());
        reply_state(session->initial());
      } else if (op == "close") {
        sock.send_line(R"({"ok":true})");
        return;
      } else if (!session) {
        reply_err("closed", "no theorem initialised");
      } else if (op == "apply") {
        ITPState from;
        from.checkpoint = req.at("from").get<std::uint64_t>();
        ProofStep step;
        step.text = req.at("step").get<std::string>();
        const ITPState s = session->apply(from, step);
        if (s.timed_out) reply_err("timeout", s.message);
        else reply_state(s);
      } else if (op == "state") {
        reply_state(session->current());
      } else {
        reply_err("bad_request", "unknown op '" + op + "'");
      }
    } catch (const UnknownCheckpoint& e) {
      reply_err("unknown_checkpoint", e.what());
    } catch (const ItpUnavailable& e) {
      reply_err("unknown_theorem", e.what());
    } catch (const std::exception& e) {
      try {
        reply_err("bad_request", e.what());
      } catch (const Error&) {
        return;
      }
    }
  }
}

}  // namespace proofaug
