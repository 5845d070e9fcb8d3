#pragma once

// Serves MiniITP sessions over the line-delimited JSON protocol spoken by
// RemoteSession. Used to exercise the remote client end to end and to run a
// campaign against a prover in another process.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

#include "proofaug/mini_itp.hpp"

namespace proofaug {

class MiniServer {
 public:
  // Port 0 picks a free port; see port().
  MiniServer(MiniBackend backend, std::uint16_t port = 0, std::string host = "127.0.0.1");
  ~MiniServer();
  MiniServer(const MiniServer&) = delete;
  MiniServer& operator=(const MiniServer&) = delete;

  std::uint16_t port() const { return port_; }
  void start();
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  std::uint64_t connections() const { return connections_.load(); }

 private:
  void accept_loop();
  void serve(int fd);

  MiniBackend backend_;
  std::string host_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> connections_{0};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
};

}  // namespace proofaug
