#pragma once

#include <memory>

#include "teleop/harness/experiment.hpp"

namespace teleop {

// HTTP and WebSocket front end for the operator console. GET /session
// upgrades to the wire protocol, GET /session/export.csv returns the
// server-recorded operator stream, anything else is a static file from
// cfg.static_dir. One live session at a time; a second gets 409.
//
// Within a session the pipeline runs episode after episode over the
// client's pose stream, paced by its timestamps. Stage-2 training can be
// started, paused and stopped from the client when a checkpoint is loaded.
class Server {
 public:
  // Throws ConfigError unless the clock mode is realtime; loads
  // cfg.checkpoint when set.
  explicit Server(ExperimentConfig cfg);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds cfg.port (0 picks a free port) and serves on a background thread.
  // Throws Error when the port cannot be bound.
  void start();
  int port() const;
  // Closes the listener and every session, then joins all threads.
  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();

  struct Impl;  // shared with the connection handlers

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace teleop
