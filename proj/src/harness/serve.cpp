#include "teleop/harness/serve.hpp"

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <climits>
#include <condition_variable>
#include <deque>
#include <fmt/format.h>
#include <fstream>
#include <mutex>
#include <spdlog/spdlog.h>
#include <sstream>
#include <thread>

#include "teleop/agent/checkpoint.hpp"
#include "teleop/agent/trainer.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/harness/commands.hpp"
#include "teleop/harness/wire.hpp"
#include "teleop/operator/session.hpp"
#include "teleop/operator/source.hpp"

namespace teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr auto kInputWait = std::chrono::seconds(10);
constexpr auto kPollSlice = std::chrono::milliseconds(50);
constexpr std::size_t kMaxQueued = 1024;  // frame and latency messages beyond this are dropped
constexpr std::uint64_t kFramesPerLatencyUpdate = 5;
constexpr std::uint64_t kLiveTrainStream = 2001;
constexpr std::uint64_t kPolicyStream = 7;

std::string_view mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

// Path below `root` named by an HTTP target, or empty when the target
// escapes the root.
std::filesystem::path static_path(const std::filesystem::path& root, std::string_view target) {
  std::string path(target.substr(0, target.find_first_of("?#")));
  if (path.empty() || path.front() != '/') return {};
  if (path.back() == '/') path += "index.html";
  const std::filesystem::path rel = std::filesystem::path(path.substr(1)).lexically_normal();
  for (const auto& part : rel) {
    if (part == "..") return {};
  }
  if (rel.is_absolute()) return {};
  return root / rel;
}

// Pose stream of one episode: episode time t reads the live input at
// offset + t, polling so an abort is seen while waiting.
class EpisodeInput : public PoseSource {
 public:
  EpisodeInput(LiveInput& input, SimTime offset, const std::atomic<bool>& abort)
      : input_(input), offset_(offset), abort_(abort) {}

  std::optional<Pose> sample(SimTime t) override {
    last_ = t;
    const double at = to_ms(offset_ + t);
    const auto deadline = std::chrono::steady_clock::now() + kInputWait;
    while (!abort_) {
      if (auto p = input_.pose_at(at, kPollSlice)) return p;
      if (input_.closed() || std::chrono::steady_clock::now() >= deadline) break;
    }
    return std::nullopt;
  }

  SimTime last() const { return last_; }

 private:
  LiveInput& input_;
  SimTime offset_;
  const std::atomic<bool>& abort_;
  SimTime last_{0};
};

struct Stopped {};

}  // namespace

class LiveSession;

struct Server::Impl : std::enable_shared_from_this<Impl> {
  ExperimentConfig cfg;
  std::optional<PolicyParams> checkpoint;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;

  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;  // shutdown begun
  bool done = false;     // every thread joined
  int port = 0;
  std::weak_ptr<LiveSession> active;
  std::vector<std::thread> workers;
  Session recorded;

  void accept();
  void shutdown();
};

namespace {

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, std::shared_ptr<Server::Impl> server)
      : stream_(std::move(socket)), server_(std::move(server)) {}

  void run() {
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->handle();
                     });
  }

 private:
  void handle();
  void respond(http::status status, std::string body, std::string_view type);

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<Server::Impl> server_;
  std::shared_ptr<http::response<http::string_body>> res_;
};

}  // namespace

class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(tcp::socket socket, std::shared_ptr<Server::Impl> server)
      : ws_(std::move(socket)), server_(std::move(server)), cfg_(server_->cfg) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) {
        spdlog::warn("websocket handshake failed: {}", ec.message());
        return;
      }
      self->started_ = std::chrono::steady_clock::now();
      self->read();
    });
  }

  // Ends the worker and closes the socket; safe from any thread.
  void close() {
    {
      std::lock_guard lock(mutex_);
      closing_ = true;
      stop_training_ = true;
    }
    abort_ = true;
    cv_.notify_all();
    input_->close();
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().close(ec);
    });
  }

 private:
  enum class Training { kIdle, kRequested, kRunning, kPaused };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        self->handle(decode(text));
      } catch (const Error& e) {
        spdlog::warn("dropping client message: {}", e.what());
      }
      self->read();
    });
  }

  double server_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started_)
        .count();
  }

  // Queues a message; callable from the worker thread.
  void send(WireKind kind, json payload, std::optional<double> t_client = std::nullopt) {
    net::post(ws_.get_executor(), [self = shared_from_this(), kind, t_client,
                                   payload = std::move(payload)]() mutable {
      const bool droppable = kind == WireKind::kFrameState || kind == WireKind::kLatencyUpdate;
      if (droppable && self->queue_.size() >= kMaxQueued) return;
      WireMessage m;
      m.kind = kind;
      m.seq = ++self->out_seq_;
      m.t_client = t_client;
      m.t_server = self->server_ms();
      m.payload = std::move(payload);
      self->queue_.push_back(encode(m));
      if (self->queue_.size() == 1) self->write_next();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->queue_.clear();
                        self->close();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write_next();
                    });
  }

  void handle(const WireMessage& m) {
    if (any_in_ && m.seq <= in_seq_) {
      spdlog::warn("dropping out-of-order message seq {} after {}", m.seq, in_seq_);
      return;
    }
    any_in_ = true;
    in_seq_ = m.seq;
    switch (m.kind) {
      case WireKind::kSessionConfig:
        configure(m);
        break;
      case WireKind::kPoseInput:
        pose_input(m);
        break;
      case WireKind::kTrainingCommand:
        training_command(m.payload);
        break;
      default:
        spdlog::warn("ignoring client message of kind {}", to_string(m.kind));
    }
  }

  void configure(const WireMessage& m) {
    // Messages without settings are clock-offset probes and only get the echo.
    bool settings = false;
    for (const char* key : {"seed", "policy", "warmup_ms", "length_ms", "delay_mean_ms"}) {
      settings = settings || m.payload.contains(key);
    }
    json reply = {{"accepted", true}};
    if (settings && worker_started_) {
      reply["accepted"] = false;
      reply["reason"] = "settings are fixed once the session runs";
    } else if (settings) {
      try {
        apply_settings(m.payload);
      } catch (const std::exception& e) {
        reply["accepted"] = false;
        reply["reason"] = e.what();
      }
    }
    const auto& p = cfg_.pipeline;
    reply["seed"] = cfg_.seed;
    reply["policy"] = std::string(to_string(cfg_.policy));
    reply["input_rate_hz"] = p.input_rate_hz;
    reply["decision_rate_hz"] = p.decision_rate_hz;
    reply["warmup_ms"] = p.warmup_ms;
    reply["length_ms"] = p.length_ms;
    reply["checkpoint_loaded"] = server_->checkpoint.has_value();
    send(WireKind::kSessionConfig, std::move(reply), m.t_client);
    if (!worker_started_ && m.payload.value("start", true)) start_worker();
  }

  void apply_settings(const json& s) {
    ExperimentConfig next = cfg_;
    if (s.contains("seed")) next.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("policy")) next.policy = parse_policy_kind(s.at("policy").get<std::string>());
    if (s.contains("warmup_ms")) next.pipeline.warmup_ms = s.at("warmup_ms").get<double>();
    if (s.contains("length_ms")) next.pipeline.length_ms = s.at("length_ms").get<double>();
    if (s.contains("delay_mean_ms")) {
      TaskSpec t;
      t.delay_mean_ms = s.at("delay_mean_ms").get<double>();
      t.delay_std_ms = s.value("delay_std_ms", 0.0);
      next.pipeline = task_pipeline(next, t);
    }
    next.pipeline.validate();
    if (next.policy == PolicyKind::kAgent && !server_->checkpoint) {
      throw ConfigError("the agent policy needs a checkpoint");
    }
    cfg_ = std::move(next);
  }

  void pose_input(const WireMessage& m) {
    Pose pose;
    try {
      pose = pose_from_json(m.payload.at("pose"));
    } catch (const std::exception& e) {
      spdlog::warn("dropping pose_input: {}", e.what());
      return;
    }
    if (!worker_started_) start_worker();  // a client may skip session_config
    if (!t0_) t0_ = *m.t_client;
    const double t = to_ms(from_ms(*m.t_client - *t0_));
    if (t <= last_input_ms_) return;
    last_input_ms_ = t;
    input_->push(t, pose);
    std::lock_guard lock(server_->mutex);
    server_->recorded.samples.push_back({t, pose, latest_plant_});
  }

  void training_command(const json& payload) {
    const std::string action = payload.value("action", "");
    std::unique_lock lock(mutex_);
    if (action == "start") {
      if (!server_->checkpoint) {
        lock.unlock();
        status("error", {{"reason", "no checkpoint loaded"}});
        return;
      }
      if (training_ != Training::kIdle) return;
      training_ = Training::kRequested;
      stop_training_ = false;
      abort_ = true;  // ends the running live episode
    } else if (action == "pause") {
      if (training_ == Training::kRunning) training_ = Training::kPaused;
    } else if (action == "resume") {
      if (training_ == Training::kPaused) training_ = Training::kRunning;
    } else if (action == "stop") {
      if (training_ == Training::kIdle) return;
      stop_training_ = true;
      abort_ = true;
    } else {
      lock.unlock();
      status("error", {{"reason", "unknown action '" + action + "'"}});
      return;
    }
    cv_.notify_all();
  }

  void status(const std::string& state, json extra = json::object()) {
    extra["state"] = state;
    send(WireKind::kTrainingStatus, std::move(extra));
  }

  void start_worker() {
    worker_started_ = true;
    std::lock_guard lock(server_->mutex);
    server_->recorded = Session{cfg_.pipeline.input_rate_hz, {}};
    server_->workers.emplace_back([self = shared_from_this()] { self->work(); });
  }

  // Worker thread from here on.

  void work() {
    try {
      std::uint64_t index = 0;
      for (;;) {
        {
          std::unique_lock lock(mutex_);
          if (closing_) return;
          if (training_ == Training::kRequested) {
            training_ = Training::kRunning;
            lock.unlock();
            train();
            continue;
          }
        }
        auto policy = make_policy(cfg_.policy, cfg_.pipeline,
                                  server_->checkpoint ? &*server_->checkpoint : nullptr,
                                  derive_seed(cfg_.seed, kPolicyStream));
        live_episode(*policy, episode_seed(cfg_, index++), false);
      }
    } catch (const std::exception& e) {
      spdlog::error("session worker stopped: {}", e.what());
    }
  }

  // One episode over the live stream. Returns nullopt when it was cut short.
  std::optional<EpisodeRecord> live_episode(HorizonPolicy& policy, std::uint64_t seed,
                                            bool training) {
    abort_ = false;
    {
      std::lock_guard lock(mutex_);
      if (closing_ || (training ? stop_training_ : training_ == Training::kRequested)) {
        return std::nullopt;
      }
    }
    EpisodeInput source(*input_, offset_, abort_);
    EpisodeObserver observer;
    std::uint64_t frames = 0;
    observer.on_display = [&](const DisplayEvent& e) {
      if (e.plant) latest_plant_shared(Pose::from_vector(*e.plant));
      json frame = {{"frame_id", e.frame_id},   {"t_ms", e.t_ms},
                    {"recording", e.recording}, {"reference", pose_json(e.reference)},
                    {"twin", pose_json(e.twin)}};
      frame["plant"] = e.plant ? pose_json(*e.plant) : json(nullptr);
      send(WireKind::kFrameState, std::move(frame));
      if (++frames % kFramesPerLatencyUpdate == 0) {
        send(WireKind::kLatencyUpdate, {{"visual_ms", e.visual_delay_ms},
                                        {"control_ms", e.control_delay_ms},
                                        {"visual_horizon_ms", e.action.visual_ms},
                                        {"control_horizon_ms", e.action.control_ms}});
      }
    };
    const SimTime end = from_ms(cfg_.pipeline.warmup_ms + cfg_.pipeline.length_ms);
    try {
      EpisodeRecord rec = run_episode(cfg_.pipeline, source, policy, seed, observer);
      offset_ += end;
      const EpisodeErrors e = episode_errors(rec, cfg_.weights);
      send(WireKind::kMetricsUpdate,
           {{"episode", ++episodes_run_},
            {"policy", training ? "agent" : std::string(to_string(cfg_.policy))},
            {"training", training},
            {"e_v", e.e_v},
            {"e_r", e.e_r},
            {"combined", e.combined},
            {"visual_position", e.visual.position},
            {"visual_orientation", e.visual.orientation},
            {"real_position", e.real.position},
            {"real_orientation", e.real.orientation}});
      return rec;
    } catch (const Stage2Timeout& e) {
      // Resume after the newest pose so the next episode starts on fresh input.
      const SimTime period = from_ms(1000.0 / cfg_.pipeline.input_rate_hz);
      SimTime next = offset_ + source.last() + period;
      if (const auto newest = input_->newest_time()) next = std::max(next, from_ms(*newest));
      offset_ = next;
      if (!abort_) spdlog::warn("episode cut short: {}", e.what());
      return std::nullopt;
    }
  }

  void latest_plant_shared(const Pose& p) {
    std::lock_guard lock(server_->mutex);
    latest_plant_ = p;
  }

  void train() {
    const PolicyParams init = *server_->checkpoint;
    TrainingSnapshot latest{init, 0, {}, {}};
    double smoothed = 0.0;
    TrainingOptions o;
    o.max_episodes = INT_MAX;
    o.seed = derive_seed(cfg_.seed, kLiveTrainStream);
    o.bins = cfg_.pipeline.bins;
    o.weights = cfg_.weights;
    o.convergence_window = cfg_.convergence_window;
    o.convergence_epsilon = cfg_.convergence_epsilon;
    o.checkpoint_every = 1;
    o.on_checkpoint = [&](const TrainingSnapshot& s) { latest = s; };
    o.on_episode = [&](const TrainingLogRow& row) {
      smoothed = row.episode == 1 ? row.reward : 0.9 * smoothed + 0.1 * row.reward;
      status("running", {{"episodes", row.episode},
                         {"reward", row.reward},
                         {"smoothed_reward", smoothed},
                         {"delays", {{"control_ms", row.control_delay_ms},
                                     {"visual_ms", row.visual_delay_ms}}}});
    };
    status("running", {{"episodes", 0}});
    const EpisodeRunner runner = [&](const std::string&, HorizonPolicy& policy,
                                     std::uint64_t seed) {
      for (;;) {
        wait_while_paused();
        if (auto rec = live_episode(policy, seed, true)) return std::move(*rec);
        std::lock_guard lock(mutex_);
        if (stop_training_ || closing_) throw Stopped{};
      }
    };
    try {
      run_stage2(init, "live", runner, cfg_.trainer, o);
    } catch (const Stopped&) {
    } catch (const Error& e) {
      status("error", {{"reason", e.what()}});
    }
    finish_training(latest);
  }

  void wait_while_paused() {
    std::unique_lock lock(mutex_);
    bool announced = false;
    while (training_ == Training::kPaused && !stop_training_ && !closing_) {
      if (!announced) {
        lock.unlock();
        status("paused");
        lock.lock();
        announced = true;
      }
      cv_.wait(lock);
    }
    if (stop_training_ || closing_) throw Stopped{};
  }

  void finish_training(const TrainingSnapshot& s) {
    const std::string id = fmt::format("stage2_{}", s.episodes);
    json reply = {{"episodes", s.episodes}};
    if (s.episodes > 0) {
      const Checkpoint c{"stage2",         s, cfg_.trainer, cfg_.pipeline.bins, config_hash(cfg_),
                         std::string(code_version())};
      const auto path = cfg_.out_dir / "console" / (id + ".json");
      try {
        save_checkpoint(path, c);
        reply["checkpoint"] = id;
        spdlog::info("saved live training checkpoint {}", path.string());
      } catch (const Error& e) {
        reply["reason"] = e.what();
      }
    }
    {
      std::lock_guard lock(mutex_);
      training_ = Training::kIdle;
      stop_training_ = false;
    }
    status("stopped", std::move(reply));
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Server::Impl> server_;
  ExperimentConfig cfg_;
  beast::flat_buffer buffer_;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();

  // io thread only
  std::deque<std::string> queue_;
  std::uint64_t out_seq_ = 0;
  std::uint64_t in_seq_ = 0;
  bool any_in_ = false;
  bool worker_started_ = false;
  std::optional<double> t0_;
  double last_input_ms_ = -1.0;
  std::optional<Pose> latest_plant_;  // guarded by server_->mutex

  std::shared_ptr<LiveInput> input_ = std::make_shared<LiveInput>();

  // worker thread only
  SimTime offset_{0};
  int episodes_run_ = 0;

  std::mutex mutex_;
  std::condition_variable cv_;
  Training training_ = Training::kIdle;
  bool stop_training_ = false;
  bool closing_ = false;
  std::atomic<bool> abort_{false};
};

namespace {

void HttpConnection::handle() {
  const std::string target(req_.target());
  if (websocket::is_upgrade(req_)) {
    if (target != "/session") {
      respond(http::status::not_found, "not found\n", "text/plain");
      return;
    }
    std::unique_lock lock(server_->mutex);
    if (server_->active.lock()) {
      lock.unlock();
      respond(http::status::conflict, "a session is already active\n", "text/plain");
      return;
    }
    auto session = std::make_shared<LiveSession>(stream_.release_socket(), server_);
    server_->active = session;
    lock.unlock();
    session->run(std::move(req_));
    return;
  }
  if (req_.method() != http::verb::get) {
    respond(http::status::method_not_allowed, "method not allowed\n", "text/plain");
    return;
  }
  if (target == "/session/export.csv") {
    std::string body;
    {
      std::lock_guard lock(server_->mutex);
      body = session_to_csv(server_->recorded);
    }
    respond(http::status::ok, std::move(body), "text/csv");
    return;
  }
  const auto& root = server_->cfg.static_dir;
  const auto path = root.empty() ? std::filesystem::path{} : static_path(root, target);
  std::ifstream in(path, std::ios::binary);
  if (path.empty() || !std::filesystem::is_regular_file(path) || !in) {
    respond(http::status::not_found, "not found\n", "text/plain");
    return;
  }
  std::ostringstream body;
  body << in.rdbuf();
  respond(http::status::ok, body.str(), mime_type(path));
}

void HttpConnection::respond(http::status status, std::string body, std::string_view type) {
  res_ = std::make_shared<http::response<http::string_body>>(status, req_.version());
  res_->set(http::field::server, "teleop");
  res_->set(http::field::content_type, std::string(type));
  res_->keep_alive(false);
  res_->body() = std::move(body);
  res_->prepare_payload();
  http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code, std::size_t) {
    beast::error_code ec;
    self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  });
}

}  // namespace

void Server::Impl::accept() {
  acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // closed
    std::make_shared<HttpConnection>(std::move(socket), self)->run();
    self->accept();
  });
}

void Server::Impl::shutdown() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mutex);
    if (stopped) return;
    stopped = true;
  }
  net::post(ioc, [self = shared_from_this()] {
    beast::error_code ec;
    self->acceptor.close(ec);
  });
  if (auto s = active.lock()) s->close();
  {
    std::lock_guard lock(mutex);
    threads.swap(workers);
  }
  for (auto& t : threads) t.join();
  ioc.stop();
  if (io_thread.joinable()) io_thread.join();
  {
    std::lock_guard lock(mutex);
    done = true;
  }
  stopped_cv.notify_all();
}

Server::Server(ExperimentConfig cfg) : impl_(std::make_shared<Impl>()) {
  if (cfg.clock != ClockMode::kRealtime) {
    throw ConfigError("serve needs clock: realtime");
  }
  cfg.validate();
  if (!cfg.checkpoint.empty()) impl_->checkpoint = load_agent(cfg);
  impl_->cfg = std::move(cfg);
}

Server::~Server() { stop(); }

void Server::start() {
  auto& a = impl_->acceptor;
  const tcp::endpoint endpoint(tcp::v4(), static_cast<unsigned short>(impl_->cfg.port));
  beast::error_code ec;
  a.open(endpoint.protocol(), ec);
  if (!ec) a.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) a.bind(endpoint, ec);
  if (!ec) a.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    beast::error_code ignored;
    a.close(ignored);
    throw Error(fmt::format("cannot listen on port {}: {}", impl_->cfg.port, ec.message()));
  }
  impl_->port = a.local_endpoint().port();
  impl_->accept();
  impl_->io_thread = std::thread([impl = impl_] {
    auto guard = net::make_work_guard(impl->ioc);
    impl->ioc.run();
  });
  spdlog::info("serving on port {}", port());
}

int Server::port() const { return impl_->port; }

void Server::stop() {
  if (impl_) impl_->shutdown();
}

void Server::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [&] { return impl_->done; });
}

}  // namespace teleop
