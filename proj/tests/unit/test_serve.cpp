#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "teleop/agent/checkpoint.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/harness/commands.hpp"
#include "teleop/harness/pipeline.hpp"
#include "teleop/harness/serve.hpp"
#include "teleop/harness/wire.hpp"
#include "teleop/operator/session.hpp"
#include "teleop/operator/source.hpp"

using namespace teleop;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

ExperimentConfig live_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.seed = 11;
  cfg.clock = ClockMode::kRealtime;
  cfg.port = 0;
  cfg.pipeline.warmup_ms = 2000.0;
  cfg.pipeline.length_ms = 3000.0;
  cfg.network.trunk = 16;
  cfg.network.head = 16;
  cfg.out_dir = std::filesystem::temp_directory_path() / ("teleop_serve_" + name);
  std::filesystem::remove_all(cfg.out_dir);
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

class Client {
 public:
  explicit Client(int port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/session");
  }

  void send(WireKind kind, json payload, std::optional<double> t_client = std::nullopt) {
    WireMessage m;
    m.kind = kind;
    m.seq = ++seq_;
    m.t_client = t_client ? t_client : std::optional<double>(static_cast<double>(seq_));
    m.payload = std::move(payload);
    ws_.write(net::buffer(encode(m)));
  }

  WireMessage receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return decode(beast::buffers_to_string(buffer.data()));
  }

  // Reads until a message of `kind` satisfies `pred`; checks server seq order.
  WireMessage until(WireKind kind, const std::function<bool(const WireMessage&)>& pred = {}) {
    for (;;) {
      WireMessage m = receive();
      CHECK(m.seq > last_seq_);
      CHECK(m.t_server.has_value());
      last_seq_ = m.seq;
      if (on_message) on_message(m);
      if (m.kind == kind && (!pred || pred(m))) return m;
    }
  }

  // Scripted operator poses at exact grid times [first, first + count).
  void stream(ScriptedOperator& op, double rate_hz, std::int64_t first, std::int64_t count) {
    for (std::int64_t k = first; k < first + count; ++k) {
      const SimTime t = grid_time(k, rate_hz);
      send(WireKind::kPoseInput, {{"pose", pose_json(op.sample(t)->as_vector())}}, to_ms(t));
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

  std::function<void(const WireMessage&)> on_message;

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
  std::uint64_t seq_ = 0;
  std::uint64_t last_seq_ = 0;
};

http::response<http::string_body> request(int port, http::request<http::string_body> req) {
  net::io_context ioc;
  tcp::socket socket(ioc);
  tcp::resolver resolver(ioc);
  net::connect(socket, resolver.resolve("127.0.0.1", std::to_string(port)));
  req.set(http::field::host, "127.0.0.1");
  http::write(socket, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(socket, buffer, res);
  return res;
}

http::response<http::string_body> get(int port, const std::string& target) {
  return request(port, http::request<http::string_body>(http::verb::get, target, 11));
}

std::int64_t samples_per_episode(const PipelineConfig& p) {
  return static_cast<std::int64_t>(
      std::ceil((p.warmup_ms + p.length_ms) * p.input_rate_hz / 1000.0));
}

}  // namespace

TEST_CASE("serve needs the realtime clock") {
  ExperimentConfig cfg = live_config("clock");
  cfg.clock = ClockMode::kVirtual;
  CHECK_THROWS_AS(Server{cfg}, ConfigError);
}

TEST_CASE("live session over loopback reproduces the in-process episode") {
  ExperimentConfig cfg = live_config("loopback");
  const ShapeSpec shape = calibration_shape(ShapeKind::kCircle);
  const auto n = samples_per_episode(cfg.pipeline);

  // One operator stream feeds both the in-process run and the client.
  ScriptedOperator op(shape, 21);
  Session stream{cfg.pipeline.input_rate_hz, {}};
  for (std::int64_t k = 0; k <= n; ++k) {
    const SimTime t = grid_time(k, cfg.pipeline.input_rate_hz);
    stream.samples.push_back({to_ms(t), *op.sample(t), std::nullopt});
  }
  SessionSource reference_op(stream);
  auto reference_policy =
      make_policy(PolicyKind::kWP, cfg.pipeline, nullptr, derive_seed(cfg.seed, 7));
  const EpisodeRecord rec =
      run_episode(cfg.pipeline, reference_op, *reference_policy, episode_seed(cfg, 0));
  const EpisodeErrors expected = episode_errors(rec, cfg.weights);

  Server server(cfg);
  server.start();
  Client client(server.port());
  client.send(WireKind::kSessionConfig, {{"seed", cfg.seed}, {"policy", "wp"}}, 1234.5);
  const WireMessage hello = client.until(WireKind::kSessionConfig);
  CHECK(hello.payload["accepted"] == true);
  CHECK(*hello.t_client == 1234.5);

  for (const auto& sample : stream.samples) {
    client.send(WireKind::kPoseInput, {{"pose", pose_json(sample.target.as_vector())}},
                sample.t_ms);
  }
  int frames = 0;
  client.on_message = [&](const WireMessage& m) {
    if (m.kind == WireKind::kFrameState) {
      ++frames;
      pose_from_json(m.payload.at("twin"));
    }
  };
  const WireMessage metrics = client.until(WireKind::kMetricsUpdate);
  CHECK(frames > 0);
  const json& p = metrics.payload;
  CHECK(std::abs(p["e_v"].get<double>() - expected.e_v) < 1e-6);
  CHECK(std::abs(p["e_r"].get<double>() - expected.e_r) < 1e-6);
  CHECK(std::abs(p["combined"].get<double>() - expected.combined) < 1e-6);
  CHECK(std::abs(p["visual_position"].get<double>() - expected.visual.position) < 1e-6);
  CHECK(std::abs(p["real_orientation"].get<double>() - expected.real.orientation) < 1e-6);

  SUBCASE("a second session is refused") {
    http::request<http::string_body> req(http::verb::get, "/session", 11);
    req.set(http::field::upgrade, "websocket");
    req.set(http::field::connection, "upgrade");
    req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
    req.set(http::field::sec_websocket_version, "13");
    CHECK(request(server.port(), req).result() == http::status::conflict);
  }

  SUBCASE("the operator stream is exported") {
    const auto res = get(server.port(), "/session/export.csv");
    CHECK(res.result() == http::status::ok);
    const Session s = session_from_csv(res.body());
    CHECK(s.samples.size() == static_cast<std::size_t>(n + 1));
    CHECK(s.samples[1].t_ms == doctest::Approx(to_ms(grid_time(1, cfg.pipeline.input_rate_hz))));
  }
  client.close();
  server.stop();
}

TEST_CASE("displayed visual delay follows the injected delay") {
  ExperimentConfig cfg = live_config("delay");
  Server server(cfg);
  server.start();
  Client client(server.port());
  client.send(WireKind::kSessionConfig,
              {{"policy", "wp"}, {"delay_mean_ms", 100.0}, {"delay_std_ms", 10.0}});
  client.until(WireKind::kSessionConfig);
  ScriptedOperator op(calibration_shape(ShapeKind::kSquare), 3);
  client.stream(op, cfg.pipeline.input_rate_hz, 0, samples_per_episode(cfg.pipeline) + 1);
  double visual = 0.0;
  client.on_message = [&](const WireMessage& m) {
    if (m.kind == WireKind::kLatencyUpdate) visual = m.payload["visual_ms"].get<double>();
  };
  client.until(WireKind::kMetricsUpdate);
  TaskSpec t;
  t.delay_mean_ms = 100.0;
  t.delay_std_ms = 10.0;
  const double budget = visual_budget_ms(task_pipeline(cfg, t));
  CHECK(std::abs(visual - budget) <= 20.0);
  client.close();
}

TEST_CASE("live training needs a checkpoint") {
  ExperimentConfig cfg = live_config("nockpt");
  Server server(cfg);
  server.start();
  Client client(server.port());
  client.send(WireKind::kSessionConfig, {{"policy", "wp"}});
  client.until(WireKind::kSessionConfig);
  client.send(WireKind::kTrainingCommand, {{"action", "start"}});
  const WireMessage m = client.until(WireKind::kTrainingStatus);
  CHECK(m.payload["state"] == "error");
  CHECK(m.payload["reason"] == "no checkpoint loaded");
  client.close();
}

TEST_CASE("live training counts episodes and persists on stop") {
  ExperimentConfig cfg = live_config("train");
  Checkpoint init;
  init.stage = "init";
  init.state.params = PolicyParams::random(cfg.network, 1);
  init.trainer = cfg.trainer;
  init.code_version = std::string(code_version());
  cfg.checkpoint = cfg.out_dir / "init.json";
  save_checkpoint(cfg.checkpoint, init);

  Server server(cfg);
  server.start();
  Client client(server.port());
  client.send(WireKind::kSessionConfig, {{"policy", "wp"}});
  client.until(WireKind::kSessionConfig);
  client.send(WireKind::kTrainingCommand, {{"action", "start"}});
  client.until(WireKind::kTrainingStatus, [](const WireMessage& m) {
    return m.payload["state"] == "running";
  });
  ScriptedOperator op(calibration_shape(ShapeKind::kFigureEight), 8);
  client.stream(op, cfg.pipeline.input_rate_hz, 0, 3 * samples_per_episode(cfg.pipeline) + 10);
  int last = 0;
  for (int i = 1; i <= 2; ++i) {
    const WireMessage m = client.until(WireKind::kTrainingStatus, [](const WireMessage& m) {
      return m.payload.contains("reward");
    });
    CHECK(m.payload["episodes"].get<int>() == last + 1);
    last = m.payload["episodes"].get<int>();
  }
  client.send(WireKind::kTrainingCommand, {{"action", "stop"}});
  const WireMessage stopped = client.until(WireKind::kTrainingStatus, [](const WireMessage& m) {
    return m.payload["state"] == "stopped";
  });
  const std::string id = stopped.payload.at("checkpoint").get<std::string>();
  const Checkpoint saved = load_checkpoint(cfg.out_dir / "console" / (id + ".json"));
  CHECK(saved.stage == "stage2");
  CHECK(saved.state.episodes >= 2);
  CHECK(saved.state.params.flat != init.state.params.flat);
  client.close();
}

TEST_CASE("static files are served below the root only") {
  ExperimentConfig cfg = live_config("static");
  cfg.static_dir = cfg.out_dir / "www";
  std::filesystem::create_directories(cfg.static_dir / "js");
  std::ofstream(cfg.static_dir / "index.html") << "<html>console</html>";
  std::ofstream(cfg.static_dir / "js" / "app.js") << "let x = 1;";
  std::ofstream(cfg.out_dir / "secret.txt") << "secret";
  Server server(cfg);
  server.start();
  const auto index = get(server.port(), "/");
  CHECK(index.result() == http::status::ok);
  CHECK(index.body() == "<html>console</html>");
  CHECK(index[http::field::content_type] == "text/html");
  const auto js = get(server.port(), "/js/app.js?v=2");
  CHECK(js.body() == "let x = 1;");
  CHECK(js[http::field::content_type] == "application/javascript");
  CHECK(get(server.port(), "/../secret.txt").result() == http::status::not_found);
  CHECK(get(server.port(), "/js/../../secret.txt").result() == http::status::not_found);
  CHECK(get(server.port(), "/missing.html").result() == http::status::not_found);
}

TEST_CASE("a busy port is reported") {
  ExperimentConfig cfg = live_config("port");
  Server first(cfg);
  first.start();
  cfg.port = first.port();
  Server second(cfg);
  CHECK_THROWS_AS(second.start(), Error);
}
