#include "teleop/operator/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "teleop/core/errors.hpp"
#include "teleop/core/time.hpp"
#include "teleop/operator/source.hpp"

namespace teleop {

namespace {

constexpr std::array<const char*, 8> kTargetColumns = {"t_ms", "tx", "ty", "tz",
                                                       "tqx", "tqy", "tqz", "tqw"};
constexpr std::array<const char*, 7> kActualColumns = {"ax", "ay", "az", "aqx",
                                                       "aqy", "aqz", "aqw"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, std::size_t line) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("malformed number '" + cell + "'", line);
  }
  while (*end == ' ' || *end == '\r') ++end;
  if (*end != '\0') throw ParseError("malformed number '" + cell + "'", line);
  return v;
}

Pose parse_pose(const std::vector<std::string>& cells, std::size_t offset, std::size_t line) {
  Vec7 v;
  for (int i = 0; i < 7; ++i) v[i] = parse_double(cells[offset + i], line);
  try {
    return Pose::from_vector(v);
  } catch (const DegenerateQuaternion& e) {
    throw ParseError(e.what(), line);
  }
}

void append_pose(std::string& out, const Pose& p) {
  const Vec7 v = p.as_vector();
  for (int i = 0; i < 7; ++i) out += fmt::format(",{}", v[i]);
}

}  // namespace

void Session::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t_ms > samples[i - 1].t_ms)) {
      throw ParseError("timestamps must be strictly increasing", i + 1);
    }
  }
}

Session sample_stream(const ShapeSpec& shape, double rate_hz, double duration_ms) {
  if (!(rate_hz > 0.0)) throw ConfigError("sampling rate must be positive");
  Session session;
  session.rate_hz = rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(duration_ms * rate_hz / 1000.0 + 1e-9));
  session.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * 1000.0 / rate_hz;
    session.samples.push_back({t, generate(shape, t), std::nullopt});
  }
  return session;
}

std::string session_to_csv(const Session& session) {
  const bool with_actual =
      std::any_of(session.samples.begin(), session.samples.end(),
                  [](const SessionSample& s) { return s.actual.has_value(); });
  std::string out;
  for (std::size_t i = 0; i < kTargetColumns.size(); ++i) {
    if (i) out += ',';
    out += kTargetColumns[i];
  }
  if (with_actual) {
    for (const char* c : kActualColumns) out += fmt::format(",{}", c);
  }
  out += '\n';
  for (const auto& s : session.samples) {
    out += fmt::format("{}", s.t_ms);
    append_pose(out, s.target);
    if (with_actual) {
      if (s.actual) {
        append_pose(out, *s.actual);
      } else {
        out += ",,,,,,,";
      }
    }
    out += '\n';
  }
  return out;
}

Session session_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const bool with_actual = header.size() == kTargetColumns.size() + kActualColumns.size();
  if (header.size() != kTargetColumns.size() && !with_actual) {
    throw ParseError("unexpected column count in header", line_no);
  }
  for (std::size_t i = 0; i < kTargetColumns.size(); ++i) {
    if (header[i] != kTargetColumns[i]) throw ParseError("unexpected column '" + header[i] + "'", line_no);
  }
  if (with_actual) {
    for (std::size_t i = 0; i < kActualColumns.size(); ++i) {
      if (header[kTargetColumns.size() + i] != kActualColumns[i]) {
        throw ParseError("unexpected column '" + header[kTargetColumns.size() + i] + "'", line_no);
      }
    }
  }

  Session session;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError("wrong number of fields", line_no);
    SessionSample s;
    s.t_ms = parse_double(cells[0], line_no);
    s.target = parse_pose(cells, 1, line_no);
    if (with_actual && !cells[8].empty()) s.actual = parse_pose(cells, 8, line_no);
    if (!session.samples.empty() && !(s.t_ms > session.samples.back().t_ms)) {
      throw ParseError("timestamps must be strictly increasing", line_no);
    }
    session.samples.push_back(std::move(s));
  }
  if (session.samples.size() >= 2) {
    const double span = session.samples.back().t_ms - session.samples.front().t_ms;
    session.rate_hz = 1000.0 * static_cast<double>(session.samples.size() - 1) / span;
  }
  return session;
}

void record(const Session& session, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write session file " + path.string());
  out << session_to_csv(session);
}

Session load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read session file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return session_from_csv(buffer.str());
}

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& root,
                                                const std::vector<ShapeKind>& shapes,
                                                int repetitions, double duration_ms,
                                                unsigned long long seed) {
  std::vector<std::filesystem::path> written;
  constexpr double kRate = 120.0;
  for (std::size_t si = 0; si < shapes.size(); ++si) {
    for (int rep = 0; rep < repetitions; ++rep) {
      ScriptedOperator op(calibration_shape(shapes[si]),
                          seed * 1000003ULL + si * 10007ULL + static_cast<unsigned long long>(rep));
      Session session;
      session.rate_hz = kRate;
      const auto n = static_cast<std::int64_t>(std::floor(duration_ms * kRate / 1000.0 + 1e-9));
      for (std::int64_t k = 0; k < n; ++k) {
        const SimTime t = grid_time(k, kRate);
        session.samples.push_back({to_ms(t), *op.sample(t), std::nullopt});
      }
      const auto path = root / std::string(to_string(shapes[si])) / fmt::format("run_{:03d}.csv", rep);
      record(session, path);
      written.push_back(path);
    }
  }
  return written;
}

std::vector<CorpusEntry> list_corpus(const std::filesystem::path& root) {
  std::vector<CorpusEntry> out;
  if (!std::filesystem::is_directory(root)) throw ConfigError("corpus directory not found: " + root.string());
  for (const auto& dir : std::filesystem::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const ShapeKind kind = parse_shape_kind(dir.path().filename().string());
    for (const auto& file : std::filesystem::directory_iterator(dir.path())) {
      if (file.path().extension() != ".csv") continue;
      out.push_back({kind, file.path().stem().string(), file.path()});
    }
  }
  std::sort(out.begin(), out.end(), [](const CorpusEntry& a, const CorpusEntry& b) {
    if (a.shape != b.shape) return static_cast<int>(a.shape) < static_cast<int>(b.shape);
    return a.run_id < b.run_id;
  });
  return out;
}

}  // namespace teleop
