#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "podar/calibration.hpp"
#include "podar/errors.hpp"
#include "podar/experiment.hpp"
#include "podar/risk.hpp"

namespace podar {

// Shortest representation that parses back to the same double; used for
// data-interchange files so round-trips are exact.
inline std::string format_exact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Six significant digits for human-facing tables and curves.
inline std::string format_sig6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Orders driver ids so P2 sorts before P10.
inline bool driver_less(const std::string& a, const std::string& b) {
  const auto split = [](const std::string& s) {
    std::size_t i = 0;
    while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
    }
    long number = -1;
    if (i < s.size()) {
      number = std::strtol(s.c_str() + i, nullptr, 10);
    }
    return std::pair<std::string, long>(s.substr(0, i), number);
  };
  const auto [pa, na] = split(a);
  const auto [pb, nb] = split(b);
  if (pa != pb) {
    return pa < pb;
  }
  if (na != nb) {
    return na < nb;
  }
  return a < b;
}

template <typename Map>
inline std::vector<std::string> ordered_drivers(const Map& by_driver) {
  std::vector<std::string> drivers;
  for (const auto& [driver, _] : by_driver) {
    drivers.push_back(driver);
  }
  std::sort(drivers.begin(), drivers.end(), driver_less);
  return drivers;
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

inline double parse_double(const std::string& token, int line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || token.empty()) {
    throw ParseError("not a number: '" + token + "'", line);
  }
  return value;
}

inline long parse_int(const std::string& token, int line) {
  long value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || token.empty()) {
    throw ParseError("not an integer: '" + token + "'", line);
  }
  return value;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.push_back("");
  }
  return out;
}

inline bool valid_driver_id(const std::string& id) {
  if (id.size() < 2 || id[0] != 'P') {
    return false;
  }
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Reads a `driver,obstacle,signal` CSV. Every driver must cover every
// obstacle id in [1, obstacle_count] exactly once; values are raw
// (unstandardized) and non-negative.
inline std::map<std::string, std::vector<double>> load_signals(
    const std::filesystem::path& path, std::size_t obstacle_count = 77) {
  std::ifstream file(path);
  if (!file.good()) {
    throw ParseError("cannot open signal file '" + path.string() + "'", 0);
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw ParseError("empty signal file '" + path.string() + "'", 0);
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (detail::trim(line) != "driver,obstacle,signal") {
    throw ParseError("expected header 'driver,obstacle,signal'", 1);
  }

  std::map<std::string, std::vector<bool>> seen;
  std::map<std::string, std::vector<double>> out;
  int line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (detail::trim(line).empty()) {
      continue;
    }
    const std::vector<std::string> fields = detail::split_csv_row(line);
    if (fields.size() != 3) {
      throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), line_no);
    }
    const std::string& driver = fields[0];
    if (!detail::valid_driver_id(driver)) {
      throw ParseError("invalid driver id '" + driver + "'", line_no);
    }
    const long obstacle = detail::parse_int(fields[1], line_no);
    if (obstacle < 1 || static_cast<std::size_t>(obstacle) > obstacle_count) {
      throw ParseError("obstacle id " + std::to_string(obstacle) + " outside 1.." +
                           std::to_string(obstacle_count),
                       line_no);
    }
    const double value = detail::parse_double(fields[2], line_no);
    if (!std::isfinite(value) || value < 0.0) {
      throw ParseError("signal must be a non-negative number", line_no);
    }
    auto [it, inserted] = seen.emplace(driver, std::vector<bool>(obstacle_count, false));
    auto [vt, _] = out.emplace(driver, std::vector<double>(obstacle_count, 0.0));
    if (it->second[obstacle - 1]) {
      throw ParseError("duplicate record for (" + driver + ", " + std::to_string(obstacle) + ")",
                       line_no);
    }
    it->second[obstacle - 1] = true;
    vt->second[obstacle - 1] = value;
    (void)inserted;
  }
  if (out.empty()) {
    throw ParseError("signal file has no data rows", line_no);
  }
  for (const auto& [driver, flags] : seen) {
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (!flags[i]) {
        throw ParseError("driver " + driver + " is missing obstacle " + std::to_string(i + 1), 0);
      }
    }
  }
  return out;
}

inline void write_signals(const std::filesystem::path& path,
                          const std::map<std::string, std::vector<double>>& signals) {
  std::ofstream file(path);
  if (!file.good()) {
    throw Error("cannot write signal file '" + path.string() + "'");
  }
  file << "driver,obstacle,signal\n";
  for (const std::string& driver : ordered_drivers(signals)) {
    const std::vector<double>& values = signals.at(driver);
    for (std::size_t i = 0; i < values.size(); ++i) {
      file << driver << ',' << (i + 1) << ',' << format_exact(values[i]) << '\n';
    }
  }
}

// Key-value grid description; lists are whitespace-separated.
//
//   host_speed = 25
//   longitudinal_m = 175 150 125 100 75 50 25
//   lateral_m = -2.5 -2 -1.5 -1 -0.5 0 0.5 1 1.5 2 2.5
inline GridConfig parse_grid_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file.good()) {
    throw ParseError("cannot open grid config '" + path.string() + "'", 0);
  }
  GridConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const std::string text = detail::trim(line);
    if (text.empty() || text[0] == '#') {
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", line_no);
    }
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    const auto parse_list = [&](const std::string& v) {
      std::vector<double> items;
      std::stringstream ss(v);
      std::string token;
      while (ss >> token) {
        items.push_back(detail::parse_double(token, line_no));
      }
      if (items.empty()) {
        throw ParseError("empty list for '" + key + "'", line_no);
      }
      return items;
    };
    if (key == "host_speed") {
      config.host_speed = detail::parse_double(value, line_no);
    } else if (key == "host_length") {
      config.host_length = detail::parse_double(value, line_no);
    } else if (key == "host_width") {
      config.host_width = detail::parse_double(value, line_no);
    } else if (key == "host_mass") {
      config.host_mass = detail::parse_double(value, line_no);
    } else if (key == "host_sensitivity") {
      config.host_sensitivity = detail::parse_double(value, line_no);
    } else if (key == "obstacle_mass") {
      config.obstacle_mass = detail::parse_double(value, line_no);
    } else if (key == "obstacle_sensitivity") {
      config.obstacle_sensitivity = detail::parse_double(value, line_no);
    } else if (key == "longitudinal_m") {
      config.longitudinal = parse_list(value);
    } else if (key == "lateral_m") {
      config.lateral = parse_list(value);
    } else {
      throw ParseError("unknown key '" + key + "'", line_no);
    }
  }
  config.validate();
  return config;
}

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file.good()) {
    throw ParseError("cannot open '" + path.string() + "'", 0);
  }
  try {
    return nlohmann::json::parse(file);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path);
  if (!file.good()) {
    throw Error("cannot write '" + path.string() + "'");
  }
  file << text;
}

inline ObjectType object_type_from(const std::string& name) {
  if (name == "vehicle") return ObjectType::kVehicle;
  if (name == "pedestrian") return ObjectType::kPedestrian;
  if (name == "bicycle") return ObjectType::kBicycle;
  if (name == "obstacle") return ObjectType::kObstacle;
  throw ParseError("unknown object type '" + name + "'", 0);
}

inline const char* object_type_name(ObjectType type) {
  switch (type) {
    case ObjectType::kVehicle: return "vehicle";
    case ObjectType::kPedestrian: return "pedestrian";
    case ObjectType::kBicycle: return "bicycle";
    case ObjectType::kObstacle: return "obstacle";
  }
  return "vehicle";
}

inline RoadObject road_object_from(const nlohmann::json& j) {
  RoadObject object;
  object.id = j.at("id").get<std::string>();
  object.type = object_type_from(j.value("type", "vehicle"));
  const auto p = j.at("position");
  const auto v = j.at("velocity");
  const Vec2 position{p.at(0).get<double>(), p.at(1).get<double>()};
  const Vec2 velocity{v.at(0).get<double>(), v.at(1).get<double>()};
  object.state = KinematicState::from_velocity(position, velocity, j.value("heading", 0.0));
  if (j.contains("shape") && j.at("shape").is_object()) {
    object.geometry = BodyGeometry::rectangle(j.at("shape").at("length").get<double>(),
                                              j.at("shape").at("width").get<double>());
  } else if (!j.contains("shape") || j.at("shape").get<std::string>() == "point") {
    object.geometry = BodyGeometry::point();
  } else {
    throw ParseError("shape must be \"point\" or {\"length\":..,\"width\":..}", 0);
  }
  object.mass = j.value("mass", 1.8);
  object.sensitivity = j.value("sensitivity", 1.0);
  return object;
}

}  // namespace detail

inline Scene load_scene(const std::filesystem::path& path) {
  const nlohmann::json j = detail::load_json(path);
  try {
    Scene scene;
    scene.host = detail::road_object_from(j.at("host"));
    for (const auto& item : j.at("objects")) {
      scene.objects.push_back(detail::road_object_from(item));
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid scene: ") + e.what(), 0);
  }
}

inline PodarParams load_params(const std::filesystem::path& path) {
  const nlohmann::json j = detail::load_json(path);
  try {
    PodarParams params;
    params.horizon = j.at("horizon").get<double>();
    params.damage_scale = j.at("damage_scale").get<double>();
    params.temporal_decay = j.at("temporal_decay").get<double>();
    params.spatial_decay = j.at("spatial_decay").get<double>();
    params.velocity_blend = j.value("velocity_blend", params.velocity_blend);
    params.dt = j.value("dt", params.dt);
    params.validate();
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid params: ") + e.what(), 0);
  }
}

inline SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  const nlohmann::json j = detail::load_json(path);
  try {
    SyntheticSpec spec;
    spec.params.horizon = j.at("horizon").get<double>();
    spec.params.damage_scale = j.at("damage_scale").get<double>();
    spec.params.temporal_decay = j.at("temporal_decay").get<double>();
    spec.params.spatial_decay = j.at("spatial_decay").get<double>();
    spec.params.velocity_blend = j.value("velocity_blend", spec.params.velocity_blend);
    spec.params.dt = j.value("dt", spec.params.dt);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.params.validate();
    if (!(spec.noise_sigma >= 0.0)) {
      throw InvalidInputError("noise sigma must be non-negative");
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid synthetic spec: ") + e.what(), 0);
  }
}

inline nlohmann::json result_to_json(const CalibrationResult& result,
                                     const std::vector<HorizonCandidate>& candidates = {}) {
  nlohmann::json j;
  j["driver"] = result.driver;
  j["kind"] = to_string(result.kind);
  j["horizon"] = result.params.horizon;
  j["damage_scale"] = result.params.damage_scale;
  j["temporal_decay"] = result.params.temporal_decay;
  j["spatial_decay"] = result.params.spatial_decay;
  j["velocity_blend"] = result.params.velocity_blend;
  j["dt"] = result.params.dt;
  j["final_loss"] = result.final_loss;
  if (std::isnan(result.r_squared)) {
    j["r_squared"] = nullptr;
  } else {
    j["r_squared"] = result.r_squared;
  }
  j["iterations_run"] = result.iterations_run;
  j["loss_trace"] = result.loss_trace;
  j["predicted"] = result.predicted;
  j["residuals"] = result.residuals;
  if (!candidates.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const HorizonCandidate& c : candidates) {
      nlohmann::json e;
      e["horizon"] = c.horizon;
      e["failed"] = c.failed;
      if (c.failed) {
        e["error"] = c.error;
      } else {
        e["damage_scale"] = c.result.params.damage_scale;
        e["temporal_decay"] = c.result.params.temporal_decay;
        e["spatial_decay"] = c.result.params.spatial_decay;
        e["final_loss"] = c.result.final_loss;
        e["r_squared"] = std::isnan(c.result.r_squared)
                             ? nlohmann::json(nullptr)
                             : nlohmann::json(c.result.r_squared);
        e["iterations_run"] = c.result.iterations_run;
      }
      arr.push_back(std::move(e));
    }
    j["horizon_candidates"] = std::move(arr);
  }
  return j;
}

inline void write_result(const std::filesystem::path& path, const CalibrationResult& result,
                         const std::vector<HorizonCandidate>& candidates = {}) {
  detail::write_text_file(path, result_to_json(result, candidates).dump(2) + "\n");
}

inline CalibrationResult read_result(const std::filesystem::path& path) {
  const nlohmann::json j = detail::load_json(path);
  try {
    CalibrationResult result;
    result.driver = j.at("driver").get<std::string>();
    result.kind = j.at("kind").get<std::string>() == "subjective" ? SignalKind::kSubjective
                                                                  : SignalKind::kObjective;
    result.params.horizon = j.at("horizon").get<double>();
    result.params.damage_scale = j.at("damage_scale").get<double>();
    result.params.temporal_decay = j.at("temporal_decay").get<double>();
    result.params.spatial_decay = j.at("spatial_decay").get<double>();
    result.params.velocity_blend = j.value("velocity_blend", result.params.velocity_blend);
    result.params.dt = j.value("dt", result.params.dt);
    result.final_loss = j.value("final_loss", 0.0);
    if (j.contains("r_squared") && !j.at("r_squared").is_null()) {
      result.r_squared = j.at("r_squared").get<double>();
    }
    result.iterations_run = j.value("iterations_run", 0);
    if (j.contains("loss_trace")) {
      result.loss_trace = j.at("loss_trace").get<std::vector<std::pair<int, double>>>();
    }
    if (j.contains("predicted")) {
      result.predicted = j.at("predicted").get<std::vector<double>>();
    }
    if (j.contains("residuals")) {
      result.residuals = j.at("residuals").get<std::vector<double>>();
    }
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid result record: ") + e.what(), 0);
  }
}

// 64-bit FNV-1a over the file bytes, for run manifests.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file.good()) {
    throw Error("cannot digest '" + path.string() + "'");
  }
  std::uint64_t hash = 14695981039346656037ull;
  char chunk[4096];
  while (file.read(chunk, sizeof(chunk)) || file.gcount() > 0) {
    for (std::streamsize i = 0; i < file.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 1099511628211ull;
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string("fnv1a64:") + buf;
}

}  // namespace podar
