#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "podar/calibration.hpp"
#include "podar/errors.hpp"
#include "podar/risk.hpp"

namespace podar {

// Geometry of the obstacle-avoidance trial grid. The listed longitudinal
// order fixes the obstacle numbering (column-major, 11 lateral rows per
// column), so the default farthest-first order puts the nearest centerline
// obstacle at the highest center-row id.
struct GridConfig {
  double host_speed = 25.0;  // m/s
  double host_length = 4.0;
  double host_width = 2.0;
  double host_mass = 1.8;
  double host_sensitivity = 1.0;
  double obstacle_mass = 1.8;
  double obstacle_sensitivity = 1.0;
  std::vector<double> longitudinal = {175.0, 150.0, 125.0, 100.0, 75.0, 50.0, 25.0};
  std::vector<double> lateral = {-2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5};

  void validate() const {
    if (!(host_speed > 0.0)) {
      throw ConfigError("host speed must be positive");
    }
    if (!(host_length > 0.0) || !(host_width > 0.0)) {
      throw ConfigError("host extents must be positive");
    }
    if (host_mass < 0.0 || obstacle_mass < 0.0 || host_sensitivity < 0.0 ||
        obstacle_sensitivity < 0.0) {
      throw ConfigError("masses and sensitivities must be non-negative");
    }
    if (longitudinal.size() != 7 || lateral.size() != 11) {
      throw ConfigError("grid must have 7 longitudinal distances and 11 lateral offsets");
    }
    for (const double x : longitudinal) {
      if (!(x > 0.0)) {
        throw ConfigError("longitudinal distances must be positive");
      }
    }
    std::size_t zeros = 0;
    for (const double y : lateral) {
      if (y == 0.0) {
        ++zeros;
        continue;
      }
      if (std::find(lateral.begin(), lateral.end(), -y) == lateral.end()) {
        throw ConfigError("lateral offsets must be symmetric about zero");
      }
    }
    if (zeros != 1) {
      throw ConfigError("exactly one lateral offset must be zero");
    }
  }
};

// The 77 single-obstacle scenes; scenes[i] carries obstacle id i + 1.
struct ScenarioSet {
  GridConfig config;
  std::vector<Scene> scenes;
  std::vector<std::string> labels;        // "O1" .. "O77"
  std::vector<int> main_sequence;         // ids of the centerline obstacles
};

inline ScenarioSet build_grid_scenarios(const GridConfig& config) {
  config.validate();

  RoadObject host;
  host.id = "host";
  host.type = ObjectType::kVehicle;
  host.state = KinematicState::from_velocity({0.0, 0.0}, {config.host_speed, 0.0});
  host.geometry = BodyGeometry::rectangle(config.host_length, config.host_width);
  host.mass = config.host_mass;
  host.sensitivity = config.host_sensitivity;

  ScenarioSet set;
  set.config = config;
  int id = 0;
  for (const double distance : config.longitudinal) {
    for (const double offset : config.lateral) {
      ++id;
      RoadObject obstacle;
      obstacle.id = "O" + std::to_string(id);
      obstacle.type = ObjectType::kObstacle;
      obstacle.state = KinematicState::from_velocity({distance, offset}, {0.0, 0.0});
      obstacle.geometry = BodyGeometry::point();
      obstacle.mass = config.obstacle_mass;
      obstacle.sensitivity = config.obstacle_sensitivity;
      set.scenes.push_back({host, {obstacle}});
      set.labels.push_back(obstacle.id);
      if (offset == 0.0) {
        set.main_sequence.push_back(id);
      }
    }
  }
  return set;
}

// Ground truth for a synthetic dataset used in recovery testing.
struct SyntheticSpec {
  PodarParams params;
  double noise_sigma = 0.0;  // std dev, in the units of the raw risk signal
  std::uint64_t seed = 0;
};

struct SyntheticSignals {
  std::vector<double> values;  // in [0, 1]
  double divisor = 1.0;        // raw risk units per normalized unit
};

// Evaluates the ground-truth model over every scene, optionally perturbs the
// signals with Gaussian noise (clamped at zero), and scales by the set
// maximum. The divisor lets a recovered damage scale be mapped back onto the
// ground-truth scale.
inline SyntheticSignals generate_synthetic(const ScenarioSet& set, const SyntheticSpec& spec) {
  spec.params.validate();
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw InvalidInputError("noise sigma must be non-negative and finite");
  }
  if (set.scenes.empty()) {
    throw InvalidInputError("scenario set is empty");
  }

  std::vector<double> raw(set.scenes.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < set.scenes.size(); ++i) {
    raw[i] = podar_scene(set.scenes[i], spec.params).final_podar;
    peak = std::max(peak, raw[i]);
  }
  if (peak <= 0.0) {
    throw DegenerateSpecError("ground truth produces zero risk on every scene");
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : raw) {
      v = std::max(v + noise(rng), 0.0);
    }
  }

  SyntheticSignals out;
  out.divisor = *std::max_element(raw.begin(), raw.end());
  if (out.divisor <= 0.0) {
    throw DegenerateSpecError("noise drove every synthetic signal to zero");
  }
  out.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.values[i] = raw[i] / out.divisor;
  }
  return out;
}

}  // namespace podar
