#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "podar/errors.hpp"
#include "podar/geometry.hpp"

namespace podar {

enum class ObjectType { kVehicle, kPedestrian, kBicycle, kObstacle };

struct KinematicState {
  Vec2 position;
  Vec2 velocity;
  double heading = 0.0;  // radians in [-pi, pi]; follows the velocity when moving

  // Derives the heading from the velocity; `heading_at_rest` is kept for a
  // stationary body.
  static KinematicState from_velocity(Vec2 position, Vec2 velocity,
                                      double heading_at_rest = 0.0) {
    double heading = heading_at_rest;
    if (velocity.x != 0.0 || velocity.y != 0.0) {
      heading = std::atan2(velocity.y, velocity.x);
    } else {
      heading = std::remainder(heading, 2.0 * std::numbers::pi);
    }
    return {position, velocity, heading};
  }
};

inline bool is_finite(const KinematicState& s) {
  return is_finite(s.position) && is_finite(s.velocity) && std::isfinite(s.heading);
}

// Host vehicle or surrounding object taking part in a scene.
struct RoadObject {
  std::string id;
  ObjectType type = ObjectType::kVehicle;
  KinematicState state;
  BodyGeometry geometry;
  double mass = 0.0;         // kg
  double sensitivity = 1.0;  // damage weight of the object class, >= 0

  double virtual_mass() const { return mass * sensitivity; }

  Pose pose() const { return {state.position, state.heading}; }
};

// The four calibrated scalars plus the fixed evaluation settings.
struct PodarParams {
  double horizon = 3.0;         // prediction horizon, seconds
  double damage_scale = 1.0;    // multiplies the estimated damage
  double temporal_decay = 1.0;  // attenuation rate over predicted time, 1/s
  double spatial_decay = 1.0;   // attenuation rate over contour gap, 1/m
  double velocity_blend = 0.7;  // weight of the closing projection vs. speed sum
  double dt = 0.1;              // prediction timestep, seconds

  void validate() const {
    if (!std::isfinite(horizon) || !(horizon > 0.0)) {
      throw InvalidInputError("prediction horizon must be positive and finite");
    }
    if (!std::isfinite(damage_scale) || damage_scale < 0.0) {
      throw InvalidInputError("damage scale must be non-negative");
    }
    if (!std::isfinite(temporal_decay) || temporal_decay < 0.0) {
      throw InvalidInputError("temporal decay must be non-negative");
    }
    if (!std::isfinite(spatial_decay) || spatial_decay < 0.0) {
      throw InvalidInputError("spatial decay must be non-negative");
    }
    if (!(velocity_blend >= 0.0 && velocity_blend <= 1.0)) {
      throw InvalidInputError("velocity blend must lie in [0, 1]");
    }
    if (!std::isfinite(dt) || !(dt > 0.0) || dt > horizon) {
      throw InvalidInputError("timestep must satisfy 0 < dt <= horizon");
    }
  }
};

struct TrajectoryPoint {
  double time = 0.0;
  KinematicState state;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

struct Scene {
  RoadObject host;
  std::vector<RoadObject> objects;
};

struct RiskCell {
  double value = 0.0;     // attenuated damage, clamped at zero
  double damage = 0.0;    // signed potential damage
  double w_time = 1.0;    // temporal attenuation factor
  double w_dist = 1.0;    // spatial attenuation factor
  double distance = 0.0;  // contour gap, meters
};

// Full evaluation record of one scene: one cell per (object, timestep).
struct RiskBreakdown {
  double final_podar = 0.0;
  std::size_t argmax_object = 0;
  std::size_t argmax_step = 0;
  std::string argmax_id;
  std::vector<double> times;
  std::vector<std::vector<RiskCell>> cells;  // [object][step]
};

inline std::size_t prediction_steps(double horizon, double dt) {
  return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9)) + 1;
}

inline Trajectory predict_constant_velocity(const KinematicState& state, double horizon,
                                            double dt) {
  if (!is_finite(state)) {
    throw InvalidInputError("kinematic state has non-finite components");
  }
  if (!std::isfinite(horizon) || !(horizon > 0.0) || !std::isfinite(dt) || !(dt > 0.0)) {
    throw InvalidInputError("horizon and dt must be positive and finite");
  }
  const std::size_t steps = prediction_steps(horizon, dt);
  Trajectory out;
  out.points.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    KinematicState s = state;
    s.position = state.position + state.velocity * t;
    out.points.push_back({t, s});
  }
  return out;
}

inline double contour_distance(const RoadObject& a, const RoadObject& b) {
  return contour_distance(a.geometry, a.pose(), b.geometry, b.pose());
}

// Signed closing speed: positive while the bodies approach, negative once
// they separate (for blend near 1).
inline double closing_speed(const KinematicState& host, const KinematicState& object,
                            double blend) {
  const Vec2 gap = host.position - object.position;
  const double separation = norm(gap);
  if (separation == 0.0) {
    throw DegenerateGeometryError("coincident positions: closing direction undefined");
  }
  const Vec2 direction = gap * (1.0 / separation);
  const double approach = dot(object.velocity - host.velocity, direction);
  return blend * approach + (1.0 - blend) * (norm(object.velocity) + norm(host.velocity));
}

namespace detail {

// Same as closing_speed but defined at exact overlap: the projection term is
// replaced by its head-on limit |v_obj - v_host| so a predicted contact cell
// keeps the full approach damage.
inline double cell_closing_speed(const KinematicState& host, const KinematicState& object,
                                 double blend) {
  const Vec2 gap = host.position - object.position;
  const double separation = norm(gap);
  double approach;
  if (separation == 0.0) {
    approach = norm(object.velocity - host.velocity);
  } else {
    approach = dot(object.velocity - host.velocity, gap * (1.0 / separation));
  }
  return blend * approach + (1.0 - blend) * (norm(object.velocity) + norm(host.velocity));
}

}  // namespace detail

// Kinetic-energy-like damage of a virtual collision between two bodies; the
// sign follows the closing speed.
inline double potential_damage(const RoadObject& host, const RoadObject& object,
                               const KinematicState& host_state,
                               const KinematicState& object_state, double blend) {
  if (host.virtual_mass() < 0.0 || object.virtual_mass() < 0.0) {
    throw InvalidInputError("virtual mass must be non-negative");
  }
  const double v = closing_speed(host_state, object_state, blend);
  return 0.5 * (host.virtual_mass() + object.virtual_mass()) * v * std::abs(v);
}

inline double temporal_attenuation(double t, double rate) {
  if (!std::isfinite(t) || t < 0.0 || !std::isfinite(rate) || rate < 0.0) {
    throw InvalidInputError("temporal attenuation requires t >= 0 and rate >= 0");
  }
  return std::exp(-rate * t);
}

inline double spatial_attenuation(double distance, double rate) {
  if (!std::isfinite(distance) || distance < 0.0 || !std::isfinite(rate) || rate < 0.0) {
    throw InvalidInputError("spatial attenuation requires distance >= 0 and rate >= 0");
  }
  return std::exp(-rate * distance);
}

// Evaluates the scene risk: predicts all trajectories, assumes a virtual
// collision at every (object, timestep) cell, attenuates its damage over
// predicted time and contour gap, and keeps the maximum cell. Negative cells
// (separating bodies) clamp to zero before aggregation.
inline RiskBreakdown podar_scene(const RoadObject& host, const std::vector<RoadObject>& objects,
                                 const PodarParams& params) {
  params.validate();
  if (objects.empty()) {
    throw InvalidInputError("scene has no surrounding objects");
  }
  if (!is_finite(host.state)) {
    throw InvalidInputError("host state has non-finite components");
  }
  if (host.virtual_mass() < 0.0) {
    throw InvalidInputError("host virtual mass must be non-negative");
  }
  for (const RoadObject& object : objects) {
    if (!is_finite(object.state)) {
      throw InvalidInputError("object state has non-finite components");
    }
    if (object.virtual_mass() < 0.0) {
      throw InvalidInputError("object virtual mass must be non-negative");
    }
    if (norm(object.state.position - host.state.position) == 0.0) {
      throw DegenerateGeometryError("object '" + object.id + "' coincides with the host");
    }
  }

  const Trajectory host_traj = predict_constant_velocity(host.state, params.horizon, params.dt);
  const std::size_t steps = host_traj.points.size();

  RiskBreakdown out;
  out.times.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    out.times[i] = host_traj.points[i].time;
  }
  out.cells.resize(objects.size());

  for (std::size_t n = 0; n < objects.size(); ++n) {
    const RoadObject& object = objects[n];
    const Trajectory obj_traj =
        predict_constant_velocity(object.state, params.horizon, params.dt);
    const double mass_sum = host.virtual_mass() + object.virtual_mass();
    auto& row = out.cells[n];
    row.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const KinematicState& hs = host_traj.points[i].state;
      const KinematicState& os = obj_traj.points[i].state;
      RiskCell& cell = row[i];
      cell.distance = contour_distance(host.geometry, {hs.position, hs.heading},
                                       object.geometry, {os.position, os.heading});
      const double v = detail::cell_closing_speed(hs, os, params.velocity_blend);
      cell.damage = 0.5 * mass_sum * v * std::abs(v);
      cell.w_time = std::exp(-params.temporal_decay * out.times[i]);
      cell.w_dist = std::exp(-params.spatial_decay * cell.distance);
      const double raw = params.damage_scale * cell.damage * cell.w_time * cell.w_dist;
      cell.value = std::max(raw, 0.0);
    }
  }

  // Timestep-major scan so ties resolve to the earliest step, then the
  // lowest object index.
  double best = -1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t n = 0; n < objects.size(); ++n) {
      if (out.cells[n][i].value > best) {
        best = out.cells[n][i].value;
        out.argmax_object = n;
        out.argmax_step = i;
      }
    }
  }
  out.final_podar = std::max(best, 0.0);
  out.argmax_id = objects[out.argmax_object].id;
  return out;
}

inline RiskBreakdown podar_scene(const Scene& scene, const PodarParams& params) {
  return podar_scene(scene.host, scene.objects, params);
}

}  // namespace podar
