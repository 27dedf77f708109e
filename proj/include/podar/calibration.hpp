#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "podar/adam.hpp"
#include "podar/errors.hpp"
#include "podar/risk.hpp"

namespace podar {

enum class SignalKind { kObjective, kSubjective };

inline const char* to_string(SignalKind kind) {
  return kind == SignalKind::kObjective ? "objective" : "subjective";
}

enum class NormalizationScope { kGlobal, kPerDriver };

struct Normalization {
  double threshold = 0.0;  // raw values strictly below were zeroed first
  NormalizationScope scope = NormalizationScope::kGlobal;
  std::map<std::string, double> divisors;  // per driver; one shared value for global scope
};

struct StandardizedDataset {
  SignalKind kind = SignalKind::kObjective;
  std::map<std::string, std::vector<double>> signals;  // driver -> values in [0, 1]
  Normalization normalization;
};

// One driver's standardized signal vector, index-aligned with the scenarios.
struct DriverSignal {
  std::string driver;
  SignalKind kind = SignalKind::kObjective;
  std::vector<double> values;
};

inline DriverSignal driver_signal(const StandardizedDataset& dataset, const std::string& driver) {
  const auto it = dataset.signals.find(driver);
  if (it == dataset.signals.end()) {
    throw InvalidInputError("unknown driver '" + driver + "'");
  }
  return {driver, dataset.kind, it->second};
}

namespace detail {

inline void check_raw_signals(const std::map<std::string, std::vector<double>>& raw) {
  if (raw.empty()) {
    throw InvalidInputError("empty signal dataset");
  }
  for (const auto& [driver, values] : raw) {
    if (values.empty()) {
      throw InvalidInputError("driver '" + driver + "' has no signal values");
    }
    for (const double v : values) {
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidInputError("driver '" + driver + "' has a negative or non-finite value");
      }
    }
  }
}

}  // namespace detail

// Steering-angle signals: responses below the conscious-action threshold are
// zeroed, then every driver is scaled by the one maximum across all drivers.
inline StandardizedDataset standardize_objective(
    const std::map<std::string, std::vector<double>>& raw, double threshold = 2.0) {
  detail::check_raw_signals(raw);
  StandardizedDataset out;
  out.kind = SignalKind::kObjective;
  out.normalization.threshold = threshold;
  out.normalization.scope = NormalizationScope::kGlobal;

  double peak = 0.0;
  for (const auto& [driver, values] : raw) {
    for (const double v : values) {
      if (v >= threshold) {
        peak = std::max(peak, v);
      }
    }
  }
  if (peak <= 0.0) {
    throw DegenerateNormalizationError("all signals are zero after thresholding");
  }
  for (const auto& [driver, values] : raw) {
    std::vector<double> scaled(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      scaled[i] = values[i] < threshold ? 0.0 : values[i] / peak;
    }
    out.signals.emplace(driver, std::move(scaled));
    out.normalization.divisors.emplace(driver, peak);
  }
  return out;
}

// Oral-response signals carry driver-chosen scales, so each driver is scaled
// by their own maximum; no threshold applies.
inline StandardizedDataset standardize_subjective(
    const std::map<std::string, std::vector<double>>& raw) {
  detail::check_raw_signals(raw);
  StandardizedDataset out;
  out.kind = SignalKind::kSubjective;
  out.normalization.scope = NormalizationScope::kPerDriver;

  for (const auto& [driver, values] : raw) {
    const double peak = *std::max_element(values.begin(), values.end());
    if (peak <= 0.0) {
      throw DegenerateNormalizationError("driver '" + driver + "' reported only zeros");
    }
    std::vector<double> scaled(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      scaled[i] = values[i] / peak;
    }
    out.signals.emplace(driver, std::move(scaled));
    out.normalization.divisors.emplace(driver, peak);
  }
  return out;
}

struct CalibrationConfig {
  double learning_rate = 1e-4;
  int iterations = 100000;
  int batch_size = 77;  // full batch; recorded in run manifests
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> horizon_candidates = {1, 2, 3, 4, 5, 6, 7};  // seconds
  double init_damage_scale = 1.0;
  double init_temporal_decay = 1.0;
  double init_spatial_decay = 1.0;
  double velocity_blend = 0.7;
  double dt = 0.1;
  std::uint64_t seed = 0;  // recorded; the fixed-point start needs no draws
  int trace_stride = 100;
  // Early stop: halt once no parameter has moved by more than param_tol for
  // param_tol_window consecutive iterations. Zero disables.
  double param_tol = 0.0;
  int param_tol_window = 1000;

  void validate() const {
    if (!(learning_rate > 0.0)) {
      throw InvalidInputError("learning rate must be positive");
    }
    if (iterations < 1) {
      throw InvalidInputError("iteration count must be at least 1");
    }
    if (batch_size < 1) {
      throw InvalidInputError("batch size must be at least 1");
    }
    if (trace_stride < 1) {
      throw InvalidInputError("trace stride must be at least 1");
    }
    if (param_tol < 0.0 || param_tol_window < 1) {
      throw InvalidInputError("invalid early-stop settings");
    }
  }
};

struct CalibrationResult {
  std::string driver;
  SignalKind kind = SignalKind::kObjective;
  PodarParams params;  // fitted horizon/damage_scale/temporal_decay/spatial_decay
  double final_loss = 0.0;
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<int, double>> loss_trace;  // (iteration, loss)
  std::vector<double> predicted;
  std::vector<double> residuals;  // predicted - observed
  int iterations_run = 0;
};

// Coefficient of determination about the observed mean.
inline double r_squared(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size() || observed.size() < 2) {
    throw InvalidInputError("prediction/observation vectors must have equal length >= 2");
  }
  double mean = 0.0;
  for (const double v : observed) {
    mean += v;
  }
  mean /= static_cast<double>(observed.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
    ss_res += (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
  }
  if (ss_tot == 0.0) {
    throw UndefinedVarianceError("observed signal is constant");
  }
  return 1.0 - ss_res / ss_tot;
}

// Mean squared error between per-scene risk predictions and signals.
inline double calibration_loss(const PodarParams& params, const std::vector<Scene>& scenes,
                               std::span<const double> signals) {
  if (scenes.size() != signals.size() || scenes.empty()) {
    throw InvalidInputError("scenario/signal count mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const double r = podar_scene(scenes[i], params).final_podar - signals[i];
    acc += r * r;
  }
  return acc / static_cast<double>(scenes.size());
}

struct LossGradient {
  double damage_scale = 0.0;
  double temporal_decay = 0.0;
  double spatial_decay = 0.0;
  bool boundary = false;  // one-sided handling was needed at damage_scale == 0
};

// Gradient of the mean squared error through the maximum cell of each scene.
// At an argmax tie the tie-broken cell's subgradient is used, matching the
// value podar_scene returns.
inline LossGradient analytic_gradient(const PodarParams& params, const std::vector<Scene>& scenes,
                                      std::span<const double> signals) {
  if (scenes.size() != signals.size() || scenes.empty()) {
    throw InvalidInputError("scenario/signal count mismatch");
  }
  params.validate();
  LossGradient grad;
  const double n = static_cast<double>(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    double value = 0.0;
    double d_scale = 0.0;
    double at_time = 0.0;
    double at_distance = 0.0;
    if (params.damage_scale > 0.0) {
      const RiskBreakdown b = podar_scene(scenes[i], params);
      value = b.final_podar;
      if (value > 0.0) {
        const RiskCell& cell = b.cells[b.argmax_object][b.argmax_step];
        d_scale = cell.damage * cell.w_time * cell.w_dist;
        at_time = b.times[b.argmax_step];
        at_distance = cell.distance;
      }
    } else {
      // One-sided derivative at the scale boundary: the steepest cell is the
      // argmax under a unit damage scale.
      PodarParams probe = params;
      probe.damage_scale = 1.0;
      d_scale = podar_scene(scenes[i], probe).final_podar;
      grad.boundary = grad.boundary || d_scale > 0.0;
    }
    const double r = value - signals[i];
    grad.damage_scale += 2.0 * r * d_scale / n;
    grad.temporal_decay += 2.0 * r * (-at_time) * value / n;
    grad.spatial_decay += 2.0 * r * (-at_distance) * value / n;
  }
  return grad;
}

namespace detail {

// Parameter-independent description of one cell: only positive-damage cells
// can win the maximum, so the rest are dropped up front.
struct SceneCell {
  double time = 0.0;
  double distance = 0.0;
  double log_damage = 0.0;
};

struct SceneCells {
  std::vector<SceneCell> cells;  // (step, object)-ordered, same tie-break as podar_scene
};

inline SceneCells build_scene_cells(const Scene& scene, const PodarParams& shape) {
  PodarParams probe = shape;
  probe.damage_scale = 1.0;
  probe.temporal_decay = 0.0;
  probe.spatial_decay = 0.0;
  const RiskBreakdown b = podar_scene(scene, probe);
  SceneCells out;
  for (std::size_t i = 0; i < b.times.size(); ++i) {
    for (std::size_t n = 0; n < b.cells.size(); ++n) {
      const RiskCell& cell = b.cells[n][i];
      if (cell.damage > 0.0) {
        out.cells.push_back({b.times[i], cell.distance, std::log(cell.damage)});
      }
    }
  }
  return out;
}

struct FastEval {
  double value = 0.0;      // scale * exp(best)
  double unscaled = 0.0;   // exp(best); d(value)/d(scale)
  double time = 0.0;       // argmax cell time
  double distance = 0.0;   // argmax cell gap
};

inline FastEval evaluate_cells(const SceneCells& sc, double scale, double temporal,
                               double spatial) {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  const std::size_t count = sc.cells.size();
  for (std::size_t i = 0; i < count; ++i) {
    const SceneCell& c = sc.cells[i];
    const double m = c.log_damage - temporal * c.time - spatial * c.distance;
    if (m > best) {
      best = m;
      arg = i;
    }
  }
  FastEval out;
  if (count == 0) {
    return out;
  }
  out.unscaled = std::exp(best);
  out.value = scale * out.unscaled;
  out.time = sc.cells[arg].time;
  out.distance = sc.cells[arg].distance;
  return out;
}

}  // namespace detail

// Fits (damage_scale, temporal_decay, spatial_decay) for one driver at a
// fixed horizon by full-batch gradient descent. Every step projects the
// parameters back onto [0, inf). The reported predictions, loss, and fit are
// recomputed with podar_scene at the final iterate, so evaluating the same
// scenes with the fitted parameters reproduces them exactly.
inline CalibrationResult calibrate(const DriverSignal& data, const std::vector<Scene>& scenes,
                                   double horizon, const CalibrationConfig& config) {
  config.validate();
  if (scenes.empty() || scenes.size() != data.values.size()) {
    throw InvalidInputError("scenario/signal count mismatch");
  }

  PodarParams params;
  params.horizon = horizon;
  params.dt = config.dt;
  params.velocity_blend = config.velocity_blend;
  params.damage_scale = config.init_damage_scale;
  params.temporal_decay = config.init_temporal_decay;
  params.spatial_decay = config.init_spatial_decay;
  params.validate();

  std::vector<detail::SceneCells> caches;
  caches.reserve(scenes.size());
  for (const Scene& scene : scenes) {
    caches.push_back(detail::build_scene_cells(scene, params));
  }

  const double n = static_cast<double>(scenes.size());
  std::array<double, 3> theta = {params.damage_scale, params.temporal_decay,
                                 params.spatial_decay};
  Adam optimizer({config.learning_rate, config.beta1, config.beta2, config.epsilon},
                 theta.size());

  std::vector<std::pair<int, double>> trace;
  int stable_iters = 0;
  int iterations_run = 0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    double loss = 0.0;
    std::array<double, 3> grad = {0.0, 0.0, 0.0};
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const detail::FastEval f = detail::evaluate_cells(caches[s], theta[0], theta[1], theta[2]);
      const double r = f.value - data.values[s];
      loss += r * r;
      grad[0] += 2.0 * r * f.unscaled;
      grad[1] += 2.0 * r * (-f.time) * f.value;
      grad[2] += 2.0 * r * (-f.distance) * f.value;
    }
    loss /= n;
    grad[0] /= n;
    grad[1] /= n;
    grad[2] /= n;

    if (!std::isfinite(loss)) {
      throw OptimizationError("loss diverged at iteration " + std::to_string(iter),
                              std::move(trace));
    }
    if (iter % config.trace_stride == 0) {
      trace.emplace_back(iter, loss);
    }

    const std::array<double, 3> before = theta;
    optimizer.update(theta, grad);
    for (double& p : theta) {
      p = std::max(p, 0.0);
    }
    ++iterations_run;

    if (config.param_tol > 0.0) {
      const double moved = std::max({std::abs(theta[0] - before[0]),
                                     std::abs(theta[1] - before[1]),
                                     std::abs(theta[2] - before[2])});
      stable_iters = moved <= config.param_tol ? stable_iters + 1 : 0;
      if (stable_iters >= config.param_tol_window) {
        break;
      }
    }
  }

  CalibrationResult result;
  result.driver = data.driver;
  result.kind = data.kind;
  result.params = params;
  result.params.damage_scale = theta[0];
  result.params.temporal_decay = theta[1];
  result.params.spatial_decay = theta[2];
  result.iterations_run = iterations_run;

  result.predicted.resize(scenes.size());
  result.residuals.resize(scenes.size());
  double final_loss = 0.0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    result.predicted[s] = podar_scene(scenes[s], result.params).final_podar;
    result.residuals[s] = result.predicted[s] - data.values[s];
    final_loss += result.residuals[s] * result.residuals[s];
  }
  result.final_loss = final_loss / n;
  trace.emplace_back(iterations_run, result.final_loss);
  result.loss_trace = std::move(trace);

  const double lo = *std::min_element(data.values.begin(), data.values.end());
  const double hi = *std::max_element(data.values.begin(), data.values.end());
  if (lo != hi) {
    result.r_squared = r_squared(result.predicted, data.values);
  }
  return result;
}

struct HorizonCandidate {
  double horizon = 0.0;
  bool failed = false;
  std::string error;  // set when this candidate's optimization failed
  CalibrationResult result;
};

struct HorizonSearch {
  CalibrationResult best;
  std::vector<HorizonCandidate> candidates;
};

// Calibrates every candidate horizon and keeps the best fit; ties resolve
// toward the smaller horizon.
inline HorizonSearch select_horizon(const DriverSignal& data, const std::vector<Scene>& scenes,
                                    const CalibrationConfig& config) {
  if (config.horizon_candidates.empty()) {
    throw InvalidInputError("empty horizon candidate set");
  }
  std::vector<double> horizons = config.horizon_candidates;
  std::sort(horizons.begin(), horizons.end());

  HorizonSearch search;
  double best_score = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const double horizon : horizons) {
    HorizonCandidate candidate;
    candidate.horizon = horizon;
    try {
      candidate.result = calibrate(data, scenes, horizon, config);
      const double score = std::isnan(candidate.result.r_squared)
                               ? -std::numeric_limits<double>::infinity()
                               : candidate.result.r_squared;
      if (!any || score > best_score) {
        best_score = score;
        search.best = candidate.result;
        any = true;
      }
    } catch (const OptimizationError& e) {
      candidate.failed = true;
      candidate.error = e.what();
    }
    search.candidates.push_back(std::move(candidate));
  }
  if (!any) {
    throw OptimizationError("every horizon candidate failed to optimize", {});
  }
  return search;
}

struct ParameterPair {
  std::string driver;
  double objective = 0.0;
  double subjective = 0.0;
  double residual = 0.0;  // subjective - objective, distance from the identity line
};

struct SignalComparison {
  std::vector<ParameterPair> temporal;
  std::vector<ParameterPair> spatial;
  double temporal_correlation = 0.0;
  double spatial_correlation = 0.0;
  std::string temporal_outlier;  // driver with the largest identity-line residual
  std::string spatial_outlier;
};

namespace detail {

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    throw UndefinedVarianceError("correlation is undefined for a constant series");
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace detail

// Pairs each driver's fitted decay rates across the two signal kinds and
// flags, per parameter, the driver farthest from the identity line.
inline SignalComparison compare_signals(const std::vector<CalibrationResult>& objective,
                                        const std::vector<CalibrationResult>& subjective) {
  if (objective.empty() || objective.size() != subjective.size()) {
    throw InvalidInputError("result sets must cover the same drivers");
  }
  std::map<std::string, const CalibrationResult*> by_driver;
  for (const CalibrationResult& r : subjective) {
    by_driver.emplace(r.driver, &r);
  }

  SignalComparison out;
  std::vector<double> a_obj, a_sub, b_obj, b_sub;
  for (const CalibrationResult& obj : objective) {
    const auto it = by_driver.find(obj.driver);
    if (it == by_driver.end()) {
      throw InvalidInputError("driver '" + obj.driver + "' missing from the subjective set");
    }
    const CalibrationResult& sub = *it->second;
    out.temporal.push_back({obj.driver, obj.params.temporal_decay, sub.params.temporal_decay,
                            sub.params.temporal_decay - obj.params.temporal_decay});
    out.spatial.push_back({obj.driver, obj.params.spatial_decay, sub.params.spatial_decay,
                           sub.params.spatial_decay - obj.params.spatial_decay});
    a_obj.push_back(obj.params.temporal_decay);
    a_sub.push_back(sub.params.temporal_decay);
    b_obj.push_back(obj.params.spatial_decay);
    b_sub.push_back(sub.params.spatial_decay);
  }

  out.temporal_correlation = detail::pearson(a_obj, a_sub);
  out.spatial_correlation = detail::pearson(b_obj, b_sub);

  const auto worst = [](const std::vector<ParameterPair>& pairs) {
    const auto it = std::max_element(pairs.begin(), pairs.end(),
                                     [](const ParameterPair& x, const ParameterPair& y) {
                                       return std::abs(x.residual) < std::abs(y.residual);
                                     });
    return it->driver;
  };
  out.temporal_outlier = worst(out.temporal);
  out.spatial_outlier = worst(out.spatial);
  return out;
}

// Time at which |exp(-lo t) - exp(-hi t)| peaks, for decay rates 0 < lo < hi.
inline double attenuation_spread_peak_time(double lo, double hi) {
  if (!(lo > 0.0) || !(hi > lo)) {
    throw InvalidInputError("spread peak requires 0 < lo < hi");
  }
  return std::log(hi / lo) / (hi - lo);
}

}  // namespace podar
