#pragma once

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "podar/calibration.hpp"
#include "podar/errors.hpp"
#include "podar/experiment.hpp"
#include "podar/io.hpp"
#include "podar/risk.hpp"

namespace podar {

inline constexpr const char* kToolVersion = "0.1.0";

// Attenuation-curve sampling used by the calibrate outputs.
inline constexpr double kCurveTimeMax = 7.0;
inline constexpr double kCurveTimeStep = 0.05;
inline constexpr double kCurveDistMax = 3.0;
inline constexpr double kCurveDistStep = 0.02;

namespace detail {

inline std::string manifest_timestamp() {
  if (const char* fixed = std::getenv("PODAR_TIMESTAMP")) {
    return fixed;
  }
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ManifestInput {
  std::string name;
  std::filesystem::path path;
};

inline void write_manifest(const std::filesystem::path& path, const std::string& command,
                           std::uint64_t seed, const nlohmann::json& config,
                           const std::vector<ManifestInput>& inputs) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = kToolVersion;
  j["timestamp"] = manifest_timestamp();
  j["seed"] = seed;
  j["config"] = config;
  nlohmann::json in = nlohmann::json::object();
  for (const ManifestInput& input : inputs) {
    in[input.name] = {{"path", input.path.string()}, {"digest", file_digest(input.path)}};
  }
  j["inputs"] = std::move(in);
  write_text_file(path, j.dump(2) + "\n");
}

// Runs `fn(0..count)` on up to `workers` threads; job outcomes are stored by
// index, so scheduling cannot change the results.
inline void run_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t pool_size =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (pool_size <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  std::vector<std::thread> pool;
  pool.reserve(pool_size);
  for (std::size_t w = 0; w < pool_size; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) {
    t.join();
  }
  for (const std::exception_ptr& failure : failures) {
    if (failure) {
      std::rethrow_exception(failure);
    }
  }
}

inline nlohmann::json config_to_json(const CalibrationConfig& config) {
  nlohmann::json j;
  j["learning_rate"] = config.learning_rate;
  j["iterations"] = config.iterations;
  j["batch_size"] = config.batch_size;
  j["beta1"] = config.beta1;
  j["beta2"] = config.beta2;
  j["epsilon"] = config.epsilon;
  j["horizon_candidates"] = config.horizon_candidates;
  j["init_damage_scale"] = config.init_damage_scale;
  j["init_temporal_decay"] = config.init_temporal_decay;
  j["init_spatial_decay"] = config.init_spatial_decay;
  j["velocity_blend"] = config.velocity_blend;
  j["dt"] = config.dt;
  j["seed"] = config.seed;
  j["trace_stride"] = config.trace_stride;
  j["param_tol"] = config.param_tol;
  j["param_tol_window"] = config.param_tol_window;
  return j;
}

inline nlohmann::json grid_to_json(const GridConfig& grid) {
  nlohmann::json j;
  j["host_speed"] = grid.host_speed;
  j["host_length"] = grid.host_length;
  j["host_width"] = grid.host_width;
  j["host_mass"] = grid.host_mass;
  j["host_sensitivity"] = grid.host_sensitivity;
  j["obstacle_mass"] = grid.obstacle_mass;
  j["obstacle_sensitivity"] = grid.obstacle_sensitivity;
  j["longitudinal_m"] = grid.longitudinal;
  j["lateral_m"] = grid.lateral;
  return j;
}

}  // namespace detail

struct CalibrateOptions {
  std::filesystem::path signals;
  std::filesystem::path grid;  // empty -> default grid
  SignalKind kind = SignalKind::kObjective;
  std::filesystem::path out = ".";
  CalibrationConfig config;
  int workers = 1;
};

// Fits every driver in the signal file and writes the summary table, the
// per-driver result records, and the attenuation curve samples.
inline int cmd_calibrate(const CalibrateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    options.config.validate();
    const GridConfig grid =
        options.grid.empty() ? GridConfig{} : parse_grid_config(options.grid);
    const ScenarioSet scenarios = build_grid_scenarios(grid);
    const auto raw = load_signals(options.signals, scenarios.scenes.size());
    const StandardizedDataset dataset = options.kind == SignalKind::kObjective
                                            ? standardize_objective(raw)
                                            : standardize_subjective(raw);

    const std::vector<std::string> drivers = ordered_drivers(dataset.signals);
    std::vector<HorizonSearch> searches(drivers.size());
    detail::run_jobs(drivers.size(), options.workers, [&](std::size_t i) {
      searches[i] =
          select_horizon(driver_signal(dataset, drivers[i]), scenarios.scenes, options.config);
    });

    std::filesystem::create_directories(options.out / "results");

    std::string summary = "driver,horizon_s,damage_scale,temporal_decay,spatial_decay,r_squared\n";
    for (std::size_t i = 0; i < drivers.size(); ++i) {
      const CalibrationResult& r = searches[i].best;
      summary += r.driver + ',' + format_sig6(r.params.horizon) + ',' +
                 format_sig6(r.params.damage_scale) + ',' +
                 format_sig6(r.params.temporal_decay) + ',' +
                 format_sig6(r.params.spatial_decay) + ',' + format_sig6(r.r_squared) + '\n';
      write_result(options.out / "results" / (r.driver + ".json"), r, searches[i].candidates);
    }
    detail::write_text_file(options.out / "summary.csv", summary);

    std::string header = "time_s";
    for (const std::string& driver : drivers) {
      header += ',' + driver;
    }
    std::string temporal = header + '\n';
    for (int i = 0; static_cast<double>(i) * kCurveTimeStep <= kCurveTimeMax + 1e-12; ++i) {
      const double t = static_cast<double>(i) * kCurveTimeStep;
      temporal += format_sig6(t);
      for (std::size_t d = 0; d < drivers.size(); ++d) {
        temporal += ',' + format_sig6(temporal_attenuation(
                              t, searches[d].best.params.temporal_decay));
      }
      temporal += '\n';
    }
    detail::write_text_file(options.out / "curves_temporal.csv", temporal);

    std::string spatial = "distance_m";
    for (const std::string& driver : drivers) {
      spatial += ',' + driver;
    }
    spatial += '\n';
    for (int i = 0; static_cast<double>(i) * kCurveDistStep <= kCurveDistMax + 1e-12; ++i) {
      const double dist = static_cast<double>(i) * kCurveDistStep;
      spatial += format_sig6(dist);
      for (std::size_t d = 0; d < drivers.size(); ++d) {
        spatial += ',' + format_sig6(spatial_attenuation(
                             dist, searches[d].best.params.spatial_decay));
      }
      spatial += '\n';
    }
    detail::write_text_file(options.out / "curves_spatial.csv", spatial);

    nlohmann::json config = detail::config_to_json(options.config);
    config["kind"] = to_string(options.kind);
    config["workers"] = options.workers;
    config["grid"] = detail::grid_to_json(grid);
    std::vector<detail::ManifestInput> inputs = {{"signals", options.signals}};
    if (!options.grid.empty()) {
      inputs.push_back({"grid", options.grid});
    }
    detail::write_manifest(options.out / "manifest.json", "calibrate", options.config.seed,
                           config, inputs);

    for (std::size_t i = 0; i < drivers.size(); ++i) {
      const CalibrationResult& r = searches[i].best;
      out << r.driver << ": horizon=" << format_sig6(r.params.horizon)
          << " damage_scale=" << format_sig6(r.params.damage_scale)
          << " temporal_decay=" << format_sig6(r.params.temporal_decay)
          << " spatial_decay=" << format_sig6(r.params.spatial_decay)
          << " r_squared=" << format_sig6(r.r_squared) << '\n';
    }
    out << "wrote " << options.out.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct EvaluateOptions {
  std::filesystem::path scene;
  std::filesystem::path params;
  std::filesystem::path out = ".";
};

// Evaluates one scene and writes the full per-cell breakdown.
inline int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const Scene scene = load_scene(options.scene);
    const PodarParams params = load_params(options.params);
    const RiskBreakdown breakdown = podar_scene(scene, params);

    std::filesystem::create_directories(options.out);
    std::string csv = "object,step,time_s,distance_m,damage,w_time,w_dist,value\n";
    for (std::size_t n = 0; n < breakdown.cells.size(); ++n) {
      for (std::size_t i = 0; i < breakdown.times.size(); ++i) {
        const RiskCell& cell = breakdown.cells[n][i];
        csv += scene.objects[n].id + ',' + std::to_string(i) + ',' +
               format_exact(breakdown.times[i]) + ',' + format_exact(cell.distance) + ',' +
               format_exact(cell.damage) + ',' + format_exact(cell.w_time) + ',' +
               format_exact(cell.w_dist) + ',' + format_exact(cell.value) + '\n';
      }
    }
    detail::write_text_file(options.out / "breakdown.csv", csv);
    detail::write_manifest(options.out / "manifest.json", "evaluate", 0, nlohmann::json::object(),
                           {{"scene", options.scene}, {"params", options.params}});

    out << "final_podar " << format_exact(breakdown.final_podar) << '\n';
    out << "argmax_object " << breakdown.argmax_id << '\n';
    out << "argmax_step " << breakdown.argmax_step << '\n';
    out << "argmax_time_s " << format_exact(breakdown.times[breakdown.argmax_step]) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct SynthOptions {
  std::filesystem::path spec;
  std::filesystem::path grid;  // empty -> default grid
  std::filesystem::path out = ".";
  std::string driver = "P1";
};

// Generates a synthetic signal file with a known ground truth.
inline int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const SyntheticSpec spec = load_synthetic_spec(options.spec);
    const GridConfig grid =
        options.grid.empty() ? GridConfig{} : parse_grid_config(options.grid);
    const ScenarioSet scenarios = build_grid_scenarios(grid);
    const SyntheticSignals signals = generate_synthetic(scenarios, spec);

    std::filesystem::create_directories(options.out);
    write_signals(options.out / "signals.csv", {{options.driver, signals.values}});

    nlohmann::json config;
    config["driver"] = options.driver;
    config["ground_truth"] = {{"horizon", spec.params.horizon},
                              {"damage_scale", spec.params.damage_scale},
                              {"temporal_decay", spec.params.temporal_decay},
                              {"spatial_decay", spec.params.spatial_decay},
                              {"velocity_blend", spec.params.velocity_blend},
                              {"dt", spec.params.dt}};
    config["noise_sigma"] = spec.noise_sigma;
    config["divisor"] = signals.divisor;
    config["grid"] = detail::grid_to_json(grid);
    std::vector<detail::ManifestInput> inputs = {{"spec", options.spec}};
    if (!options.grid.empty()) {
      inputs.push_back({"grid", options.grid});
    }
    detail::write_manifest(options.out / "manifest.json", "synth", spec.seed, config, inputs);

    out << "wrote " << (options.out / "signals.csv").string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct ReportOptions {
  std::filesystem::path objective_dir;
  std::filesystem::path subjective_dir;
  std::filesystem::path out = ".";
  std::vector<double> time_thresholds = {2.0, 3.0};      // seconds
  std::vector<double> distance_thresholds = {1.0, 2.0};  // meters
};

namespace detail {

inline std::vector<CalibrationResult> read_result_dir(const std::filesystem::path& dir,
                                                      SignalKind expected) {
  std::filesystem::path scan = dir;
  if (std::filesystem::is_directory(dir / "results")) {
    scan = dir / "results";
  }
  if (!std::filesystem::is_directory(scan)) {
    throw InvalidInputError("result directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(scan)) {
    if (entry.path().extension() == ".json" && entry.path().filename() != "manifest.json") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<CalibrationResult> results;
  for (const auto& path : paths) {
    CalibrationResult r = read_result(path);
    if (r.kind != expected) {
      throw InvalidInputError("record '" + path.string() + "' is not a " +
                              std::string(to_string(expected)) + " result");
    }
    results.push_back(std::move(r));
  }
  if (results.empty()) {
    throw InvalidInputError("no result records under '" + dir.string() + "'");
  }
  std::sort(results.begin(), results.end(),
            [](const CalibrationResult& a, const CalibrationResult& b) {
              return driver_less(a.driver, b.driver);
            });
  return results;
}

}  // namespace detail

// Emits the objective-vs-subjective parameter comparison, the temporal
// attenuation spread curve with its peak, and per-driver attenuation
// threshold tables.
inline int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const std::vector<CalibrationResult> objective =
        detail::read_result_dir(options.objective_dir, SignalKind::kObjective);
    const std::vector<CalibrationResult> subjective =
        detail::read_result_dir(options.subjective_dir, SignalKind::kSubjective);
    const SignalComparison comparison = compare_signals(objective, subjective);

    std::filesystem::create_directories(options.out);

    std::string csv =
        "driver,temporal_objective,temporal_subjective,temporal_residual,temporal_outlier,"
        "spatial_objective,spatial_subjective,spatial_residual,spatial_outlier\n";
    for (std::size_t i = 0; i < comparison.temporal.size(); ++i) {
      const ParameterPair& a = comparison.temporal[i];
      const ParameterPair& b = comparison.spatial[i];
      csv += a.driver + ',' + format_sig6(a.objective) + ',' + format_sig6(a.subjective) + ',' +
             format_sig6(a.residual) + ',' +
             (a.driver == comparison.temporal_outlier ? "1" : "0") + ',' +
             format_sig6(b.objective) + ',' + format_sig6(b.subjective) + ',' +
             format_sig6(b.residual) + ',' +
             (b.driver == comparison.spatial_outlier ? "1" : "0") + '\n';
    }
    detail::write_text_file(options.out / "comparison.csv", csv);

    // Temporal spread of the objective models: the envelope between the
    // slowest and fastest decaying drivers.
    double lo = objective.front().params.temporal_decay;
    double hi = lo;
    std::string lo_driver = objective.front().driver;
    std::string hi_driver = lo_driver;
    for (const CalibrationResult& r : objective) {
      if (r.params.temporal_decay < lo) {
        lo = r.params.temporal_decay;
        lo_driver = r.driver;
      }
      if (r.params.temporal_decay > hi) {
        hi = r.params.temporal_decay;
        hi_driver = r.driver;
      }
    }
    std::string spread_csv = "time_s,spread\n";
    double sampled_peak_t = 0.0;
    double sampled_peak = -1.0;
    for (int i = 0; static_cast<double>(i) * kCurveTimeStep <= kCurveTimeMax + 1e-12; ++i) {
      const double t = static_cast<double>(i) * kCurveTimeStep;
      const double spread =
          std::abs(temporal_attenuation(t, lo) - temporal_attenuation(t, hi));
      if (spread > sampled_peak) {
        sampled_peak = spread;
        sampled_peak_t = t;
      }
      spread_csv += format_sig6(t) + ',' + format_sig6(spread) + '\n';
    }
    detail::write_text_file(options.out / "spread_temporal.csv", spread_csv);

    nlohmann::json report;
    report["temporal_correlation"] = comparison.temporal_correlation;
    report["spatial_correlation"] = comparison.spatial_correlation;
    report["temporal_outlier"] = comparison.temporal_outlier;
    report["spatial_outlier"] = comparison.spatial_outlier;
    nlohmann::json spread;
    spread["min_decay"] = lo;
    spread["min_driver"] = lo_driver;
    spread["max_decay"] = hi;
    spread["max_driver"] = hi_driver;
    spread["sampled_peak_time_s"] = sampled_peak_t;
    spread["sampled_peak_value"] = sampled_peak;
    if (lo > 0.0 && hi > lo) {
      const double peak_t = attenuation_spread_peak_time(lo, hi);
      spread["peak_time_s"] = peak_t;
      spread["peak_value"] = std::abs(temporal_attenuation(peak_t, lo) -
                                      temporal_attenuation(peak_t, hi));
    } else {
      spread["peak_time_s"] = nullptr;
      spread["peak_value"] = nullptr;
    }
    report["spread"] = std::move(spread);
    detail::write_text_file(options.out / "report.json", report.dump(2) + "\n");

    std::string thresholds = "kind,driver";
    for (const double t : options.time_thresholds) {
      thresholds += ",w_time_at_" + format_sig6(t) + "s";
    }
    for (const double d : options.distance_thresholds) {
      thresholds += ",w_dist_at_" + format_sig6(d) + "m";
    }
    thresholds += '\n';
    const auto add_rows = [&](const std::vector<CalibrationResult>& results) {
      for (const CalibrationResult& r : results) {
        thresholds += std::string(to_string(r.kind)) + ',' + r.driver;
        for (const double t : options.time_thresholds) {
          thresholds += ',' + format_sig6(temporal_attenuation(t, r.params.temporal_decay));
        }
        for (const double d : options.distance_thresholds) {
          thresholds += ',' + format_sig6(spatial_attenuation(d, r.params.spatial_decay));
        }
        thresholds += '\n';
      }
    };
    add_rows(objective);
    add_rows(subjective);
    detail::write_text_file(options.out / "thresholds.csv", thresholds);

    nlohmann::json config;
    config["time_thresholds"] = options.time_thresholds;
    config["distance_thresholds"] = options.distance_thresholds;
    std::vector<detail::ManifestInput> inputs;
    for (const CalibrationResult& r : objective) {
      inputs.push_back({"objective/" + r.driver,
                        options.objective_dir / "results" / (r.driver + ".json")});
    }
    for (const CalibrationResult& r : subjective) {
      inputs.push_back({"subjective/" + r.driver,
                        options.subjective_dir / "results" / (r.driver + ".json")});
    }
    for (auto& input : inputs) {
      if (!std::filesystem::exists(input.path)) {
        input.path = input.path.parent_path().parent_path() / input.path.filename();
      }
    }
    detail::write_manifest(options.out / "manifest.json", "report", 0, config, inputs);

    out << "temporal_correlation " << format_sig6(comparison.temporal_correlation) << '\n';
    out << "spatial_correlation " << format_sig6(comparison.spatial_correlation) << '\n';
    out << "wrote " << options.out.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace podar
