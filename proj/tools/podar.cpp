#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "podar/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PODAR driving-risk evaluation and per-driver calibration"};
  app.set_version_flag("--version", podar::kToolVersion);
  app.require_subcommand(1);

  podar::CalibrateOptions calibrate_options;
  std::string kind = "objective";
  auto* calibrate = app.add_subcommand(
      "calibrate", "Fit per-driver model parameters from an experiment signal file");
  calibrate->add_option("--signals", calibrate_options.signals, "signal CSV (driver,obstacle,signal)")
      ->required();
  calibrate->add_option("--grid", calibrate_options.grid, "grid config file (key = value)");
  calibrate->add_option("--kind", kind, "signal kind: objective|subjective")
      ->check(CLI::IsMember({"objective", "subjective"}));
  calibrate->add_option("--out", calibrate_options.out, "output directory")
      ->envname("PODAR_OUT");
  calibrate->add_option("--lr", calibrate_options.config.learning_rate, "learning rate");
  calibrate->add_option("--iters", calibrate_options.config.iterations, "iteration count");
  calibrate->add_option("--horizons", calibrate_options.config.horizon_candidates,
                        "candidate horizons, seconds (comma separated)")
      ->delimiter(',');
  calibrate->add_option("--seed", calibrate_options.config.seed, "run seed (recorded)");
  calibrate->add_option("--workers", calibrate_options.workers, "parallel calibration jobs");
  calibrate->add_option("--dt", calibrate_options.config.dt, "prediction timestep, seconds");
  calibrate->add_option("--param-tol", calibrate_options.config.param_tol,
                        "early stop once parameters move less than this for a full window");
  calibrate->add_option("--param-tol-window", calibrate_options.config.param_tol_window,
                        "early stop window, iterations");
  calibrate->add_option("--trace-stride", calibrate_options.config.trace_stride,
                        "loss trace subsampling stride");

  podar::EvaluateOptions evaluate_options;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate the risk of one scene");
  evaluate->add_option("--scene", evaluate_options.scene, "scene JSON")->required();
  evaluate->add_option("--params", evaluate_options.params, "model parameter JSON")->required();
  evaluate->add_option("--out", evaluate_options.out, "output directory")->envname("PODAR_OUT");

  podar::SynthOptions synth_options;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic signal file");
  synth->add_option("--spec", synth_options.spec, "ground-truth spec JSON")->required();
  synth->add_option("--grid", synth_options.grid, "grid config file");
  synth->add_option("--out", synth_options.out, "output directory")->envname("PODAR_OUT");
  synth->add_option("--driver", synth_options.driver, "driver id for the generated rows");

  podar::ReportOptions report_options;
  auto* report = app.add_subcommand(
      "report", "Compare objective and subjective calibration results");
  report->add_option("--objective", report_options.objective_dir, "objective results directory")
      ->required();
  report->add_option("--subjective", report_options.subjective_dir, "subjective results directory")
      ->required();
  report->add_option("--out", report_options.out, "output directory")->envname("PODAR_OUT");
  report->add_option("--time-thresholds", report_options.time_thresholds,
                     "temporal attenuation sample times, seconds")
      ->delimiter(',');
  report->add_option("--distance-thresholds", report_options.distance_thresholds,
                     "spatial attenuation sample gaps, meters")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (*calibrate) {
    calibrate_options.kind =
        kind == "subjective" ? podar::SignalKind::kSubjective : podar::SignalKind::kObjective;
    return podar::cmd_calibrate(calibrate_options, std::cout, std::cerr);
  }
  if (*evaluate) {
    return podar::cmd_evaluate(evaluate_options, std::cout, std::cerr);
  }
  if (*synth) {
    return podar::cmd_synth(synth_options, std::cout, std::cerr);
  }
  return podar::cmd_report(report_options, std::cout, std::cerr);
}
