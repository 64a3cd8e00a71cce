// Command-line front end for the temperature-control toolkit: data
// collection, model fitting, closed-loop runs and benchmark evaluation.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcu/config.hpp"
#include "tcu/errors.hpp"
#include "tcu/harness.hpp"
#include "tcu/linear_id.hpp"
#include "tcu/nnarx.hpp"

namespace {

tcu::Config load_config(const std::string& path, std::optional<int> seed,
                        const std::string& seed_key) {
  tcu::Config cfg = path.empty() ? tcu::Config{} : tcu::Config::from_file(path);
  if (seed) cfg.set(seed_key, std::to_string(*seed));
  return cfg;
}

void print_cost_report(const tcu::CostReport& report) {
  std::cout << "tracking_cost " << report.tracking_cost << "\n"
            << "energy_cost   " << report.energy_cost << "\n"
            << "total_cost    " << report.total_cost << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temperature-control toolkit: surrogate plant, identification, MPC"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, val_path, log_path;
  std::string linear_path, nnarx_path, loss_curve_path, resampled_path, json_path;
  std::string controller = "pi";
  std::optional<int> seed;
  double t0 = 600.0, t_end = 3360.0, lambda = 50.0;
  int horizon = 70, starts = 4;

  auto* collect = app.add_subcommand("collect", "PI-driven identification run");
  collect->add_option("--config", config_path, "configuration file");
  collect->add_option("--seed", seed, "override collect.seed");
  collect->add_option("--out", out_path, "raw 1 s log CSV")->required();
  collect->add_option("--resampled", resampled_path,
                      "controller-clock dataset CSV (default <out>_6s.csv)");

  auto* fit = app.add_subcommand("fit-linear", "fit the two-state linear model");
  fit->add_option("--data", data_path, "resampled dataset CSV")->required();
  fit->add_option("--out", out_path, "model JSON")->required();

  auto* train_cmd = app.add_subcommand("train-nnarx", "train the NNARX model");
  train_cmd->add_option("--config", config_path, "configuration file");
  train_cmd->add_option("--train", data_path, "training dataset CSV")->required();
  train_cmd->add_option("--val", val_path, "validation dataset CSV")->required();
  train_cmd->add_option("--out", out_path, "model JSON")->required();
  train_cmd->add_option("--loss-curve", loss_curve_path, "per-epoch loss CSV");

  auto* run = app.add_subcommand("run", "closed-loop experiment");
  run->add_option("--config", config_path, "configuration file");
  run->add_option("--controller", controller, "pi | lmpc | nnmpc")->required();
  run->add_option("--linear-model", linear_path, "linear model JSON (lmpc)");
  run->add_option("--nnarx-model", nnarx_path, "nnarx model JSON (nnmpc)");
  run->add_option("--seed", seed, "override run.seed");
  run->add_option("--out", out_path, "log CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "stage-cost report for a log");
  evaluate->add_option("--log", log_path, "log CSV")->required();
  evaluate->add_option("--t0", t0, "window start, seconds");
  evaluate->add_option("--t-end", t_end, "window end, seconds");
  evaluate->add_option("--lambda", lambda, "input penalty weight");
  evaluate->add_option("--json", json_path, "also write the report as JSON");

  auto* bench = app.add_subcommand("predict-bench", "open-loop prediction comparison");
  bench->add_option("--linear-model", linear_path, "linear model JSON")->required();
  bench->add_option("--nnarx-model", nnarx_path, "nnarx model JSON")->required();
  bench->add_option("--data", data_path, "held-out dataset CSV")->required();
  bench->add_option("--horizon", horizon, "prediction horizon, steps");
  bench->add_option("--starts", starts, "number of start points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed()) {
      const tcu::Config cfg = load_config(config_path, seed, "collect.seed");
      const tcu::CollectResult result = tcu::collect_identification_data(cfg);
      tcu::save_log_csv(result.raw, out_path);
      std::string rpath = resampled_path;
      if (rpath.empty()) {
        const auto dot = out_path.rfind('.');
        rpath = (dot == std::string::npos ? out_path : out_path.substr(0, dot)) + "_6s.csv";
      }
      tcu::save_dataset_csv(result.resampled, rpath);
      if (result.poorly_excited)
        std::cerr << "warning: single-level reference profile, dataset poorly excited\n";
      std::cout << "collected " << result.raw.records.size() << " records, "
                << result.resampled.y.size() << " resampled samples\n";
    } else if (fit->parsed()) {
      const tcu::IoDataset data = tcu::load_dataset_csv(data_path);
      const tcu::LinearFitReport report = tcu::fit_linear(data);
      tcu::save_linear_model(report.model, out_path);
      std::cout << "a " << report.model.a << "  b_h " << report.model.b_heat << "  b_c "
                << report.model.b_cool << "  innovation_mse " << report.innovation_mse
                << "\n";
    } else if (train_cmd->parsed()) {
      const tcu::Config cfg = load_config(config_path, std::nullopt, "");
      const tcu::IoDataset train_data = tcu::load_dataset_csv(data_path);
      const tcu::IoDataset val_data = tcu::load_dataset_csv(val_path);
      const tcu::NnarxTrainArtifacts art =
          tcu::train_nnarx_from_datasets(cfg, train_data, val_data);
      tcu::save_nnarx_model(art.model, out_path, &art.report, train_data.sample_time_s);
      if (!loss_curve_path.empty()) tcu::save_loss_curve_csv(art.report, loss_curve_path);
      std::cout << "epochs " << art.report.epochs << "  val_mse " << art.report.final_val_mse
                << (art.report.reached_tolerance ? "  (tolerance reached)" : "") << "\n";
    } else if (run->parsed()) {
      const tcu::Config cfg = load_config(config_path, seed, "run.seed");
      const tcu::ControllerKind kind = tcu::controller_kind_from_string(controller);
      std::optional<tcu::LinearModel> lin;
      std::optional<tcu::NnarxModel> nn;
      if (!linear_path.empty()) lin = tcu::load_linear_model(linear_path);
      if (!nnarx_path.empty()) nn = tcu::load_nnarx_model(nnarx_path);
      const tcu::ExperimentLog log = tcu::run_closed_loop(
          cfg, kind, lin ? &*lin : nullptr, nn ? &*nn : nullptr);
      tcu::save_log_csv(log, out_path);
      std::cout << "ran " << log.records.size() << " steps with controller "
                << tcu::to_string(kind) << "\n";
    } else if (evaluate->parsed()) {
      const tcu::ExperimentLog log = tcu::load_log_csv(log_path);
      tcu::StageCostParams params;
      params.lambda = lambda;
      const tcu::CostReport report = tcu::evaluate_costs(log, t0, t_end, params);
      print_cost_report(report);
      if (!json_path.empty()) {
        nlohmann::json j = {{"tracking_cost", report.tracking_cost},
                            {"energy_cost", report.energy_cost},
                            {"total_cost", report.total_cost},
                            {"t0_s", t0},
                            {"t_end_s", t_end},
                            {"lambda", lambda}};
        std::ofstream out(json_path);
        if (!out) throw tcu::IoError("cannot write report: " + json_path);
        out << j.dump(2) << "\n";
      }
    } else if (bench->parsed()) {
      const tcu::LinearModel lin = tcu::load_linear_model(linear_path);
      const tcu::NnarxModel nn = tcu::load_nnarx_model(nnarx_path);
      const tcu::IoDataset data = tcu::load_dataset_csv(data_path);
      const tcu::PredictBenchReport report =
          tcu::predict_benchmark(lin, nn, data, horizon, starts);
      std::cout << "start_idx  linear_rmse  nnarx_rmse\n";
      for (std::size_t i = 0; i < report.start_indices.size(); ++i)
        std::cout << report.start_indices[i] << "  " << report.linear_rmse[i] << "  "
                  << report.nnarx_rmse[i] << "\n";
      std::cout << "mean  " << report.linear_mean_rmse << "  " << report.nnarx_mean_rmse
                << "\n";
    }
  } catch (const tcu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return tcu::exit_code::config;
  } catch (const tcu::InputDomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return tcu::exit_code::input_domain;
  } catch (const tcu::IllConditionedError& e) {
    std::cerr << "ill-conditioned: " << e.what() << "\n";
    return tcu::exit_code::ill_conditioned;
  } catch (const tcu::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return tcu::exit_code::numerical;
  } catch (const tcu::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return tcu::exit_code::io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tcu::exit_code::internal;
  }
  return tcu::exit_code::ok;
}
