#include "softrod/config.hpp"
#include "softrod/experiment.hpp"
#include "softrod/metrics.hpp"
#include "softrod/shooting.hpp"
#include "softrod/state_estimation.hpp"
#include "softrod/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

using namespace softrod;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AppConfig load(const std::string& path, const AppConfig& defaults = {}) {
  return path.empty() ? defaults : load_config(path, defaults);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open for writing: " + path);
  return out;
}

// Row k-1 drives snapshot k; snapshot 0 is the static state under `base`.
std::vector<std::vector<double>> tensions_per_snapshot(const ControlSchedule& c, std::size_t count) {
  if (c.steps() + 1 < static_cast<int>(count))
    throw UsageError("control schedule is shorter than the marker series");
  std::vector<std::vector<double>> tau;
  tau.emplace_back(static_cast<std::size_t>(c.tendon_count), c.base);
  for (std::size_t k = 1; k < count; ++k) {
    const auto row = c.row(static_cast<int>(k) - 1);
    tau.emplace_back(row.begin(), row.end());
  }
  return tau;
}

struct SimulateArgs {
  std::string config, out, model;
  std::uint64_t seed = 0;
  std::optional<int> steps;
};

int cmd_simulate(const SimulateArgs& a) {
  const AppConfig cfg = load(a.config);
  const ControlSchedule controls = cfg.controls.build(cfg.rod.dt, cfg.rod.tendon_count(), a.seed);
  const int steps = a.steps.value_or(cfg.controls.steps);
  std::optional<MlpModel> model;
  RolloutOptions opt = cfg.rollout_options();
  if (!a.model.empty()) {
    model = load_checkpoint(a.model);
    opt.model = &*model;
  }
  const Trajectory traj = rollout(cfg.rod, controls, steps, opt);
  write_trajectory_csv(traj, a.out);
  return 0;
}

struct TrainArgs {
  std::string config, out, loss_out;
  std::vector<std::string> data;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  const AppConfig cfg = load(a.config);
  std::vector<Trajectory> trajs;
  for (const std::string& path : a.data) trajs.push_back(read_trajectory_csv(path));
  const RodParams knowledge = make_imperfect(cfg.rod, cfg.variant);
  TrainConfig tc = cfg.training;
  tc.seed = a.seed;
  const int d_in = feature_dim(tc.input_mode, knowledge.tendon_count());
  const TrainResult r =
      train(MlpModel::initialized(d_in, cfg.hidden, kResidualDim, tc.convexity_clamp, a.seed,
                                  cfg.output_init_scale),
            make_dataset(trajs, cfg.bdf_order), knowledge, tc);
  save_checkpoint(r.model, a.out);
  std::ofstream curve = open_out(a.loss_out.empty() ? a.out + ".loss.csv" : a.loss_out);
  curve << "epoch,loss,lr\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t e = 0; e < r.loss_history.size(); ++e)
    curve << e + 1 << ',' << r.loss_history[e] << ',' << r.lr_history[e] << '\n';
  std::cout << "loss " << r.loss_history.front() << " -> " << r.loss_history.back()
            << " (kept epoch " << r.best_epoch + 1 << ")\n";
  return 0;
}

struct EvaluateArgs {
  std::string truth, candidate, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const MetricReport r = compare(read_trajectory_csv(a.truth), read_trajectory_csv(a.candidate));
  std::ostringstream text;
  text << std::setprecision(std::numeric_limits<double>::max_digits10);
  text << "tip_dtw,pose_mse\n" << r.tip_dtw << ',' << r.pose_mse << '\n';
  if (a.out.empty()) {
    std::cout << text.str();
  } else {
    open_out(a.out) << text.str();
  }
  return 0;
}

struct EstimateArgs {
  std::string markers, config, out;
  std::uint64_t seed = 0;
};

int cmd_estimate_state(const EstimateArgs& a) {
  const AppConfig cfg = load(a.config);
  const MarkerSeries series = read_markers_csv(a.markers);
  const ControlSchedule controls = cfg.controls.build(cfg.rod.dt, cfg.rod.tendon_count(), a.seed);
  const Trajectory traj = estimate_state(series, cfg.rod,
                                         tensions_per_snapshot(controls, series.time_count()),
                                         cfg.bdf_order);
  write_trajectory_csv(traj, a.out);
  return 0;
}

struct SampleArgs {
  std::string trajectory, config, out;
  std::vector<int> nodes{0, 2, 5, 8, 10};
};

int cmd_sample_markers(const SampleArgs& a) {
  const AppConfig cfg = load(a.config);
  const Trajectory traj = read_trajectory_csv(a.trajectory);
  if (traj.node_count() != cfg.rod.node_count())
    throw UsageError("trajectory node count does not match the configured rod");
  write_markers_csv(sample_markers(traj, a.nodes, cfg.rod.ds()), a.out);
  return 0;
}

struct ExperimentArgs {
  std::string config, out;
  std::vector<std::uint64_t> seeds;
};

int cmd_experiment(const ExperimentArgs& a) {
  const AppConfig cfg = load(a.config, AppConfig::for_experiments());
  const auto rows = run_experiment(cfg.experiment(), a.seeds.empty() ? cfg.seeds : a.seeds);
  if (a.out.empty()) {
    write_report_csv(rows, std::cout);
  } else {
    std::ofstream out = open_out(a.out);
    write_report_csv(rows, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tendon-driven rod simulation and hybrid model training"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Roll out the rod under the configured controls");
  simulate->add_option("-c,--config", sim.config, "INI configuration")->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", sim.out, "Trajectory CSV")->required();
  simulate->add_option("--seed", sim.seed, "Seed for random controls");
  simulate->add_option("--steps", sim.steps, "Override the number of time steps");
  simulate->add_option("--model", sim.model, "Residual network checkpoint")->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit the residual network to trajectories");
  train_cmd->add_option("-c,--config", tr.config, "INI configuration")->check(CLI::ExistingFile);
  train_cmd->add_option("-d,--data", tr.data, "Trajectory CSV files")->required();
  train_cmd->add_option("-o,--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--loss-out", tr.loss_out, "Loss curve CSV (default <out>.loss.csv)");
  train_cmd->add_option("--seed", tr.seed, "Initialization and noise seed");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Tip DTW and pose MSE between two trajectories");
  evaluate->add_option("--truth", ev.truth, "Reference trajectory CSV")->required();
  evaluate->add_option("--candidate", ev.candidate, "Compared trajectory CSV")->required();
  evaluate->add_option("-o,--out", ev.out, "Metric CSV (default stdout)");

  EstimateArgs es;
  auto* estimate = app.add_subcommand("estimate-state", "Reconstruct the full rod state from markers");
  estimate->add_option("-m,--markers", es.markers, "Marker CSV")->required();
  estimate->add_option("-c,--config", es.config, "INI configuration")->check(CLI::ExistingFile);
  estimate->add_option("-o,--out", es.out, "Trajectory CSV")->required();
  estimate->add_option("--seed", es.seed, "Seed for random controls");

  SampleArgs sm;
  auto* sample = app.add_subcommand("sample-markers", "Extract marker poses from a trajectory");
  sample->add_option("-t,--trajectory", sm.trajectory, "Trajectory CSV")->required();
  sample->add_option("-c,--config", sm.config, "INI configuration (rod geometry)")->check(CLI::ExistingFile);
  sample->add_option("-o,--out", sm.out, "Marker CSV")->required();
  sample->add_option("--nodes", sm.nodes, "Node indices to track");

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Train and evaluate one imperfection variant");
  experiment->add_option("-c,--config", ex.config, "INI configuration")->check(CLI::ExistingFile);
  experiment->add_option("-o,--out", ex.out, "Report CSV (default stdout)");
  experiment->add_option("--seeds", ex.seeds, "Seeds (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*train_cmd) return cmd_train(tr);
    if (*evaluate) return cmd_evaluate(ev);
    if (*estimate) return cmd_estimate_state(es);
    if (*sample) return cmd_sample_markers(sm);
    if (*experiment) return cmd_experiment(ex);
  } catch (const NoConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DivergedIntegration& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << " (epoch " << e.epoch << ")\n";
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
