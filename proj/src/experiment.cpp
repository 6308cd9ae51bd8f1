#include "softrod/experiment.hpp"

#include "softrod/hybrid.hpp"

#include <array>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace softrod {

std::vector<ControlSchedule> default_training_controls(double dt, int tendon_count) {
  return {sine_controls(6.0, 1.0, 0.5, 30, dt, tendon_count),
          sine_controls(6.0, 1.0, 1.0, 30, dt, tendon_count)};
}

std::vector<NamedControls> default_eval_controls(double dt, int tendon_count, int steps) {
  const std::array<int, 2> stepped{0, 1};
  return {{"sine", sine_controls(6.0, 1.0, 1.5, steps, dt, tendon_count)},
          {"step", step_controls(5.0, 6.5, 1.5, stepped, steps, dt, tendon_count)}};
}

ExperimentConfig default_experiment(Imperfection variant) {
  ExperimentConfig cfg;
  cfg.variant = variant;
  cfg.train_controls = default_training_controls(cfg.truth.dt, cfg.truth.tendon_count());
  cfg.eval_controls = default_eval_controls(cfg.truth.dt, cfg.truth.tendon_count(), cfg.eval_steps);
  cfg.solver.integrator = SpatialIntegrator::Euler;
  cfg.training.epochs = 1500;
  cfg.training.weight_decay = 1e-4;
  return cfg;
}

namespace {

RolloutOptions options_for(const ExperimentConfig& cfg, const MlpModel* model) {
  RolloutOptions opt;
  opt.solver = cfg.solver;
  opt.model = model;
  return opt;
}

std::string tag(const ExperimentConfig& cfg, const std::string& control, std::uint64_t seed) {
  return to_string(cfg.variant) + "/" + control + "/seed " + std::to_string(seed);
}

// Re-raises the active exception with a scenario prefix, keeping its type
// for the numerical failure classes.
[[noreturn]] void rethrow_tagged(const std::string& prefix) {
  try {
    throw;
  } catch (const NoConvergence& e) {
    throw NoConvergence(prefix + ": " + e.what(), e.best_residual, e.step_index);
  } catch (const TrainingDiverged& e) {
    throw TrainingDiverged(prefix + ": " + e.what(), e.epoch);
  } catch (const DivergedIntegration& e) {
    throw DivergedIntegration(prefix + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + ": " + e.what());
  }
}

double percent_change(double before, double after) {
  return before > 0.0 ? 100.0 * (after - before) / before
                      : (after > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

}  // namespace

TrainedKnode train_knode(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainedKnode out;
  out.knowledge = make_imperfect(cfg.truth, cfg.variant);
  std::vector<Trajectory> data;
  for (const ControlSchedule& c : cfg.train_controls)
    data.push_back(rollout(cfg.truth, c, cfg.train_steps, options_for(cfg, nullptr)));

  TrainConfig tc = cfg.training;
  tc.seed = seed;
  const int d_in = feature_dim(tc.input_mode, cfg.truth.tendon_count());
  MlpModel init = MlpModel::initialized(d_in, cfg.hidden, kResidualDim, tc.convexity_clamp, seed,
                                        cfg.output_init_scale);
  out.result = train(std::move(init), make_dataset(data), out.knowledge, tc);
  return out;
}

double ExperimentRow::dtw_change_percent() const {
  return percent_change(baseline.tip_dtw, knode.tip_dtw);
}

double ExperimentRow::mse_change_percent() const {
  return percent_change(baseline.pose_mse, knode.pose_mse);
}

std::vector<ExperimentRow> evaluate_knode(const ExperimentConfig& cfg, const TrainedKnode& trained,
                                          std::uint64_t seed) {
  std::vector<ExperimentRow> rows;
  for (const NamedControls& eval : cfg.eval_controls) {
    try {
      const Trajectory truth = rollout(cfg.truth, eval.controls, cfg.eval_steps, options_for(cfg, nullptr));
      const Trajectory base =
          rollout(trained.knowledge, eval.controls, cfg.eval_steps, options_for(cfg, nullptr));
      const Trajectory hybrid = rollout(trained.knowledge, eval.controls, cfg.eval_steps,
                                        options_for(cfg, &trained.result.model));
      ExperimentRow row;
      row.variant = to_string(cfg.variant);
      row.control = eval.name;
      row.seed = seed;
      row.baseline = compare(truth, base);
      row.knode = compare(truth, hybrid);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      rethrow_tagged(tag(cfg, eval.name, seed));
    }
  }
  return rows;
}

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds) {
  std::vector<ExperimentRow> rows;
  for (std::uint64_t seed : seeds) {
    TrainedKnode trained;
    try {
      trained = train_knode(cfg, seed);
    } catch (const std::exception&) {
      rethrow_tagged(tag(cfg, "train", seed));
    }
    for (ExperimentRow& row : evaluate_knode(cfg, trained, seed)) rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << "variant,control,seed,baseline_dtw,knode_dtw,baseline_mse,knode_mse,percent_change,"
         "mse_percent_change\n";
  out << std::setprecision(10);
  for (const ExperimentRow& r : rows)
    out << r.variant << ',' << r.control << ',' << r.seed << ',' << r.baseline.tip_dtw << ','
        << r.knode.tip_dtw << ',' << r.baseline.pose_mse << ',' << r.knode.pose_mse << ','
        << r.dtw_change_percent() << ',' << r.mse_change_percent() << '\n';
}

}  // namespace softrod
