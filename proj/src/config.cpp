#include "softrod/config.hpp"

#include "softrod/hybrid.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace softrod {

namespace pt = boost::property_tree;

ControlSchedule ControlSpec::build(double dt, int tendon_count, std::uint64_t seed) const {
  switch (kind) {
    case ControlKind::Sine: return sine_controls(base, amplitude, period, steps, dt, tendon_count);
    case ControlKind::Step:
      return step_controls(base, stepped, t_step, stepped_tendons, steps, dt, tendon_count);
    case ControlKind::Random: return random_controls(lo, hi, seed, steps, dt, tendon_count);
    case ControlKind::Constant: return constant_controls(base, steps, dt, tendon_count);
  }
  throw std::invalid_argument("controls: unknown kind");
}

RolloutOptions AppConfig::rollout_options() const {
  RolloutOptions opt;
  opt.solver = solver;
  opt.bdf_order = bdf_order;
  return opt;
}

ExperimentConfig AppConfig::experiment() const {
  ExperimentConfig cfg = default_experiment(variant);
  cfg.truth = rod;
  cfg.solver = solver;
  cfg.training = training;
  cfg.hidden = hidden;
  cfg.output_init_scale = output_init_scale;
  cfg.eval_steps = eval_steps;
  cfg.train_controls = default_training_controls(rod.dt, rod.tendon_count());
  cfg.eval_controls = default_eval_controls(rod.dt, rod.tendon_count(), eval_steps);
  return cfg;
}

namespace {

template <class T>
T get(const pt::ptree& tree, const std::string& key, const T& fallback) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
  if (!node) return fallback;
  try {
    return node->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + node->data() + "'");
  }
}

template <class T>
std::vector<T> get_list(const pt::ptree& tree, const std::string& key, const std::vector<T>& fallback) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
  if (!node) return fallback;
  std::istringstream in(node->data());
  std::vector<T> out;
  T value;
  while (in >> value) out.push_back(value);
  if (!in.eof()) throw std::invalid_argument("config: bad list for " + key + ": '" + node->data() + "'");
  return out;
}

ControlKind parse_kind(const std::string& name) {
  if (name == "sine") return ControlKind::Sine;
  if (name == "step") return ControlKind::Step;
  if (name == "random") return ControlKind::Random;
  if (name == "constant") return ControlKind::Constant;
  throw std::invalid_argument("config: unknown controls.kind '" + name + "'");
}

SpatialIntegrator parse_integrator(const std::string& name) {
  if (name == "rk4") return SpatialIntegrator::Rk4;
  if (name == "euler") return SpatialIntegrator::Euler;
  throw std::invalid_argument("config: unknown solver.integrator '" + name + "'");
}

InputMode parse_input_mode(const std::string& name) {
  if (name == "simulation") return InputMode::Simulation;
  if (name == "full") return InputMode::Full;
  throw std::invalid_argument("config: unknown training.input_mode '" + name + "'");
}

void check_known_keys(const pt::ptree& tree) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> known{
      {"rod",
       {"length", "radius", "density", "youngs_modulus", "poisson_ratio", "tendon_offset",
        "routing_slope", "self_weight", "segments", "dt", "bending_damping", "shear_damping",
        "drag"}},
      {"controls",
       {"kind", "steps", "base", "amplitude", "period", "stepped", "t_step", "stepped_tendons",
        "lo", "hi"}},
      {"solver", {"integrator", "residual_tol", "max_iters", "fd_epsilon", "bdf_order"}},
      {"training",
       {"epochs", "lr", "weight_decay", "patience", "factor", "noise_sigma", "clamp",
        "standardize_inputs", "keep_best", "input_mode", "hidden", "output_init_scale"}},
      {"experiment", {"variant", "seeds", "eval_steps"}}};
  for (const auto& [section, body] : tree) {
    const auto it = std::find_if(known.begin(), known.end(),
                                 [&](const auto& entry) { return entry.first == section; });
    if (it == known.end()) throw std::invalid_argument("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw std::invalid_argument("config: unknown key " + section + "." + key);
  }
}

}  // namespace

AppConfig AppConfig::for_experiments() {
  AppConfig c;
  const ExperimentConfig e = default_experiment(c.variant);
  c.solver = e.solver;
  c.training = e.training;
  return c;
}

AppConfig parse_config(std::istream& in, const AppConfig& defaults) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  check_known_keys(tree);

  AppConfig c = defaults;
  RodParams& r = c.rod;
  r.length = get(tree, "rod.length", r.length);
  r.radius = get(tree, "rod.radius", r.radius);
  r.density = get(tree, "rod.density", r.density);
  r.youngs_modulus = get(tree, "rod.youngs_modulus", r.youngs_modulus);
  r.poisson_ratio = get(tree, "rod.poisson_ratio", r.poisson_ratio);
  r.tendon_offset = get(tree, "rod.tendon_offset", r.tendon_offset);
  r.routing_slope = get(tree, "rod.routing_slope", r.routing_slope);
  r.include_self_weight = get(tree, "rod.self_weight", r.include_self_weight);
  r.segments = get(tree, "rod.segments", r.segments);
  r.dt = get(tree, "rod.dt", r.dt);
  r.Bbt = get(tree, "rod.bending_damping", r.Bbt(0, 0)) * Mat3::Identity();
  r.Bse = get(tree, "rod.shear_damping", r.Bse(0, 0)) * Mat3::Identity();
  r.drag = get(tree, "rod.drag", r.drag(0, 0)) * Mat3::Identity();
  r.derive();
  r.validate();

  ControlSpec& k = c.controls;
  k.kind = parse_kind(get<std::string>(tree, "controls.kind", to_string(k.kind)));
  k.steps = get(tree, "controls.steps", k.steps);
  k.base = get(tree, "controls.base", k.base);
  k.amplitude = get(tree, "controls.amplitude", k.amplitude);
  k.period = get(tree, "controls.period", k.period);
  k.stepped = get(tree, "controls.stepped", k.stepped);
  k.t_step = get(tree, "controls.t_step", k.t_step);
  k.stepped_tendons = get_list(tree, "controls.stepped_tendons", k.stepped_tendons);
  k.lo = get(tree, "controls.lo", k.lo);
  k.hi = get(tree, "controls.hi", k.hi);
  if (k.steps < 0) throw std::invalid_argument("config: controls.steps must be non-negative");

  SolverConfig& s = c.solver;
  s.integrator = parse_integrator(get<std::string>(tree, "solver.integrator", s.integrator == SpatialIntegrator::Rk4 ? "rk4" : "euler"));
  s.residual_tol = get(tree, "solver.residual_tol", s.residual_tol);
  s.max_iters = get(tree, "solver.max_iters", s.max_iters);
  s.fd_epsilon = get(tree, "solver.fd_epsilon", s.fd_epsilon);
  c.bdf_order = get(tree, "solver.bdf_order", c.bdf_order);
  s.validate();
  if (c.bdf_order < 1 || c.bdf_order > 2)
    throw std::invalid_argument("config: solver.bdf_order must be 1 or 2");

  TrainConfig& t = c.training;
  t.epochs = get(tree, "training.epochs", t.epochs);
  t.lr0 = get(tree, "training.lr", t.lr0);
  t.weight_decay = get(tree, "training.weight_decay", t.weight_decay);
  t.plateau_patience = get(tree, "training.patience", t.plateau_patience);
  t.plateau_factor = get(tree, "training.factor", t.plateau_factor);
  t.noise_sigma = get(tree, "training.noise_sigma", t.noise_sigma);
  t.convexity_clamp = get(tree, "training.clamp", t.convexity_clamp);
  t.standardize_inputs = get(tree, "training.standardize_inputs", t.standardize_inputs);
  t.keep_best = get(tree, "training.keep_best", t.keep_best);
  t.input_mode = parse_input_mode(get<std::string>(tree, "training.input_mode", t.input_mode == InputMode::Full ? "full" : "simulation"));
  c.hidden = get(tree, "training.hidden", c.hidden);
  c.output_init_scale = get(tree, "training.output_init_scale", c.output_init_scale);
  t.validate();
  if (c.hidden < 1) throw std::invalid_argument("config: training.hidden must be positive");

  c.variant = parse_imperfection(get<std::string>(tree, "experiment.variant", to_string(c.variant)));
  c.seeds = get_list(tree, "experiment.seeds", c.seeds);
  c.eval_steps = get(tree, "experiment.eval_steps", c.eval_steps);
  if (c.seeds.empty()) throw std::invalid_argument("config: experiment.seeds is empty");
  return c;
}

AppConfig load_config(const std::string& path, const AppConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  return parse_config(in, defaults);
}

}  // namespace softrod
