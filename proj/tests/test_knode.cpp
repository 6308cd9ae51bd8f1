#include "softrod/hybrid.hpp"
#include "softrod/metrics.hpp"
#include "softrod/mlp.hpp"
#include "softrod/shooting.hpp"
#include "softrod/training.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace softrod;

namespace {

RolloutOptions euler_options(const MlpModel* model = nullptr) {
  RolloutOptions opt;
  opt.solver.integrator = SpatialIntegrator::Euler;
  opt.model = model;
  return opt;
}

Dataset sine_dataset(const RodParams& truth, int steps = 30) {
  std::vector<Trajectory> trajs;
  for (double period : {0.5, 1.0})
    trajs.push_back(rollout(truth, sine_controls(6.0, 1.0, period, steps, truth.dt, 4), steps, euler_options()));
  return make_dataset(trajs);
}

MlpModel small_random_model(std::uint64_t seed, int hidden = 16, double output_scale = 1.0) {
  return MlpModel::initialized(29, hidden, kResidualDim, true, seed, output_scale);
}

}  // namespace

TEST_CASE("mlp_forward") {
  MlpModel z = MlpModel::zeros(3, 4, 2, true);
  CHECK(mlp_forward(Eigen::Vector3d(1, -2, 3), z).isZero(0.0));
  z.b2 = Eigen::Vector2d(0.5, -1.5);
  CHECK(mlp_forward(Eigen::Vector3d(7, 8, 9), z) == Eigen::Vector2d(0.5, -1.5));

  MlpModel toy = MlpModel::zeros(1, 1, 1, false);
  toy.W1(0, 0) = 1.0;
  toy.b1[0] = -1.0;
  toy.W2(0, 0) = 2.0;
  const double out = mlp_forward(Eigen::VectorXd::Zero(1), toy)[0];
  CHECK(out == doctest::Approx(2.0 * (std::exp(-1.0) - 1.0)).epsilon(1e-15));
  CHECK(out == doctest::Approx(-1.264241).epsilon(1e-6));
  CHECK_THROWS_AS(mlp_forward(Eigen::VectorXd::Zero(2), toy), std::invalid_argument);
}

TEST_CASE("model initialization and clamping") {
  const MlpModel clamped = MlpModel::initialized(29, 512, 25, true, 3);
  CHECK(clamped.min_weight() >= 0.0);
  CHECK(clamped.W1.maxCoeff() <= 1.0 / std::sqrt(29.0));
  CHECK(clamped.b1.isZero(0.0));
  const MlpModel free = MlpModel::initialized(29, 512, 25, false, 3);
  CHECK(free.min_weight() < 0.0);
  MlpModel m = free;
  m.b1.setConstant(-2.0);
  m.clamp_weights();
  CHECK(m.min_weight() >= 0.0);
  CHECK(m.b1.maxCoeff() == -2.0);
  CHECK(MlpModel::initialized(29, 512, 25, true, 3).W1 == clamped.W1);
  CHECK(MlpModel::initialized(29, 512, 25, true, 4).W1 != clamped.W1);

  const Eigen::VectorXd theta = free.flatten();
  CHECK(theta.size() == static_cast<Eigen::Index>(free.parameter_count()));
  MlpModel back = MlpModel::zeros(29, 512, 25, false);
  back.unflatten(theta);
  CHECK(back.W1 == free.W1);
  CHECK(back.W2 == free.W2);
  CHECK(free.weight_mask().sum() == doctest::Approx(29.0 * 512 + 512.0 * 25));
}

TEST_CASE("checkpoint round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "softrod_ckpt_test.bin").string();
  MlpModel m = small_random_model(9);
  m.b1.setRandom();
  m.b2.setRandom();
  save_checkpoint(m, path);
  {
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header == "KNODE-MLP v1 29 16 25 1");
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    CHECK(bytes == header.size() + 1 + 8 * m.parameter_count());
  }
  const MlpModel r = load_checkpoint(path);
  CHECK(r.W1 == m.W1);
  CHECK(r.W2 == m.W2);
  CHECK(r.b1 == m.b1);
  CHECK(r.b2 == m.b2);
  CHECK(r.convexity_clamp);
  std::ofstream(path) << "not a checkpoint\n";
  CHECK_THROWS(load_checkpoint(path));
  std::remove(path.c_str());
}

TEST_CASE("feature layout") {
  CHECK(feature_dim(InputMode::Simulation, 4) == 29);
  CHECK(feature_dim(InputMode::Full, 4) == 41);
  CHECK(input_mode_for(MlpModel::zeros(41, 8, 25, true), 4) == InputMode::Full);
  CHECK_THROWS_AS(input_mode_for(MlpModel::zeros(30, 8, 25, true), 4), std::invalid_argument);
  std::mt19937_64 rng(11);
  const SectionState s = test::random_state(rng);
  const NodeHistory h = test::random_history(rng);
  const std::vector<double> tau{1, 2, 3, 4};
  const Eigen::VectorXd f = make_features(s, h, tau, InputMode::Full);
  CHECK(f.head<19>() == s.y());
  CHECK(f.segment<6>(19) == s.z());
  CHECK(f.segment<4>(25) == Eigen::Vector4d(1, 2, 3, 4));
  CHECK(f.segment<3>(29) == h.hv);
  CHECK(f.segment<3>(38) == h.hw);
}

TEST_CASE("zero residual leaves the knowledge model untouched") {
  const RodParams P = RodParams::defaults();
  const MlpModel zero = MlpModel::zeros(29, 32, 25, true);
  std::mt19937_64 rng(12);
  const std::vector<double> tau{5, 6, 7, 6};
  for (int i = 0; i < 100; ++i) {
    const SectionState s = test::random_state(rng);
    const NodeHistory h = test::random_history(rng);
    const NodeEvaluation a = hybrid_rhs(s, h, tau, P, 30.0, nullptr);
    const NodeEvaluation b = hybrid_rhs(s, h, tau, P, 30.0, &zero);
    CHECK(a.y_s == b.y_s);
    CHECK(a.z == b.z);
    SectionState k = s;
    const Strains z = constitutive_vu(s.h, s.n, s.m, h.hv, h.hu, P, 30.0);
    k.v = z.v;
    k.u = z.u;
    CHECK(a.y_s == cosserat_rhs(k, h, tau, P, 30.0));
  }
  const ControlSchedule c = sine_controls(6.0, 1.0, 1.5, 20, P.dt, 4);
  RolloutOptions with_zero;
  with_zero.model = &zero;
  const Trajectory a = rollout(P, c, 20, RolloutOptions{});
  const Trajectory b = rollout(P, c, 20, with_zero);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t n = 0; n < a.snapshots[k].nodes.size(); ++n) {
      CHECK(a.snapshots[k].nodes[n].y() == b.snapshots[k].nodes[n].y());
      CHECK(a.snapshots[k].nodes[n].z() == b.snapshots[k].nodes[n].z());
    }
}

TEST_CASE("a bias-only residual restores the missing self weight") {
  const RodParams truth = RodParams::defaults();
  RodParams kn = truth;
  kn.include_self_weight = false;
  MlpModel fix = MlpModel::zeros(29, 8, 25, true);
  fix.b2[9] = -truth.density * truth.area * truth.gravity.z();
  CHECK(fix.min_weight() >= 0.0);
  std::mt19937_64 rng(13);
  const std::vector<double> tau{5, 6, 7, 6};
  for (int i = 0; i < 50; ++i) {
    const SectionState s = test::random_state(rng);
    const NodeHistory h = test::random_history(rng);
    const NodeEvaluation a = hybrid_rhs(s, h, tau, truth, 30.0, nullptr);
    const NodeEvaluation b = hybrid_rhs(s, h, tau, kn, 30.0, &fix);
    CHECK((a.y_s - b.y_s).norm() < 1e-12);
    CHECK(a.z == b.z);
  }
}

TEST_CASE("one-step prediction") {
  const RodParams truth = RodParams::defaults();
  const Dataset data = sine_dataset(truth, 6);
  REQUIRE(data.samples.size() == 12);
  CHECK(data.samples[0].c0 == doctest::Approx(1.0 / truth.dt));
  CHECK(data.samples[1].c0 == doctest::Approx(1.5 / truth.dt));

  SUBCASE("self-consistent data is reproduced") {
    for (const TrainingSample& s : data.samples) {
      const OneStepPrediction p = one_step_predict(s, nullptr, truth);
      for (std::size_t n = 1; n < s.observed.size(); ++n) {
        CHECK((p.y[n] - s.observed[n].y()).norm() < 1e-12);
        CHECK((p.z[n] - s.observed[n].z()).norm() < 1e-12);
      }
    }
  }
  SUBCASE("missing self weight shows up as a constant force error") {
    RodParams kn = truth;
    kn.include_self_weight = false;
    const double expected = truth.density * truth.area * 9.81 * truth.ds();
    for (const TrainingSample& s : data.samples) {
      const OneStepPrediction p = one_step_predict(s, nullptr, kn);
      for (std::size_t n = 1; n < s.observed.size(); ++n) {
        Vec19 err = p.y[n] - s.observed[n].y();
        CHECK(err[9] == doctest::Approx(-expected).epsilon(1e-9));
        err[9] = 0.0;
        CHECK(err.norm() < 1e-12);
      }
    }
  }
  SUBCASE("prediction is affine in the output bias") {
    MlpModel m = small_random_model(14, 16, 0.01);
    MlpModel shifted = m;
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(25);
    delta.head<3>() << 0.1, -0.2, 0.05;
    delta.segment<3>(7) << 0.3, 0.1, -0.4;
    delta.segment<3>(16) << -0.2, 0.2, 0.1;
    shifted.b2 += delta;
    const TrainingSample& s = data.samples[3];
    const OneStepPrediction a = one_step_predict(s, &m, truth);
    const OneStepPrediction b = one_step_predict(s, &shifted, truth);
    for (std::size_t n = 1; n < s.observed.size(); ++n) {
      const Vec19 d = b.y[n] - a.y[n];
      CHECK((d.head<3>() - truth.ds() * delta.head<3>()).norm() < 1e-12);
      CHECK((d.segment<3>(7) - truth.ds() * delta.segment<3>(7)).norm() < 1e-12);
      CHECK((d.segment<3>(16) - truth.ds() * delta.segment<3>(16)).norm() < 1e-12);
    }
  }
}

TEST_CASE("loss") {
  const RodParams truth = RodParams::defaults();
  TrainConfig cfg;

  SUBCASE("data from the hybrid model itself leaves only the regularizer") {
    MlpModel m = small_random_model(15, 16, 0.001);
    const Trajectory traj = rollout(truth, sine_controls(6.0, 1.0, 1.0, 5, truth.dt, 4), 5, euler_options(&m));
    const std::vector<Trajectory> trajs{traj};
    const Dataset data = make_dataset(trajs);
    cfg.weight_decay = 0.01;
    const double reg = 0.01 * (m.W1.squaredNorm() + m.W2.squaredNorm());
    CHECK(loss(m, data, truth, cfg) == doctest::Approx(reg).epsilon(1e-9));
    cfg.weight_decay = 0.0;
    CHECK(loss(m, data, truth, cfg) < 1e-20);
  }
  SUBCASE("single force mismatch at the tip") {
    const Trajectory traj = rollout(truth, constant_controls(6.0, 1, truth.dt, 4), 1, euler_options());
    const std::vector<Trajectory> trajs{traj};
    Dataset data = make_dataset(trajs);
    REQUIRE(data.samples.size() == 1);
    TrainingSample& s = data.samples[0];
    SectionState& tip = s.observed.back();
    tip.n.z() += 1.0;
    const Strains z = constitutive_vu(tip.h, tip.n, tip.m, s.hist.nodes.back().hv, s.hist.nodes.back().hu, truth, s.c0);
    tip.v = z.v;
    tip.u = z.u;
    const MlpModel zero = MlpModel::zeros(29, 8, 25, true);
    CHECK(loss(zero, data, truth, cfg) == doctest::Approx(1.0 / 10.0).epsilon(1e-9));
    cfg.spatial_subset = {10};
    CHECK(loss(zero, data, truth, cfg) == doctest::Approx(1.0).epsilon(1e-9));
    cfg.spatial_subset = {0};
    CHECK_THROWS_AS(loss(zero, data, truth, cfg), std::invalid_argument);
  }
  SUBCASE("empty or mismatched datasets are rejected") {
    const MlpModel zero = MlpModel::zeros(29, 8, 25, true);
    CHECK_THROWS_AS(loss(zero, Dataset{}, truth, cfg), std::invalid_argument);
    RodParams other = truth;
    other.segments = 20;
    CHECK_THROWS_AS(loss(zero, sine_dataset(truth, 2), other, cfg), std::invalid_argument);
  }
}

TEST_CASE("loss gradient") {
  const RodParams truth = RodParams::defaults();
  RodParams kn = truth;
  kn.include_self_weight = false;
  const Dataset data = sine_dataset(truth, 4);
  TrainConfig cfg;

  SUBCASE("zero mismatch gives zero gradient") {
    const MlpModel zero = MlpModel::zeros(29, 16, 25, true);
    const LossGrad lg = loss_and_grad(zero, data, truth, cfg);
    CHECK(lg.loss < 1e-24);
    CHECK(lg.grad.norm() < 1e-12);
  }
  SUBCASE("weight decay alone") {
    MlpModel m = small_random_model(16);
    m.W2.setZero();
    cfg.weight_decay = 0.3;
    const LossGrad lg = loss_and_grad(m, data, truth, cfg);
    const Eigen::VectorXd expected = 2.0 * 0.3 * m.flatten().cwiseProduct(m.weight_mask());
    CHECK((lg.grad - expected).norm() < 1e-12 * expected.norm());
  }
  SUBCASE("central differences on random coordinates") {
    MlpModel m = small_random_model(17, 16, 0.05);
    m.b1.setConstant(-0.1);
    cfg.weight_decay = 0.01;
    const LossGrad lg = loss_and_grad(m, data, kn, cfg);
    const Eigen::VectorXd theta = m.flatten();
    std::mt19937_64 rng(18);
    std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
    for (int i = 0; i < 20; ++i) {
      const Eigen::Index j = pick(rng);
      const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
      MlpModel a = m, b = m;
      Eigen::VectorXd ta = theta, tb = theta;
      ta[j] += h;
      tb[j] -= h;
      a.unflatten(ta);
      b.unflatten(tb);
      const double fd = (loss(a, data, kn, cfg) - loss(b, data, kn, cfg)) / (2.0 * h);
      CHECK(std::abs(fd - lg.grad[j]) <= 1e-4 * std::max(std::abs(fd), 1e-8));
    }
  }
  SUBCASE("batched and node-by-node kernels agree") {
    MlpModel m = small_random_model(19, 32, 0.05);
    cfg.weight_decay = 0.01;
    const LossGrad a = loss_and_grad(m, data, kn, cfg);
    const LossGrad b = loss_and_grad_serial(m, data, kn, cfg);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    CHECK((a.grad - b.grad).norm() <= 1e-10 * b.grad.norm());
    CHECK(a.loss == doctest::Approx(loss(m, data, kn, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("stabilization noise") {
  const Dataset data = sine_dataset(RodParams::defaults(), 3);
  const Dataset a = with_stabilization_noise(data, 0.01, 5);
  const Dataset b = with_stabilization_noise(data, 0.01, 5);
  const Dataset c = with_stabilization_noise(data, 0.01, 6);
  CHECK(a.samples[1].observed[4].y() == b.samples[1].observed[4].y());
  CHECK(a.samples[1].observed[4].y() != c.samples[1].observed[4].y());
  double worst = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k)
    for (std::size_t n = 0; n < a.samples[k].observed.size(); ++n) {
      worst = std::max(worst, std::abs(a.samples[k].observed[n].h.norm() - 1.0));
      diff += (a.samples[k].observed[n].n - data.samples[k].observed[n].n).squaredNorm();
    }
  CHECK(worst < 1e-12);
  CHECK(diff > 0.0);
  const Dataset none = with_stabilization_noise(data, 0.0, 5);
  CHECK(none.samples[2].observed[3].y() == data.samples[2].observed[3].y());
}

TEST_CASE("training mechanics") {
  const RodParams truth = RodParams::defaults();
  RodParams kn = truth;
  kn.include_self_weight = false;
  const Dataset data = sine_dataset(truth);

  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.plateau_patience = 10;
  const TrainResult r = train(MlpModel::initialized(29, 512, 25, true, 0), data, kn, cfg);
  REQUIRE(r.loss_history.size() == 200);
  REQUIRE(r.lr_history.size() == 200);
  CHECK(r.model.min_weight() >= 0.0);
  CHECK(r.loss_history[199] < 0.1 * r.loss_history[0]);
  CHECK(loss(r.model, data, kn, TrainConfig{}) < 0.1 * r.loss_history[0]);
  CHECK(r.best_epoch >= 0);
  CHECK(r.best_epoch < 200);
  for (std::size_t e = 1; e < r.lr_history.size(); ++e) {
    const double ratio = r.lr_history[e] / r.lr_history[e - 1];
    CHECK((ratio == 1.0 || ratio == cfg.plateau_factor));
  }

  cfg.epochs = 3;
  cfg.lr0 = -1.0;
  CHECK_THROWS_AS(train(MlpModel::initialized(29, 64, 25, true, 0), data, kn, cfg), std::invalid_argument);
  cfg.lr0 = 0.01;
  Dataset poisoned = data;
  poisoned.samples[4].observed[6].n.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(MlpModel::initialized(29, 64, 25, true, 0), poisoned, kn, cfg), TrainingDiverged);
}

TEST_CASE("nothing to learn when the knowledge model is exact") {
  const RodParams truth = RodParams::defaults();
  const Dataset data = sine_dataset(truth);
  TrainConfig cfg;
  cfg.epochs = 1500;
  cfg.weight_decay = 1e-4;
  const TrainResult r = train(MlpModel::initialized(29, 512, 25, true, 1), data, truth, cfg);
  CHECK(r.loss_history.back() <= r.loss_history.front());

  const ControlSchedule c = sine_controls(6.0, 1.0, 1.5, 100, truth.dt, 4);
  const Trajectory ref = rollout(truth, c, 100, euler_options());
  const Trajectory hybrid = rollout(truth, c, 100, euler_options(&r.model));
  const auto tips = ref.tip_positions();
  double path = 0.0;
  for (std::size_t k = 1; k < tips.size(); ++k) path += (tips[k] - tips[k - 1]).norm();
  const double baseline = dtw_tip(tips, tips);
  CHECK(baseline == 0.0);
  CHECK(dtw_tip(tips, hybrid.tip_positions()) <= baseline + 0.01 * path);
}
