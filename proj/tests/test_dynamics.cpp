#include <gtest/gtest.h>

#include <cmath>

#include "mfld/checks.hpp"
#include "test_support.hpp"

using namespace mfld;
using mfld::testing::test_stream;

namespace {

const NeuronModel kAffine1{NeuronKind::tanh_affine, 1, 1.0};

TEST(IntrinsicGradient, PureRegularizerWithoutData) {
  ParticleEnsemble e(1, 2);
  e.particle(0)[0] = 1.0;
  const Matrix g = intrinsic_gradient(e, kAffine1, LossModel{}, Dataset::empty(1), 0.5);
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(0, 1), 0.0);
}

TEST(IntrinsicGradient, PerfectFitLeavesRegularizer) {
  ParticleEnsemble e(2, 2);
  e.particle(0)[1] = 0.3;
  e.particle(1)[1] = 0.3;
  Matrix x(2, 1);
  x(0, 0) = 1.0;
  x(1, 0) = -1.0;
  const double t = std::tanh(0.3);
  const Dataset data(x, {t, t});
  const Matrix g = intrinsic_gradient(e, kAffine1, LossModel{}, data, 0.2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(g(r, j), 0.4 * e.particle(r)[j]);
}

TEST(IntrinsicGradient, MatchesDoubleLoop) {
  Stream s = test_stream(21);
  for (int trial = 0; trial < 20; ++trial) {
    const NeuronModel m{NeuronKind::tanh_affine, 2, 1.0};
    auto e = mfld::testing::random_ensemble(2, 3, s);
    const Dataset data = mfld::testing::random_dataset(2, 2, s);
    std::vector<std::vector<double>> theta, x;
    for (std::size_t r = 0; r < 2; ++r) theta.emplace_back(e.particle(r).begin(), e.particle(r).end());
    for (std::size_t i = 0; i < 2; ++i) x.emplace_back(data.x(i).begin(), data.x(i).end());
    const auto ref = checks::reference::intrinsic_gradient_double_loop(theta, x, data.targets, 0.01);
    const Matrix g = intrinsic_gradient(e, m, LossModel{}, data, 0.01);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(g(r, j), ref[r][j], 1e-12);
  }
}

TEST(IntrinsicGradient, FiniteDifferenceOfRegularizerWithoutData) {
  Stream s = test_stream(22);
  auto e = mfld::testing::random_ensemble(3, 2, s);
  const double lp = 0.3;
  const Matrix g = intrinsic_gradient(e, kAffine1, LossModel{}, Dataset::empty(1), lp);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> tp(e.particle(r).begin(), e.particle(r).end()), tm = tp;
      tp[j] += 1e-6;
      tm[j] -= 1e-6;
      const double fd = lp * (squared_norm(tp) - squared_norm(tm)) / 2e-6;
      EXPECT_NEAR(g(r, j), fd, 1e-8);
    }
  }
}

TEST(IntrinsicGradient, DimensionMismatch) {
  ParticleEnsemble e(1, 3);
  EXPECT_THROW(intrinsic_gradient(e, kAffine1, LossModel{}, Dataset::empty(1), 0.1), Error);
  ParticleEnsemble ok(1, 2);
  Stream s = test_stream(23);
  EXPECT_THROW(intrinsic_gradient(ok, kAffine1, LossModel{}, mfld::testing::random_dataset(2, 3, s), 0.1), Error);
}

TEST(NoisyStep, NoNoiseNoGradientIsIdentity) {
  Stream s = test_stream(24);
  auto e = mfld::testing::random_ensemble(4, 2, s);
  const HyperParams hp{0.0, 0.01, 0.1, 1};
  EXPECT_EQ(noisy_gd_step(e, Matrix(4, 2), hp, RngSpec{1}, 0), e);
}

TEST(NoisyStep, GeometricContraction) {
  Stream s = test_stream(25);
  ParticleEnsemble e = mfld::testing::random_ensemble(3, 2, s);
  const ParticleEnsemble e0 = e;
  const HyperParams hp{0.0, 0.2, 0.5, 0};
  const double a = 1.0 - 2.0 * 0.2 * 0.5;
  for (int k = 0; k < 5; ++k)
    e = noisy_gd_step(e, intrinsic_gradient(e, kAffine1, LossModel{}, Dataset::empty(1), 0.2), hp, RngSpec{1}, k);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(e.particle(r)[j], std::pow(a, 5) * e0.particle(r)[j], 1e-15);
}

TEST(NoisyStep, DivergenceIsReported) {
  ParticleEnsemble e(1, 1);
  Matrix g(1, 1);
  g(0, 0) = -1e12;
  try {
    noisy_gd_step(e, g, HyperParams{0.01, 0.01, 0.01, 1}, RngSpec{1}, 0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::diverged);
  }
  g(0, 0) = std::nan("");
  EXPECT_THROW(noisy_gd_step(e, g, HyperParams{0.01, 0.01, 0.01, 1}, RngSpec{1}, 0), Error);
}

TEST(NoisyStep, RejectsLargeStepWithStrongRegularizer) {
  ParticleEnsemble e(1, 1);
  try {
    noisy_gd_step(e, Matrix(1, 1), HyperParams{0.01, 1.0, 0.5, 1}, RngSpec{1}, 0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::hypothesis_violated);
  }
}

TEST(HyperParams, Validation) {
  EXPECT_NO_THROW((HyperParams{0.01, 0.01, 0.01, 10}.validate()));
  EXPECT_THROW((HyperParams{0.0, 0.01, 0.01, 10}.validate()), Error);
  EXPECT_THROW((HyperParams{0.01, 0.01, -1.0, 10}.validate()), Error);
  EXPECT_THROW((HyperParams{0.01, 0.01, 0.01, -1}.validate()), Error);
  EXPECT_THROW((HyperParams{0.01, 1.0, 0.5, 10}.validate()), Error);
}

TEST(Initialize, ZeroStd) {
  const auto e = initialize_ensemble(5, 3, 0.0, RngSpec{3});
  for (double v : e.params().flat()) {
    EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(std::signbit(v));
  }
}

TEST(Initialize, VarianceAndDeterminism) {
  const auto e = initialize_ensemble(10000, 2, 1.0, RngSpec{4});
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < e.size(); ++r) {
      s += e.particle(r)[j];
      s2 += e.particle(r)[j] * e.particle(r)[j];
    }
    const double mean = s / 1e4;
    EXPECT_NEAR(s2 / 1e4 - mean * mean, 1.0, 0.05);
  }
  EXPECT_EQ(e, initialize_ensemble(10000, 2, 1.0, RngSpec{4}));
  EXPECT_FALSE(e == initialize_ensemble(10000, 2, 1.0, RngSpec{5}));
}

TEST(Initialize, Errors) {
  EXPECT_THROW(initialize_ensemble(0, 2, 1.0, RngSpec{}), Error);
  EXPECT_THROW(initialize_ensemble(2, 2, -1.0, RngSpec{}), Error);
}

struct Instance {
  NeuronModel model{NeuronKind::tanh_affine, 2, 1.0};
  LossModel loss{};
  Dataset data;
  ParticleEnsemble init;
  HyperParams hp{0.01, 0.01, 0.05, 3};
};

Instance make_instance() {
  Stream s = test_stream(26);
  Instance in;
  in.data = mfld::testing::random_dataset(10, 2, s);
  in.init = initialize_ensemble(8, 3, 0.5, RngSpec{9});
  return in;
}

TEST(RunDynamics, ZeroStepsReturnsInput) {
  Instance in = make_instance();
  in.hp.steps = 0;
  int calls = 0;
  const auto out = run_dynamics(in.init, in.model, in.loss, in.data, in.hp, RngSpec{1}, LogSchedule{1, {}},
                                [&](std::int64_t, const ParticleEnsemble&) { ++calls; });
  EXPECT_EQ(out, in.init);
  EXPECT_EQ(calls, 0);
}

TEST(RunDynamics, EqualsManualUnroll) {
  const Instance in = make_instance();
  const RngSpec rng{31};
  ParticleEnsemble manual = in.init;
  for (std::int64_t k = 0; k < 3; ++k)
    manual = noisy_gd_step(manual, intrinsic_gradient(manual, in.model, in.loss, in.data, in.hp.lambda_prime), in.hp,
                           rng, k);
  EXPECT_EQ(run_dynamics(in.init, in.model, in.loss, in.data, in.hp, rng), manual);
}

TEST(RunDynamics, BitIdenticalReruns) {
  Instance in = make_instance();
  in.hp.steps = 50;
  const auto a = run_dynamics(in.init, in.model, in.loss, in.data, in.hp, RngSpec{44});
  const auto b = run_dynamics(in.init, in.model, in.loss, in.data, in.hp, RngSpec{44});
  EXPECT_EQ(a, b);
}

TEST(RunDynamics, HookScheduleInOrder) {
  Instance in = make_instance();
  in.hp.steps = 10;
  std::vector<std::int64_t> seen;
  run_dynamics(in.init, in.model, in.loss, in.data, in.hp, RngSpec{1}, LogSchedule{4, {1, 7}},
               [&](std::int64_t k, const ParticleEnsemble&) { seen.push_back(k); });
  EXPECT_EQ(seen, (std::vector<std::int64_t>{1, 4, 7, 8}));
}

TEST(RunDynamics, HookErrorPropagates) {
  Instance in = make_instance();
  in.hp.steps = 5;
  int calls = 0;
  EXPECT_THROW(run_dynamics(in.init, in.model, in.loss, in.data, in.hp, RngSpec{1}, LogSchedule{1, {}},
                            [&](std::int64_t k, const ParticleEnsemble&) {
                              ++calls;
                              if (k == 2) throw std::runtime_error("injected");
                            }),
               std::runtime_error);
  EXPECT_EQ(calls, 2);
}

TEST(RunDynamics, MomentBoundIsPreserved) {
  Stream s = test_stream(27);
  const NeuronModel m{NeuronKind::tanh_affine, 3, 1.0};
  const LossModel loss{};
  Dataset data = mfld::testing::random_dataset(40, 3, s);
  const auto c = model_constants(m, loss, data);
  const HyperParams hp{0.05, 0.05, 0.05, 400};
  const double bound = moment_bound(hp.eta, hp.lambda, hp.lambda_prime, c.C1, c.C3, m.param_dim());
  const auto init = initialize_ensemble(50, 4, 1.0, RngSpec{2});
  ASSERT_TRUE(moment_ok(init, bound));
  bool all_ok = true;
  run_dynamics(init, m, loss, data, hp, RngSpec{3}, LogSchedule{10, {}},
               [&](std::int64_t, const ParticleEnsemble& e) { all_ok = all_ok && moment_ok(e, bound); });
  EXPECT_TRUE(all_ok);
}

// Many independent particles make the stationary variance well determined.
TEST(RunDynamics, StationaryVarianceOfThePureRegularizer) {
  const NeuronModel m{NeuronKind::tanh_linear, 1, 1.0};
  const HyperParams hp{0.01, 0.01, 0.01, 2000};
  const double a = 1.0 - 2.0 * hp.lambda_prime * hp.eta;
  const double v = 2.0 * hp.lambda * hp.eta / (1.0 - a * a);
  EXPECT_NEAR(v, 0.50005, 1e-5);
  const auto init = initialize_ensemble(20000, 1, std::sqrt(v), RngSpec{5});
  double acc = 0.0;
  std::int64_t n = 0;
  run_dynamics(init, m, LossModel{}, Dataset::empty(1), hp, RngSpec{6}, LogSchedule{200, {}},
               [&](std::int64_t, const ParticleEnsemble& e) {
                 acc += e.second_moment();
                 ++n;
               });
  EXPECT_NEAR(acc / static_cast<double>(n) / v, 1.0, 0.03);
}

}  // namespace
