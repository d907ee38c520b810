#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"

using namespace mfld;
using mfld::testing::gaussian_samples;
using mfld::testing::test_stream;

namespace {

const NeuronModel kAffine1{NeuronKind::tanh_affine, 1, 1.0};

double gaussian_entropy(double d, double var) { return 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e * var); }

TEST(Digamma, IntegerValues) {
  EXPECT_NEAR(digamma_int(1), -0.5772156649015329, 1e-15);
  EXPECT_NEAR(digamma_int(10), 2.251752589066721, 1e-14);
  EXPECT_NEAR(digamma_int(20000), std::log(20000.0) - 1.0 / 40000.0 - 1.0 / (12.0 * 4e8), 1e-13);
  double h = -0.5772156649015329;
  for (int k = 1; k < 40; ++k) h += 1.0 / k;
  EXPECT_NEAR(digamma_int(40), h, 1e-13);
}

TEST(UnitBall, Volumes) {
  EXPECT_NEAR(std::exp(log_unit_ball_volume(1)), 2.0, 1e-14);
  EXPECT_NEAR(std::exp(log_unit_ball_volume(2)), std::numbers::pi, 1e-14);
  EXPECT_NEAR(std::exp(log_unit_ball_volume(3)), 4.0 * std::numbers::pi / 3.0, 1e-14);
}

TEST(Knn, NeighborDistancesMatchBruteForce) {
  const Matrix x = gaussian_samples(60, 3, 51);
  const auto d2 = detail::kth_neighbor_sq_distances(x, 4);
  for (std::size_t i = 0; i < 60; ++i) {
    std::vector<double> all;
    for (std::size_t j = 0; j < 60; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      all.push_back(s);
    }
    std::sort(all.begin(), all.end());
    EXPECT_EQ(d2[i], all[3]);
  }
}

TEST(Knn, StandardGaussianFiveDimensions) {
  const auto h = knn_entropy(gaussian_samples(20000, 5, 52), 10);
  EXPECT_NEAR(h.value / 7.0947, 1.0, 0.02);
  EXPECT_GT(h.standard_error, 0.0);
  EXPECT_FALSE(h.jittered);
}

TEST(Knn, UniformSquare) {
  Matrix x(20000, 2);
  Stream s = test_stream(53);
  for (double& v : x.flat()) v = s.uniform();
  EXPECT_NEAR(knn_entropy(x, 10).value, 0.0, 0.05);
}

TEST(Knn, ScaleLaw) {
  const Matrix x = gaussian_samples(500, 3, 54);
  Matrix y = x;
  for (double& v : y.flat()) v *= 2.0;
  EXPECT_NEAR(knn_entropy(y, 5).value - knn_entropy(x, 5).value, 3.0 * std::log(2.0), 1e-12);
}

TEST(Knn, RotationAndShiftInvariance) {
  const Matrix x = gaussian_samples(400, 2, 55);
  const double c = std::cos(0.7), s = std::sin(0.7);
  Matrix y(400, 2);
  for (std::size_t r = 0; r < 400; ++r) {
    y(r, 0) = c * x(r, 0) - s * x(r, 1) + 0.25;
    y(r, 1) = s * x(r, 0) + c * x(r, 1) - 1.5;
  }
  EXPECT_NEAR(knn_entropy(y, 10).value, knn_entropy(x, 10).value, 1e-12);
}

TEST(Knn, Errors) {
  EXPECT_THROW(knn_entropy(gaussian_samples(10, 2, 1), 10), Error);
  EXPECT_THROW(knn_entropy(gaussian_samples(10, 2, 1), 0), Error);
  Matrix bad = gaussian_samples(20, 2, 1);
  bad(3, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(knn_entropy(bad, 3), Error);
}

TEST(Knn, DuplicatesAreJittered) {
  Matrix x = gaussian_samples(50, 2, 56);
  for (std::size_t r = 1; r < 50; r += 2)
    for (std::size_t c = 0; c < 2; ++c) x(r, c) = x(r - 1, c);
  const auto h = knn_entropy(x, 1);
  EXPECT_TRUE(h.jittered);
  EXPECT_TRUE(std::isfinite(h.value));
}

TEST(Primal, GaussianWithoutData) {
  const double lambda = 0.01, lp = 0.01;
  const ParticleEnsemble e(gaussian_samples(20000, 2, 57));
  const auto pc = primal_objective(e, kAffine1, LossModel{}, Dataset::empty(1), lambda, lp, EstimatorConfig{});
  const double expected = lp * 2.0 - lambda * gaussian_entropy(2.0, 1.0);
  EXPECT_NEAR(pc.primal / expected, 1.0, 0.05);
  EXPECT_EQ(pc.risk, 0.0);
  EXPECT_DOUBLE_EQ(pc.primal, pc.risk + pc.moment + pc.neg_entropy);
}

TEST(Primal, PerfectFitRiskAndLinearMoment) {
  Stream s = test_stream(58);
  ParticleEnsemble e = mfld::testing::random_ensemble(30, 2, s);
  for (std::size_t r = 0; r < 30; ++r) e.particle(r)[0] = 0.0;  // constant prediction
  Matrix x(3, 1);
  x(1, 0) = 1.0;
  x(2, 0) = -2.0;
  const double h = predict_mean_field(e, kAffine1, std::vector<double>{0.0});
  const Dataset data(x, {h, h, h});
  const auto a = primal_objective(e, kAffine1, LossModel{}, data, 0.1, 0.2, EstimatorConfig{});
  const auto b = primal_objective(e, kAffine1, LossModel{}, data, 0.1, 0.4, EstimatorConfig{});
  EXPECT_EQ(a.risk, 0.0);
  EXPECT_EQ(b.moment, 2.0 * a.moment);
}

TEST(Primal, NeedsMoreParticlesThanK) {
  ParticleEnsemble e(10, 2);
  EXPECT_THROW(primal_objective(e, kAffine1, LossModel{}, Dataset::empty(1), 0.1, 0.1, EstimatorConfig{}), Error);
}

TEST(EstimatorConfig, Validation) {
  EXPECT_THROW((EstimatorConfig{0, 10}.validate()), Error);
  EXPECT_THROW((EstimatorConfig{10, 0}.validate()), Error);
}

TEST(ImportanceSampling, ZeroDualIsExact) {
  Stream s = test_stream(59);
  const Dataset data = mfld::testing::random_dataset(5, 1, s);
  const ProximalGibbs pg(std::vector<double>(5, 0.0), data, kAffine1, 0.1, 0.3);
  const auto est = is_log_partition(pg, 100, RngSpec{1});
  EXPECT_NEAR(est.log_z, gaussian_log_partition(0.1, 0.3, 2), 1e-14);
  EXPECT_EQ(est.standard_error, 0.0);
  EXPECT_THROW(is_log_partition(pg, 1, RngSpec{1}), Error);
}

TEST(ImportanceSampling, MatchesQuadrature) {
  Stream s = test_stream(60);
  const NeuronModel lin{NeuronKind::tanh_linear, 1, 1.0};
  const Dataset data = mfld::testing::random_dataset(2, 1, s);
  const std::vector<double> g = {0.8, -0.5};
  const ProximalGibbs pg(g, data, lin, 0.3, 0.3);
  const double quad = quadrature_log_partition(pg, 10.0, 20001);
  const auto est = is_log_partition(pg, 100000, RngSpec{61});
  EXPECT_NEAR(est.log_z / quad, 1.0, 0.005);
}

TEST(ImportanceSampling, BoundedExponent) {
  Stream s = test_stream(62);
  const NeuronModel m{NeuronKind::scaled_tanh, 2, 1.5};
  for (int t = 0; t < 10; ++t) {
    const Dataset data = mfld::testing::random_dataset(4, 2, s);
    std::vector<double> g(4);
    double sum_abs = 0.0;
    for (double& v : g) {
      v = 3.0 * s.normal();
      sum_abs += std::abs(v);
    }
    const ProximalGibbs pg(g, data, m, 0.2, 0.1);
    const auto est = is_log_partition(pg, 500, RngSpec{static_cast<std::uint64_t>(t)});
    EXPECT_LE(std::abs(est.log_z - gaussian_log_partition(0.2, 0.1, 3)), 1.5 / (0.2 * 4.0) * sum_abs + 1e-12);
  }
}

TEST(ImportanceSampling, UnbiasedOnTheExpScale) {
  const NeuronModel lin{NeuronKind::tanh_linear, 1, 1.0};
  Matrix x(2, 1);
  x(0, 0) = 1.0;
  x(1, 0) = -0.4;
  const Dataset data(x, {0.0, 0.0});
  const ProximalGibbs pg({0.3, -0.2}, data, lin, 0.5, 0.5);
  const double z = std::exp(quadrature_log_partition(pg, 10.0, 20001));
  std::vector<double> zs;
  for (std::int64_t c = 0; c < 100; ++c) zs.push_back(std::exp(is_log_partition(pg, 1000, RngSpec{63}, c).log_z));
  double mean = 0.0;
  for (double v : zs) mean += v / 100.0;
  double var = 0.0;
  for (double v : zs) var += (v - mean) * (v - mean) / 99.0;
  EXPECT_LE(std::abs(mean - z), 3.0 * std::sqrt(var / 100.0));
}

TEST(Dual, WithoutData) {
  const auto de = dual_objective({}, kAffine1, LossModel{}, Dataset::empty(1), 0.05, 0.05, EstimatorConfig{},
                                 RngSpec{1});
  EXPECT_NEAR(de.dual, -0.05 * std::log(std::numbers::pi), 1e-15);
}

TEST(Dual, ZeroDualSquaredLoss) {
  Stream s = test_stream(64);
  const Dataset data = mfld::testing::random_dataset(6, 1, s);
  const auto de = dual_objective(std::vector<double>(6, 0.0), kAffine1, LossModel{}, data, 0.05, 0.02,
                                 EstimatorConfig{10, 100}, RngSpec{1});
  EXPECT_NEAR(de.dual, -0.05 * gaussian_log_partition(0.05, 0.02, 2), 1e-15);
}

TEST(Dual, ConjugateDomainPropagates) {
  Matrix x(1, 1);
  const Dataset data(x, {1.0});
  EXPECT_THROW(dual_objective({0.5}, kAffine1, LossModel{LossKind::logistic}, data, 0.1, 0.1, EstimatorConfig{10, 10},
                              RngSpec{1}),
               Error);
}

TEST(Dual, GaussianClosedFormGap) {
  // L(q) - D for q = N(0, sigma^2 I) with no data, by direct substitution
  const double lambda = 0.02, lp = 0.03, sigma2 = 0.8, d = 2.0;
  const double s2 = lambda / (2.0 * lp);
  const double primal = lp * d * sigma2 - lambda * gaussian_entropy(d, sigma2);
  const double dual = -lambda * 0.5 * d * std::log(std::numbers::pi * lambda / lp);
  const double ratio = sigma2 / s2;
  EXPECT_NEAR(primal - dual, lambda * 0.5 * d * (ratio - 1.0 - std::log(ratio)), 1e-15);
}

TEST(GapReport, GaussianKl) {
  const ParticleEnsemble e(gaussian_samples(20000, 2, 65));
  const auto rep = duality_gap_report(e, kAffine1, LossModel{}, Dataset::empty(1), 0.01, 0.01, EstimatorConfig{},
                                      RngSpec{1});
  EXPECT_NEAR(rep.kl_q_pq / (1.0 - std::log(2.0)), 1.0, 0.05);
  EXPECT_GE(rep.gap_se, 0.0);
}

TEST(GapReport, IdentitiesOnATrainedInstance) {
  Stream s = test_stream(66);
  const NeuronModel m{NeuronKind::tanh_affine, 2, 1.0};
  const Dataset data = mfld::testing::random_dataset(20, 2, s);
  const auto e = initialize_ensemble(60, 3, 0.7, RngSpec{67});
  const auto rep = duality_gap_report(e, m, LossModel{}, data, 0.05, 0.05, EstimatorConfig{10, 5000}, RngSpec{68});
  EXPECT_EQ(rep.gap, rep.primal - rep.dual);
  EXPECT_EQ(rep.kl_q_pq, rep.gap / 0.05);
  EXPECT_NEAR(rep.kl_indep, rep.kl_q_pq, 1e-9 * std::max(1.0, std::abs(rep.kl_q_pq)));
}

TEST(GapReport, WeakDualityOnRandomInstances) {
  Stream s = test_stream(69);
  for (int t = 0; t < 20; ++t) {
    const bool logistic = t % 2 == 1;
    const NeuronModel m{NeuronKind::tanh_affine, 2, 1.0};
    Dataset data = mfld::testing::random_dataset(15, 2, s);
    if (logistic)
      for (double& y : data.targets) y = y > 0.0 ? 1.0 : -1.0;
    const LossModel loss{logistic ? LossKind::logistic : LossKind::squared};
    const auto e = initialize_ensemble(80, 3, 0.3 + 0.1 * t, RngSpec{static_cast<std::uint64_t>(100 + t)});
    const auto pc = primal_objective(e, m, loss, data, 0.05, 0.05, EstimatorConfig{10, 5000});
    // an arbitrary feasible dual vector
    std::vector<double> g(15);
    for (std::size_t i = 0; i < 15; ++i) g[i] = logistic ? -data.targets[i] * s.uniform() : s.normal();
    const auto de = dual_objective(g, m, loss, data, 0.05, 0.05, EstimatorConfig{10, 5000}, RngSpec{7}, t);
    EXPECT_LE(de.dual, pc.primal + 3.0 * std::hypot(pc.standard_error, de.standard_error)) << "instance " << t;
  }
}

TEST(ProximalPrimal, GaussianWithoutData) {
  const Dataset data = Dataset::empty(1);
  const double lambda = 0.02, lp = 0.02;
  const ProximalGibbs pg({}, data, kAffine1, lambda, lp);
  SamplerConfig sc;
  sc.count = 5000;
  const auto pc = proximal_primal_objective(pg, LossModel{}, sc, EstimatorConfig{}, RngSpec{70});
  const double s2 = lambda / (2.0 * lp);
  const double expected = lp * 2.0 * s2 - lambda * gaussian_entropy(2.0, s2);
  EXPECT_NEAR(pc.primal, expected, 0.05 * std::abs(expected));
}

TEST(ProximalPrimal, CountZeroIsAnError) {
  const Dataset data = Dataset::empty(1);
  const ProximalGibbs pg({}, data, kAffine1, 0.1, 0.1);
  SamplerConfig sc;
  sc.count = 0;
  EXPECT_THROW(proximal_primal_objective(pg, LossModel{}, sc, EstimatorConfig{}, RngSpec{1}), Error);
}

}  // namespace
