#ifndef MFLD_CHECKS_HPP
#define MFLD_CHECKS_HPP

// Self-check suites behind `mfld check` and the acceptance binary. Each check
// compares the library against a closed form or an independently coded
// reference that does not share the code path it verifies.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/diagnostics.hpp"
#include "mfld/dynamics.hpp"
#include "mfld/estimators.hpp"
#include "mfld/gibbs.hpp"
#include "mfld/model.hpp"
#include "mfld/rng.hpp"

namespace mfld::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline CheckResult timed(const std::string& name, const std::function<bool(std::ostringstream&)>& body,
                         double time_limit_s = 0.0) {
  CheckResult r;
  r.name = name;
  std::ostringstream os;
  os.precision(6);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.passed = body(os);
  } catch (const std::exception& ex) {
    os << "exception: " << ex.what();
    r.passed = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0.0) {
    os << "; runtime " << r.seconds << " s (limit " << time_limit_s << " s)";
    r.passed = r.passed && r.seconds < time_limit_s;
  }
  r.detail = os.str();
  return r;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

namespace reference {

// Written against the formulas directly, in linear space.
inline double lsi(double lambda, double lambda_prime, double c1, double c5) {
  return 2.0 * lambda_prime / (lambda * std::exp(4.0 * c1 * c5 / lambda));
}
inline double moment(double eta, double lambda, double lambda_prime, double c1, double c3, double d) {
  return std::pow(c1 * c3 / lambda_prime, 2) / 2.0 + lambda * d / (eta * lambda_prime * lambda_prime);
}
inline double delta_bar(double eta, double lambda, double lambda_prime, double c1, double c2, double c3, double c4,
                        double d) {
  return 40.0 * eta * (std::pow(c2, 2) * std::pow(c3, 4) + std::pow(c1 * c4 + 2.0 * lambda_prime, 2)) *
         (eta * std::pow(c1 * c3, 2) + lambda * d);
}
inline double envelope(double k, double eta, double alpha, double lambda, double dbar, double gap0) {
  return dbar / (2.0 * alpha * lambda) + std::exp(-alpha * lambda * eta * k) * gap0;
}

// Gradient of the mean-field first variation at particle r, recomputing
// h_q(x_i) from scratch for every (r, i) pair.
inline std::vector<std::vector<double>> intrinsic_gradient_double_loop(const std::vector<std::vector<double>>& theta,
                                                                       const std::vector<std::vector<double>>& x,
                                                                       const std::vector<double>& y,
                                                                       double lambda_prime) {
  const std::size_t m = theta.size();
  const std::size_t n = x.size();
  const std::size_t d = theta.empty() ? 0 : theta[0].size();
  std::vector<std::vector<double>> out(m, std::vector<double>(d, 0.0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      double hq = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        double u = theta[s][d - 1];
        for (std::size_t c = 0; c + 1 < d; ++c) u += theta[s][c] * x[i][c];
        hq += std::tanh(u);
      }
      hq /= static_cast<double>(m);
      const double dl = hq - y[i];  // squared loss
      double u = theta[r][d - 1];
      for (std::size_t c = 0; c + 1 < d; ++c) u += theta[r][c] * x[i][c];
      const double sech2 = 1.0 / std::pow(std::cosh(u), 2);
      for (std::size_t c = 0; c + 1 < d; ++c) out[r][c] += dl * sech2 * x[i][c] / static_cast<double>(n);
      out[r][d - 1] += dl * sech2 / static_cast<double>(n);
    }
    for (std::size_t c = 0; c < d; ++c) out[r][c] += 2.0 * lambda_prime * theta[r][c];
  }
  return out;
}

}  // namespace reference

/// Formula operations against independent substitution on 100 random inputs.
inline CheckResult check_theory_formulas() {
  return timed("theory formulas", [](std::ostringstream& os) {
    Stream s = RngSpec{7}.stream(0, 0, StreamTag::test);
    auto unif = [&](double a, double b) { return a + (b - a) * s.uniform(); };
    double worst = 0.0;
    double worst_floor = 0.0;
    for (int t = 0; t < 100; ++t) {
      const double lambda = unif(0.5, 5.0);
      const double lambda_prime = unif(0.05, 3.0);
      const double eta = unif(1e-3, 0.49 / lambda_prime);
      RegularityConstants c{unif(0.1, 2.0), unif(0.1, 2.0), unif(0.1, 2.0), unif(0.1, 2.0), unif(0.1, 2.0)};
      const std::size_t d = 1 + static_cast<std::size_t>(s.uniform() * 10.0);
      const double k = std::floor(unif(0.0, 1000.0));
      const double gap0 = unif(0.0, 5.0);

      const LogScalar alpha = lsi_constant(lambda, lambda_prime, c.C1, c.C5);
      const double alpha_ref = reference::lsi(lambda, lambda_prime, c.C1, c.C5);
      worst = std::max(worst, rel_err(alpha.value(), alpha_ref));
      worst = std::max(worst, rel_err(moment_bound(eta, lambda, lambda_prime, c.C1, c.C3, d),
                                      reference::moment(eta, lambda, lambda_prime, c.C1, c.C3, double(d))));
      const double dbar = discretization_error_bound(eta, lambda, lambda_prime, c, d);
      const double dbar_ref = reference::delta_bar(eta, lambda, lambda_prime, c.C1, c.C2, c.C3, c.C4, double(d));
      worst = std::max(worst, rel_err(dbar, dbar_ref));
      worst = std::max(worst, rel_err(theorem2_envelope(static_cast<std::int64_t>(k), eta, alpha, lambda, dbar, gap0),
                                      reference::envelope(k, eta, alpha_ref, lambda, dbar_ref, gap0)));
      // far tail: the envelope settles on its floor
      const double far = theorem2_envelope(std::int64_t{1} << 62, eta, alpha, lambda, dbar, gap0);
      worst_floor = std::max(worst_floor, rel_err(far, dbar_ref / (2.0 * alpha_ref * lambda)));
    }
    os << "max relative error " << worst << " (tol 1e-12); envelope floor error " << worst_floor;
    return worst <= 1e-12 && worst_floor <= 1e-12;
  });
}

/// Intrinsic gradient against the double-loop oracle (M = 2, n = 2) and the
/// proximal Gibbs score against central finite differences.
inline CheckResult check_gradients() {
  return timed("gradient checks", [](std::ostringstream& os) {
    Stream s = RngSpec{11}.stream(0, 0, StreamTag::test);
    const std::size_t d_in = 3;
    const NeuronModel model{NeuronKind::tanh_affine, d_in, 1.0};
    const LossModel loss{LossKind::squared};
    double worst_grad = 0.0;
    for (int t = 0; t < 20; ++t) {
      std::vector<std::vector<double>> th(2, std::vector<double>(d_in + 1));
      std::vector<std::vector<double>> xs(2, std::vector<double>(d_in));
      std::vector<double> ys(2);
      ParticleEnsemble e(2, d_in + 1);
      Matrix x(2, d_in);
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c <= d_in; ++c) th[r][c] = e.particle(r)[c] = s.normal();
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t c = 0; c < d_in; ++c) xs[i][c] = x(i, c) = s.normal();
        ys[i] = s.normal();
      }
      const Dataset data(x, ys);
      const double lp = s.uniform();
      const Matrix g = intrinsic_gradient(e, model, loss, data, lp);
      const auto ref = reference::intrinsic_gradient_double_loop(th, xs, ys, lp);
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c <= d_in; ++c) worst_grad = std::max(worst_grad, std::abs(g(r, c) - ref[r][c]));
    }

    double worst_score = 0.0;
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 3;
      Matrix x(n, d_in);
      std::vector<double> y(n), gv(n);
      for (double& v : x.flat()) v = s.normal();
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = s.normal();
        gv[i] = s.normal();
      }
      const Dataset data(x, y);
      const double lambda = 0.1 + s.uniform();
      const double lambda_prime = 0.1 + s.uniform();
      const ProximalGibbs pg(gv, data, model, lambda, lambda_prime);
      std::vector<double> theta(d_in + 1);
      for (double& v : theta) v = s.normal();
      const auto sc = pg.score(theta);
      double num = 0.0, den = 0.0;
      for (std::size_t c = 0; c <= d_in; ++c) {
        const double h = 1e-5 * std::max(1.0, std::abs(theta[c]));
        auto tp = theta, tm = theta;
        tp[c] += h;
        tm[c] -= h;
        const double fd = (pg.unnorm_log_density(tp) - pg.unnorm_log_density(tm)) / (2.0 * h);
        num += (fd - sc[c]) * (fd - sc[c]);
        den += sc[c] * sc[c];
      }
      worst_score = std::max(worst_score, std::sqrt(num / std::max(den, 1e-300)));
    }
    os << "intrinsic gradient max abs diff " << worst_grad << " (tol 1e-12); score max rel diff " << worst_score
       << " (tol 1e-5)";
    return worst_grad <= 1e-12 && worst_score <= 1e-5;
  });
}

/// Kozachenko-Leonenko on N(0, I_5), N = 2e4, k = 10 against (5/2) log(2 pi e).
inline CheckResult check_entropy_gaussian() {
  return timed(
      "entropy estimator",
      [](std::ostringstream& os) {
        const std::size_t n = 20000, d = 5;
        Matrix x(n, d);
        const RngSpec rng{13};
        for (std::size_t r = 0; r < n; ++r) rng.stream(0, r, StreamTag::test).fill_normal(x.row(r));
        const double truth = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * std::numbers::e);
        const EntropyEstimate h = knn_entropy(x, 10);
        const double err = rel_err(h.value, truth);
        os << "estimate " << h.value << " vs " << truth << ", rel err " << err << " (tol 0.02)";
        return err <= 0.02;
      },
      60.0);
}

/// Importance-sampled log-partition against quadrature: tanh-linear scalar
/// neuron, n = 2 random points and dual values, S = 1e5.
inline CheckResult check_log_partition() {
  return timed("log-partition cross-check", [](std::ostringstream& os) {
    Stream s = RngSpec{17}.stream(0, 0, StreamTag::test);
    Matrix x(2, 1);
    x(0, 0) = s.normal();
    x(1, 0) = s.normal();
    const Dataset data(x, {0.0, 0.0});
    const std::vector<double> g = {2.0 * s.uniform() - 1.0, 2.0 * s.uniform() - 1.0};
    const NeuronModel model{NeuronKind::tanh_linear, 1, 1.0};
    const ProximalGibbs pg(g, data, model, 1.0, 1.0);
    const double quad = quadrature_log_partition(pg, 10.0, 20001);
    const LogPartitionEstimate is = is_log_partition(pg, 100000, RngSpec{19});
    const double err = rel_err(is.log_z, quad);
    os << "IS " << is.log_z << " (se " << is.standard_error << ") vs quadrature " << quad << ", rel err " << err
       << " (tol 0.005)";
    return err <= 0.005;
  });
}

/// Closed-form Gaussian duality identity and its estimated counterpart
/// (n = 0, d = 2, lambda = lambda' = 0.01, q = N(0, I), M = 2e4).
inline CheckResult check_gaussian_duality() {
  return timed(
      "gaussian duality oracle",
      [](std::ostringstream& os) {
        const double lambda = 0.01, lambda_prime = 0.01;
        const std::size_t d = 2;
        const double dd = static_cast<double>(d);
        const double s2 = lambda / (2.0 * lambda_prime);
        // analytic: L(N(0, sigma^2 I)) - D = lambda KL(N(0, sigma^2) || N(0, s^2))
        double worst_identity = 0.0;
        for (double sigma2 : {0.1, 0.5, 1.0, 2.0, 7.5}) {
          const double primal = lambda_prime * dd * sigma2 -
                                lambda * 0.5 * dd * std::log(2.0 * std::numbers::pi * std::numbers::e * sigma2);
          const double dual = -lambda * gaussian_log_partition(lambda, lambda_prime, d);
          const double kl = 0.5 * dd * (sigma2 / s2 - 1.0 - std::log(sigma2 / s2));
          worst_identity = std::max(worst_identity, std::abs((primal - dual) - lambda * kl));
        }
        const double kl_true = 0.5 * dd * (1.0 / s2 - 1.0 - std::log(1.0 / s2));
        const std::size_t m = 20000;
        ParticleEnsemble e(m, d);
        const RngSpec rng{23};
        for (std::size_t r = 0; r < m; ++r) rng.stream(0, r, StreamTag::test).fill_normal(e.particle(r));
        const NeuronModel model{NeuronKind::tanh_linear, d, 1.0};
        const ObjectiveReport rep =
            duality_gap_report(e, model, LossModel{}, Dataset::empty(d), lambda, lambda_prime, EstimatorConfig{}, rng);
        const double err = rel_err(rep.kl_q_pq, kl_true);
        os << "closed-form identity max abs err " << worst_identity << " (tol 1e-10); gap/lambda " << rep.kl_q_pq
           << " vs KL " << kl_true << ", rel err " << err << " (tol 0.05)";
        return worst_identity <= 1e-10 && err <= 0.05;
      },
      30.0);
}

/// Pure-regularizer dynamics (n = 0, M = 1, d = 1): time-averaged theta^2 over
/// 1e6 steps against the AR(1) stationary variance lambda / (2 lambda' (1 - lambda' eta)).
inline CheckResult check_ou_stationarity() {
  return timed(
      "OU stationarity",
      [](std::ostringstream& os) {
        HyperParams hp{0.01, 0.01, 0.01, 0};
        const double v = hp.lambda / (2.0 * hp.lambda_prime * (1.0 - hp.lambda_prime * hp.eta));
        const NeuronModel model{NeuronKind::tanh_linear, 1, 1.0};
        const Dataset data = Dataset::empty(1);
        const RngSpec rng{29};
        ParticleEnsemble e = initialize_ensemble(1, 1, std::sqrt(v), rng);
        const std::int64_t steps = 1000000;
        double acc = 0.0;
        for (std::int64_t k = 0; k < steps; ++k) {
          const Matrix g = intrinsic_gradient(e, model, LossModel{}, data, hp.lambda_prime);
          e = noisy_gd_step(e, g, hp, rng, k);
          acc += e.particle(0)[0] * e.particle(0)[0];
        }
        const double mean = acc / static_cast<double>(steps);
        const double err = rel_err(mean, v);
        os << "time-averaged theta^2 " << mean << " vs " << v << ", rel err " << err << " (tol 0.03)";
        return err <= 0.03;
      },
      10.0);
}

inline std::vector<CheckResult> theory_suite() { return {check_theory_formulas(), check_gradients()}; }
inline std::vector<CheckResult> estimators_suite() { return {check_entropy_gaussian(), check_log_partition()}; }
inline std::vector<CheckResult> gaussian_oracle_suite() { return {check_gaussian_duality(), check_ou_stationarity()}; }

}  // namespace mfld::checks

#endif  // MFLD_CHECKS_HPP
