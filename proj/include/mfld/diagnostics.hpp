#ifndef MFLD_DIAGNOSTICS_HPP
#define MFLD_DIAGNOSTICS_HPP

// Closed-form convergence quantities for discrete mean-field Langevin
// dynamics on a two-layer network with L2 regularization.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/ensemble.hpp"
#include "mfld/estimators.hpp"
#include "mfld/model.hpp"

namespace mfld {

/// A positive quantity stored by its logarithm. The log-Sobolev constant
/// underflows double precision at practical lambda.
struct LogScalar {
  double log = 0.0;

  static LogScalar from_value(double v) {
    require(v > 0.0, ErrorKind::invalid_argument, "LogScalar needs a positive value");
    return {std::log(v)};
  }
  double value() const { return std::exp(log); }
};

/// alpha = 2 lambda' / (lambda exp(4 C1 C5 / lambda)), in log-space.
inline LogScalar lsi_constant(double lambda, double lambda_prime, double c1, double c5) {
  require(lambda > 0.0 && lambda_prime > 0.0 && c1 >= 0.0 && c5 >= 0.0, ErrorKind::invalid_argument,
          "lsi_constant needs positive lambda, lambda' and non-negative C1, C5");
  return {std::log(2.0 * lambda_prime / lambda) - 4.0 * c1 * c5 / lambda};
}

/// Second-moment bound (eta C1^2 C3^2 + 2 lambda d) / (2 eta lambda'^2),
/// preserved by every step once the iterate satisfies it.
inline double moment_bound(double eta, double lambda, double lambda_prime, double c1, double c3, std::size_t d) {
  require(eta > 0.0 && lambda > 0.0 && lambda_prime > 0.0, ErrorKind::invalid_argument,
          "moment_bound needs positive eta, lambda, lambda'");
  require(2.0 * lambda_prime * eta < 1.0, ErrorKind::hypothesis_violated, "moment bound requires 2 lambda' eta < 1");
  const double dd = static_cast<double>(d);
  return (eta * c1 * c1 * c3 * c3 + 2.0 * lambda * dd) / (2.0 * eta * lambda_prime * lambda_prime);
}

inline bool moment_ok(const ParticleEnsemble& ensemble, double bound) { return ensemble.second_moment() <= bound; }

/// delta_bar = 40 eta (C2^2 C3^4 + (C1 C4 + 2 lambda')^2) (eta C1^2 C3^2 + lambda d)
inline double discretization_error_bound(double eta, double lambda, double lambda_prime,
                                         const RegularityConstants& c, std::size_t d) {
  require(eta >= 0.0 && lambda >= 0.0 && lambda_prime >= 0.0, ErrorKind::invalid_argument,
          "discretization_error_bound needs non-negative inputs");
  const double c3sq = c.C3 * c.C3;
  const double a = c.C2 * c.C2 * c3sq * c3sq + (c.C1 * c.C4 + 2.0 * lambda_prime) * (c.C1 * c.C4 + 2.0 * lambda_prime);
  const double b = eta * c.C1 * c.C1 * c3sq + lambda * static_cast<double>(d);
  return 40.0 * eta * a * b;
}

/// delta_bar / (2 alpha lambda); +inf once it exceeds the double range.
inline double envelope_floor(LogScalar alpha, double lambda, double delta_bar) {
  require(lambda > 0.0 && delta_bar >= 0.0, ErrorKind::invalid_argument, "envelope needs lambda > 0, delta_bar >= 0");
  if (delta_bar == 0.0) return 0.0;
  return std::exp(std::log(delta_bar) - std::log(2.0) - alpha.log - std::log(lambda));
}

/// delta_bar / (2 alpha lambda) + exp(-alpha lambda eta k) * initial_gap
inline double theorem2_envelope(std::int64_t k, double eta, LogScalar alpha, double lambda, double delta_bar,
                                double initial_gap) {
  require(eta > 0.0, ErrorKind::invalid_argument, "envelope needs eta > 0");
  require(initial_gap >= 0.0, ErrorKind::invalid_argument, "initial gap must be non-negative");
  const double rate = alpha.value() * lambda * eta * static_cast<double>(k);
  return envelope_floor(alpha, lambda, delta_bar) + std::exp(-rate) * initial_gap;
}

/// (1/(eps alpha^2 lambda^2)) log(1/eps), hidden constants set to 1.
inline double iteration_complexity(double eps, double alpha, double lambda) {
  require(eps > 0.0 && alpha > 0.0 && lambda > 0.0, ErrorKind::invalid_argument,
          "iteration_complexity needs positive inputs");
  return std::log(1.0 / eps) / (eps * alpha * alpha * lambda * lambda);
}

struct Theorem4Check {
  double lhs = 0.0;  // L(p_q) - D(g_q)
  double rhs = 0.0;  // (lambda + 2 B^2 C2) KL(q || p_q)
  double lhs_se = 0.0;
  double combined_se = 0.0;
  bool ok = false;
};

/// Checks 0 <= L(p_q) - D(g_q) <= (lambda + 2 B^2 C2) KL(q || p_q)
/// within three combined standard errors.
inline Theorem4Check theorem4_check(const ObjectiveReport& report, const PrimalComponents& proximal, double lambda,
                                    double bound_b, double c2) {
  Theorem4Check t;
  const double factor = lambda + 2.0 * bound_b * bound_b * c2;
  t.lhs = proximal.primal - report.dual;
  t.rhs = factor * report.kl_q_pq;
  t.lhs_se = std::hypot(proximal.standard_error, report.dual_se);
  const double kl_se = report.gap_se / lambda;
  t.combined_se = std::hypot(t.lhs_se, factor * kl_se);
  t.ok = t.lhs <= t.rhs + 3.0 * t.combined_se && t.lhs >= -3.0 * t.lhs_se;
  return t;
}

struct TheoryReport {
  LogScalar alpha;
  double moment_bound = 0.0;
  double delta_bar = 0.0;
  double envelope_floor = 0.0;
  bool envelope_vacuous = false;
  double iteration_complexity_gauge = 0.0;  // at eps = gap tolerance 0.1
};

inline TheoryReport make_theory_report(double eta, double lambda, double lambda_prime, const RegularityConstants& c,
                                       std::size_t d) {
  TheoryReport t;
  t.alpha = lsi_constant(lambda, lambda_prime, c.C1, c.C5);
  t.moment_bound = moment_bound(eta, lambda, lambda_prime, c.C1, c.C3, d);
  t.delta_bar = discretization_error_bound(eta, lambda, lambda_prime, c, d);
  t.envelope_floor = envelope_floor(t.alpha, lambda, t.delta_bar);
  const double a = t.alpha.value();
  t.envelope_vacuous = a == 0.0 || !std::isfinite(t.envelope_floor) || t.envelope_floor > 1e6;
  t.iteration_complexity_gauge =
      a > 0.0 ? iteration_complexity(0.1, a, lambda) : std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace mfld

#endif  // MFLD_DIAGNOSTICS_HPP
