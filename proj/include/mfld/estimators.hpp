#ifndef MFLD_ESTIMATORS_HPP
#define MFLD_ESTIMATORS_HPP

// Estimators for the entropy-regularized primal objective
//   L(q) = (1/n) sum_i loss(h_q(x_i), y_i) + lambda' E||theta||^2 + lambda E_q[log q],
// the dual objective
//   D(g) = -(1/n) sum_i loss*(g_i) - lambda log int q_g,
// and the duality gap L(q) - D(g_q) = lambda KL(q || p_q).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/ensemble.hpp"
#include "mfld/gibbs.hpp"
#include "mfld/model.hpp"
#include "mfld/rng.hpp"

namespace mfld {

struct EstimatorConfig {
  std::size_t knn_k = 10;
  std::size_t is_samples = 100000;

  void validate() const {
    require(knn_k >= 1, ErrorKind::invalid_argument, "knn_k must be >= 1");
    require(is_samples >= 1, ErrorKind::invalid_argument, "is_samples must be >= 1");
  }
};

/// psi(n) for a positive integer n.
inline double digamma_int(std::size_t n) {
  require(n >= 1, ErrorKind::invalid_argument, "digamma_int needs n >= 1");
  constexpr double euler_gamma = 0.57721566490153286061;
  if (n < 32) {
    double s = -euler_gamma;
    for (std::size_t j = 1; j < n; ++j) s += 1.0 / static_cast<double>(j);
    return s;
  }
  // asymptotic series, error far below 1e-15 for n >= 32
  const double x = static_cast<double>(n);
  const double x2 = 1.0 / (x * x);
  return std::log(x) - 0.5 / x - x2 * (1.0 / 12.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 / 240.0)));
}

/// log volume of the unit Euclidean ball in R^d.
inline double log_unit_ball_volume(std::size_t d) {
  const double h = 0.5 * static_cast<double>(d);
  return h * std::log(std::numbers::pi) - std::lgamma(h + 1.0);
}

struct EntropyEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool jittered = false;
};

namespace detail {

// Squared distance from each row to its k-th nearest other row.
inline std::vector<double> kth_neighbor_sq_distances(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> out(n);
  std::vector<double> best(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    const double* xi = x.row(i).data();
    double worst = best[k - 1];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* xj = x.row(j).data();
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = xi[c] - xj[c];
        s += t * t;
      }
      if (s >= worst) continue;
      // insertion into the sorted k-best list
      std::size_t p = k - 1;
      while (p > 0 && best[p - 1] > s) {
        best[p] = best[p - 1];
        --p;
      }
      best[p] = s;
      worst = best[k - 1];
    }
    out[i] = best[k - 1];
  }
  return out;
}

}  // namespace detail

/// Kozachenko-Leonenko entropy estimate (nats):
///   psi(N) - psi(k) + log c_d + (d/N) sum_i log rho_{i,k}
/// Exact brute-force neighbor search. Coincident samples are separated with
/// 1e-12 Gaussian jitter and the result is flagged.
inline EntropyEstimate knn_entropy(const Matrix& samples, std::size_t k, const RngSpec& jitter_rng = RngSpec{0}) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  require(k >= 1, ErrorKind::invalid_argument, "knn_k must be >= 1");
  require(n > k, ErrorKind::invalid_argument,
          "entropy estimate needs more than k=" + std::to_string(k) + " samples, got " + std::to_string(n));
  require(d >= 1, ErrorKind::invalid_argument, "samples need at least one coordinate");
  require(all_finite(samples.flat()), ErrorKind::non_finite, "samples must be finite");

  EntropyEstimate est;
  std::vector<double> dist2 = detail::kth_neighbor_sq_distances(samples, k);
  if (std::any_of(dist2.begin(), dist2.end(), [](double v) { return v <= 0.0; })) {
    Matrix jittered = samples;
    for (std::size_t r = 0; r < n; ++r) {
      Stream stream = jitter_rng.stream(0, r, StreamTag::jitter);
      for (double& v : jittered.row(r)) v += 1e-12 * stream.normal();
    }
    dist2 = detail::kth_neighbor_sq_distances(jittered, k);
    est.jittered = true;
    require(std::none_of(dist2.begin(), dist2.end(), [](double v) { return v <= 0.0; }), ErrorKind::domain,
            "zero nearest-neighbor distance after jitter");
  }

  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  double sum = 0.0;
  for (double v : dist2) sum += 0.5 * std::log(v);
  const double mean_log = sum / nn;
  double var = 0.0;
  for (double v : dist2) {
    const double t = 0.5 * std::log(v) - mean_log;
    var += t * t;
  }
  var /= (nn - 1.0);
  est.value = digamma_int(n) - digamma_int(k) + log_unit_ball_volume(d) + dd * mean_log;
  est.standard_error = dd * std::sqrt(var / nn);
  return est;
}

/// Primal objective evaluated on a sample set representing q.
struct PrimalComponents {
  double risk = 0.0;            // (1/n) sum_i loss
  double second_moment = 0.0;   // (1/M) sum_r ||theta_r||^2
  double moment = 0.0;          // lambda' * second_moment
  double entropy = 0.0;         // estimated differential entropy H(q)
  double neg_entropy = 0.0;     // lambda * E_q[log q] = -lambda * H
  double primal = 0.0;          // risk + moment + neg_entropy
  double standard_error = 0.0;  // from the moment and entropy terms
  double entropy_standard_error = 0.0;
  bool jittered = false;
  std::vector<double> predictions;  // h_q(x_i)
};

inline PrimalComponents primal_objective(const ParticleEnsemble& ensemble, const NeuronModel& model,
                                         const LossModel& loss, const Dataset& data, double lambda,
                                         double lambda_prime, const EstimatorConfig& cfg) {
  cfg.validate();
  require(ensemble.size() > cfg.knn_k, ErrorKind::invalid_argument, "primal objective needs M > knn_k");
  PrimalComponents pc;
  pc.predictions = predict_dataset(ensemble, model, data);
  if (data.n() > 0) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) s += loss_eval(loss, pc.predictions[i], data.targets[i]);
    pc.risk = s / static_cast<double>(data.n());
  }
  const std::size_t m = ensemble.size();
  std::vector<double> norms(m);
  for (std::size_t r = 0; r < m; ++r) norms[r] = squared_norm(ensemble.particle(r));
  double s = 0.0;
  for (double v : norms) s += v;
  pc.second_moment = s / static_cast<double>(m);
  double var = 0.0;
  for (double v : norms) var += (v - pc.second_moment) * (v - pc.second_moment);
  var /= static_cast<double>(m - 1);
  const double moment_se = lambda_prime * std::sqrt(var / static_cast<double>(m));

  const EntropyEstimate h = knn_entropy(ensemble.params(), cfg.knn_k);
  pc.entropy = h.value;
  pc.entropy_standard_error = h.standard_error;
  pc.jittered = h.jittered;
  pc.moment = lambda_prime * pc.second_moment;
  pc.neg_entropy = -lambda * h.value;
  pc.primal = pc.risk + pc.moment + pc.neg_entropy;
  pc.standard_error = std::hypot(moment_se, lambda * h.standard_error);
  return pc;
}

struct LogPartitionEstimate {
  double log_z = 0.0;
  double standard_error = 0.0;
};

/// log int q_g via Gaussian importance sampling:
///   log Z_gauss + log mean_s exp(-(1/(lambda n)) sum_i g_i h_{theta_s}(x_i)),
///   theta_s ~ N(0, lambda/(2 lambda') I) from streams (context, s, importance).
inline LogPartitionEstimate is_log_partition(const ProximalGibbs& pg, std::size_t samples, const RngSpec& rng,
                                             std::int64_t context = 0) {
  require(samples >= 2, ErrorKind::invalid_argument, "importance sampling needs S >= 2");
  const std::size_t d = pg.dim();
  const double log_gauss = gaussian_log_partition(pg.lambda(), pg.lambda_prime(), d);
  const Dataset& data = pg.data();
  if (data.n() == 0) return {log_gauss, 0.0};
  const double sd = std::sqrt(pg.lambda() / (2.0 * pg.lambda_prime()));
  const double inv_lambda = 1.0 / pg.lambda();
  std::vector<double> logw(samples);
  std::vector<double> theta(d);
  for (std::size_t s = 0; s < samples; ++s) {
    Stream stream = rng.stream(context, s, StreamTag::importance);
    stream.fill_normal(theta, sd);
    logw[s] = -inv_lambda * pg.data_potential(theta);
  }
  double mx = logw[0];
  for (double v : logw) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logw) sum += std::exp(v - mx);
  const double ns = static_cast<double>(samples);
  const double mean_w = sum / ns;
  double var = 0.0;
  for (double v : logw) {
    const double t = std::exp(v - mx) - mean_w;
    var += t * t;
  }
  var /= (ns - 1.0);
  LogPartitionEstimate est;
  est.log_z = log_gauss + mx + std::log(mean_w);
  est.standard_error = std::sqrt(var / ns) / mean_w;
  return est;
}

struct DualEstimate {
  double dual = 0.0;
  double conjugate_term = 0.0;  // -(1/n) sum_i loss*(g_i)
  LogPartitionEstimate log_partition;
  double standard_error = 0.0;  // lambda * SE(log Z)
};

inline DualEstimate dual_objective(const std::vector<double>& g, const NeuronModel& model, const LossModel& loss,
                                   const Dataset& data, double lambda, double lambda_prime,
                                   const EstimatorConfig& cfg, const RngSpec& rng, std::int64_t context = 0) {
  cfg.validate();
  DualEstimate de;
  if (data.n() == 0) {
    de.log_partition = {gaussian_log_partition(lambda, lambda_prime, model.param_dim()), 0.0};
  } else {
    require(g.size() == data.n(), ErrorKind::dimension_mismatch, "dual vector needs one entry per data point");
    double s = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) s += fenchel_conjugate(loss, g[i], data.targets[i]);
    de.conjugate_term = -s / static_cast<double>(data.n());
    const ProximalGibbs pg(g, data, model, lambda, lambda_prime);
    de.log_partition = is_log_partition(pg, std::max<std::size_t>(cfg.is_samples, 2), rng, context);
  }
  de.dual = de.conjugate_term - lambda * de.log_partition.log_z;
  de.standard_error = lambda * de.log_partition.standard_error;
  return de;
}

struct ObjectiveReport {
  double risk = 0.0;
  double moment = 0.0;       // lambda' * second_moment
  double second_moment = 0.0;
  double entropy = 0.0;
  double neg_entropy = 0.0;  // lambda * E_q[log q]
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;          // primal - dual
  double kl_q_pq = 0.0;      // gap / lambda
  double kl_indep = 0.0;     // -H - mean_r log q_g(theta_r) + log Z
  double log_partition = 0.0;
  double primal_se = 0.0;
  double dual_se = 0.0;
  double gap_se = 0.0;
  bool jittered = false;
  std::vector<double> dual_vector;  // g_q
};

inline ObjectiveReport duality_gap_report(const ParticleEnsemble& ensemble, const NeuronModel& model,
                                          const LossModel& loss, const Dataset& data, double lambda,
                                          double lambda_prime, const EstimatorConfig& cfg, const RngSpec& rng,
                                          std::int64_t context = 0) {
  const PrimalComponents pc = primal_objective(ensemble, model, loss, data, lambda, lambda_prime, cfg);
  ObjectiveReport rep;
  rep.dual_vector = data.n() > 0 ? dual_vector_from_predictions(loss, pc.predictions, data) : std::vector<double>{};
  const DualEstimate de = dual_objective(rep.dual_vector, model, loss, data, lambda, lambda_prime, cfg, rng, context);
  rep.risk = pc.risk;
  rep.moment = pc.moment;
  rep.second_moment = pc.second_moment;
  rep.entropy = pc.entropy;
  rep.neg_entropy = pc.neg_entropy;
  rep.primal = pc.primal;
  rep.dual = de.dual;
  rep.gap = rep.primal - rep.dual;
  rep.kl_q_pq = rep.gap / lambda;
  rep.log_partition = de.log_partition.log_z;
  rep.primal_se = pc.standard_error;
  rep.dual_se = de.standard_error;
  rep.gap_se = std::hypot(pc.standard_error, de.standard_error);
  rep.jittered = pc.jittered;

  const ProximalGibbs pg(rep.dual_vector, data, model, lambda, lambda_prime);
  double mean_log_density = 0.0;
  for (std::size_t r = 0; r < ensemble.size(); ++r) mean_log_density += pg.unnorm_log_density(ensemble.particle(r));
  mean_log_density /= static_cast<double>(ensemble.size());
  rep.kl_indep = -pc.entropy - mean_log_density + rep.log_partition;
  return rep;
}

/// L(p_q): primal objective of ULA samples drawn from pg.
inline PrimalComponents proximal_primal_objective(const ProximalGibbs& pg, const LossModel& loss,
                                                  const SamplerConfig& sampler, const EstimatorConfig& cfg,
                                                  const RngSpec& rng, std::int64_t context = 0) {
  require(sampler.count > 0, ErrorKind::invalid_argument, "proximal primal objective needs at least one sample");
  ParticleEnsemble samples(ula_sample(pg, sampler, rng, context));
  return primal_objective(samples, pg.model(), loss, pg.data(), pg.lambda(), pg.lambda_prime(), cfg);
}

}  // namespace mfld

#endif  // MFLD_ESTIMATORS_HPP
