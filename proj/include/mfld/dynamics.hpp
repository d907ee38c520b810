#ifndef MFLD_DYNAMICS_HPP
#define MFLD_DYNAMICS_HPP

// Discrete mean-field Langevin dynamics (noisy gradient descent):
//   theta <- theta - eta * grad(dF/dq)(q)(theta) + sqrt(2 lambda eta) xi

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/ensemble.hpp"
#include "mfld/model.hpp"
#include "mfld/rng.hpp"

namespace mfld {

inline constexpr double kDivergenceLimit = 1e8;

struct HyperParams {
  double lambda = 0.01;        // entropy regularization
  double lambda_prime = 0.01;  // L2 regularization
  double eta = 0.01;           // step size
  std::int64_t steps = 0;

  /// Strict validation used for experiment configs.
  void validate() const {
    require(lambda > 0.0 && lambda_prime > 0.0 && eta > 0.0, ErrorKind::invalid_argument,
            "lambda, lambda_prime and eta must be positive");
    require(steps >= 0, ErrorKind::invalid_argument, "steps must be non-negative");
    require(2.0 * lambda_prime * eta < 1.0, ErrorKind::hypothesis_violated, "2 * lambda_prime * eta must be < 1");
  }
};

/// Rows: (1/n) sum_i d_z loss(h_q(x_i), y_i) * d_theta h_{theta_r}(x_i) + 2 lambda' theta_r.
/// h_q is evaluated once per data point and shared by all particles.
inline Matrix intrinsic_gradient(const ParticleEnsemble& ensemble, const NeuronModel& model, const LossModel& loss,
                                 const Dataset& data, double lambda_prime) {
  const std::size_t d = ensemble.dim();
  require(d == model.param_dim(), ErrorKind::dimension_mismatch, "ensemble dimension does not match neuron");
  require(data.n() == 0 || data.d_in() == model.d_in, ErrorKind::dimension_mismatch,
          "dataset input dimension does not match neuron");
  Matrix grad(ensemble.size(), d);
  std::vector<double> g;
  if (data.n() > 0) g = dual_vector(ensemble, model, loss, data);
  const double inv_n = data.n() > 0 ? 1.0 / static_cast<double>(data.n()) : 0.0;
  std::vector<double> buf(d);
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    auto theta = ensemble.particle(r);
    auto out = grad.row(r);
    for (std::size_t i = 0; i < data.n(); ++i) {
      neuron_grad_into(model, theta, data.x(i), buf);
      for (std::size_t j = 0; j < d; ++j) out[j] += g[i] * buf[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[j] = out[j] * inv_n + 2.0 * lambda_prime * theta[j];
  }
  return grad;
}

/// One noisy gradient step at iteration k. Noise for particle r comes from
/// the stream (k, r, noise). Throws ErrorKind::diverged on a non-finite or
/// out-of-range result.
inline ParticleEnsemble noisy_gd_step(const ParticleEnsemble& ensemble, const Matrix& grad, const HyperParams& hp,
                                      const RngSpec& rng, std::int64_t k) {
  require(grad.rows() == ensemble.size() && grad.cols() == ensemble.dim(), ErrorKind::dimension_mismatch,
          "gradient shape does not match ensemble");
  require(hp.eta > 0.0 && hp.lambda >= 0.0 && hp.lambda_prime >= 0.0, ErrorKind::invalid_argument,
          "step needs eta > 0 and non-negative regularization");
  require(2.0 * hp.lambda_prime * hp.eta < 1.0, ErrorKind::hypothesis_violated, "2 * lambda_prime * eta must be < 1");
  const double noise_scale = std::sqrt(2.0 * hp.lambda * hp.eta);
  ParticleEnsemble next = ensemble;
  for (std::size_t r = 0; r < next.size(); ++r) {
    auto theta = next.particle(r);
    auto gr = grad.row(r);
    Stream stream = rng.stream(k, r, StreamTag::noise);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      theta[j] -= hp.eta * gr[j];
      if (noise_scale > 0.0) theta[j] += noise_scale * stream.normal();
      if (!std::isfinite(theta[j]) || std::abs(theta[j]) > kDivergenceLimit)
        throw Error(ErrorKind::diverged, "particle " + std::to_string(r) + " left the finite range at iteration " +
                                             std::to_string(k) + "; step size eta=" + std::to_string(hp.eta) +
                                             " is likely too large");
    }
  }
  return next;
}

/// i.i.d. N(0, init_std^2 I) rows from the streams (-1, r, init).
inline ParticleEnsemble initialize_ensemble(std::size_t count, std::size_t dim, double init_std, const RngSpec& rng) {
  require(count >= 1, ErrorKind::empty_ensemble, "ensemble needs at least one particle");
  require(init_std >= 0.0 && std::isfinite(init_std), ErrorKind::invalid_argument, "init_std must be >= 0");
  ParticleEnsemble e(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    Stream stream = rng.stream(-1, r, StreamTag::init);
    stream.fill_normal(e.particle(r), init_std);
    if (init_std == 0.0)
      for (double& v : e.particle(r)) v = 0.0;  // avoid -0.0
  }
  return e;
}

/// Iterations at which diagnostics are recorded.
struct LogSchedule {
  std::int64_t every = 0;
  std::set<std::int64_t> iterations;

  bool contains(std::int64_t k) const {
    if (iterations.count(k) != 0) return true;
    return every > 0 && k % every == 0;
  }
};

/// Applies exactly hp.steps noisy gradient steps. After step k (1-based) the
/// hook is called with (k, ensemble) if k is scheduled. Errors from the step
/// or the hook propagate; whatever the hook already persisted stays persisted.
template <class OnLog>
ParticleEnsemble run_dynamics(ParticleEnsemble ensemble, const NeuronModel& model, const LossModel& loss,
                              const Dataset& data, const HyperParams& hp, const RngSpec& rng,
                              const LogSchedule& schedule, OnLog&& on_log) {
  require(!ensemble.empty(), ErrorKind::empty_ensemble, "dynamics needs at least one particle");
  require(hp.steps >= 0, ErrorKind::invalid_argument, "steps must be non-negative");
  for (std::int64_t k = 1; k <= hp.steps; ++k) {
    const Matrix grad = intrinsic_gradient(ensemble, model, loss, data, hp.lambda_prime);
    ensemble = noisy_gd_step(ensemble, grad, hp, rng, k - 1);
    if (schedule.contains(k)) on_log(k, static_cast<const ParticleEnsemble&>(ensemble));
  }
  return ensemble;
}

inline ParticleEnsemble run_dynamics(ParticleEnsemble ensemble, const NeuronModel& model, const LossModel& loss,
                                     const Dataset& data, const HyperParams& hp, const RngSpec& rng) {
  return run_dynamics(std::move(ensemble), model, loss, data, hp, rng, LogSchedule{},
                      [](std::int64_t, const ParticleEnsemble&) {});
}

}  // namespace mfld

#endif  // MFLD_DYNAMICS_HPP
