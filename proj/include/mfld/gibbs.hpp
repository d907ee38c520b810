#ifndef MFLD_GIBBS_HPP
#define MFLD_GIBBS_HPP

// Proximal Gibbs distribution around q, parameterized by a dual vector g:
//   q_g(theta) = exp(-(1/lambda) [ (1/n) sum_i g_i h_theta(x_i) + lambda' ||theta||^2 ])
// With g = g_q this is (up to normalization) the proximal Gibbs distribution p_q.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/dynamics.hpp"
#include "mfld/model.hpp"
#include "mfld/rng.hpp"

namespace mfld {

/// Immutable after construction. Holds a non-owning pointer to the dataset,
/// which must outlive it.
class ProximalGibbs {
 public:
  ProximalGibbs(std::vector<double> g, const Dataset& data, NeuronModel model, double lambda, double lambda_prime)
      : g_(std::move(g)), data_(&data), model_(model), lambda_(lambda), lambda_prime_(lambda_prime) {
    require(lambda > 0.0 && lambda_prime > 0.0, ErrorKind::invalid_argument, "lambda and lambda_prime must be > 0");
    require(g_.size() == data.n(), ErrorKind::dimension_mismatch, "dual vector needs one entry per data point");
    require(all_finite(g_), ErrorKind::non_finite, "dual vector must be finite");
    require(data.n() == 0 || data.d_in() == model.d_in, ErrorKind::dimension_mismatch,
            "dataset input dimension does not match neuron");
  }

  /// p_q for the particle measure: g = g_q.
  static ProximalGibbs around(const ParticleEnsemble& ensemble, const NeuronModel& model, const LossModel& loss,
                              const Dataset& data, double lambda, double lambda_prime) {
    return ProximalGibbs(dual_vector(ensemble, model, loss, data), data, model, lambda, lambda_prime);
  }

  const std::vector<double>& dual() const noexcept { return g_; }
  const Dataset& data() const noexcept { return *data_; }
  const NeuronModel& model() const noexcept { return model_; }
  double lambda() const noexcept { return lambda_; }
  double lambda_prime() const noexcept { return lambda_prime_; }
  std::size_t dim() const noexcept { return model_.param_dim(); }

  /// (1/n) sum_i g_i h_theta(x_i); 0 without data.
  double data_potential(std::span<const double> theta) const {
    const std::size_t n = data_->n();
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += g_[i] * neuron_eval(model_, theta, data_->x(i));
    return s / static_cast<double>(n);
  }

  double unnorm_log_density(std::span<const double> theta) const {
    require(theta.size() == dim(), ErrorKind::dimension_mismatch, "theta dimension");
    return -(data_potential(theta) + lambda_prime_ * squared_norm(theta)) / lambda_;
  }

  void score_into(std::span<const double> theta, std::span<double> out) const {
    require(theta.size() == dim() && out.size() == dim(), ErrorKind::dimension_mismatch, "theta dimension");
    const std::size_t n = data_->n();
    std::fill(out.begin(), out.end(), 0.0);
    if (n > 0) {
      std::vector<double> buf(dim());
      for (std::size_t i = 0; i < n; ++i) {
        neuron_grad_into(model_, theta, data_->x(i), buf);
        for (std::size_t j = 0; j < dim(); ++j) out[j] += g_[i] * buf[j];
      }
      for (double& v : out) v /= static_cast<double>(n);
    }
    for (std::size_t j = 0; j < dim(); ++j) out[j] = -(out[j] + 2.0 * lambda_prime_ * theta[j]) / lambda_;
  }

  std::vector<double> score(std::span<const double> theta) const {
    std::vector<double> out(dim());
    score_into(theta, out);
    return out;
  }

 private:
  std::vector<double> g_;
  const Dataset* data_;
  NeuronModel model_;
  double lambda_;
  double lambda_prime_;
};

struct SamplerConfig {
  std::size_t count = 1000;
  double step = 0.0;  // <= 0 selects default_step
  std::size_t burn_in = 1000;
  std::size_t thin = 10;

  static double default_step(double lambda, double lambda_prime) {
    return 1e-2 * std::min(1.0, lambda / (2.0 * lambda_prime));
  }
  double resolved_step(double lambda, double lambda_prime) const {
    return step > 0.0 ? step : default_step(lambda, lambda_prime);
  }
};

/// Unadjusted Langevin chain started at theta = 0:
///   theta <- theta + step * score(theta) + sqrt(2 step) xi
/// The noise of chain step j is drawn from stream (context, j, sampler).
inline Matrix ula_sample(const ProximalGibbs& pg, const SamplerConfig& cfg, const RngSpec& rng,
                         std::int64_t context = 0) {
  const double step = cfg.resolved_step(pg.lambda(), pg.lambda_prime());
  require(step > 0.0 && std::isfinite(step), ErrorKind::invalid_argument, "sampler step must be > 0");
  const std::size_t d = pg.dim();
  Matrix samples(cfg.count, d);
  if (cfg.count == 0) return samples;
  const std::size_t thin = std::max<std::size_t>(cfg.thin, 1);
  const double noise = std::sqrt(2.0 * step);
  std::vector<double> theta(d, 0.0);
  std::vector<double> sc(d);
  std::uint64_t j = 0;
  auto advance = [&] {
    pg.score_into(theta, sc);
    Stream stream = rng.stream(context, j, StreamTag::sampler);
    for (std::size_t c = 0; c < d; ++c) {
      theta[c] += step * sc[c] + noise * stream.normal();
      if (!std::isfinite(theta[c]) || std::abs(theta[c]) > kDivergenceLimit)
        throw Error(ErrorKind::diverged, "Langevin sampler diverged at chain step " + std::to_string(j));
    }
    ++j;
  };
  for (std::size_t b = 0; b < cfg.burn_in; ++b) advance();
  for (std::size_t s = 0; s < cfg.count; ++s) {
    for (std::size_t t = 0; t < thin; ++t) advance();
    std::copy(theta.begin(), theta.end(), samples.row(s).begin());
  }
  return samples;
}

/// log of integral exp(-(lambda'/lambda) ||theta||^2) d theta over R^d.
inline double gaussian_log_partition(double lambda, double lambda_prime, std::size_t d) {
  require(lambda > 0.0 && lambda_prime > 0.0, ErrorKind::invalid_argument, "lambda and lambda_prime must be > 0");
  return 0.5 * static_cast<double>(d) * std::log(std::numbers::pi * lambda / lambda_prime);
}

/// Uniform grid on [-extent, extent] with `points` nodes.
inline std::vector<double> uniform_grid(double extent, std::size_t points) {
  require(extent > 0.0 && points >= 2, ErrorKind::invalid_argument, "grid needs extent > 0 and >= 2 points");
  std::vector<double> grid(points);
  const double h = 2.0 * extent / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = -extent + h * static_cast<double>(i);
  return grid;
}

/// Trapezoidal log-partition for d in {1, 2}. The density at the grid
/// boundary must be below 1e-12 of the grid maximum.
inline double quadrature_log_partition(const ProximalGibbs& pg, double grid_extent, std::size_t grid_points) {
  const std::size_t d = pg.dim();
  require(d == 1 || d == 2, ErrorKind::invalid_argument, "quadrature supports d in {1, 2} only");
  const auto grid = uniform_grid(grid_extent, grid_points);
  const double h = grid[1] - grid[0];
  const std::size_t m = grid_points;
  const std::size_t total = d == 1 ? m : m * m;
  std::vector<double> logv(total);
  std::vector<double> weight(total);
  double boundary_max = -std::numeric_limits<double>::infinity();
  double interior_max = -std::numeric_limits<double>::infinity();
  std::vector<double> theta(d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t a = idx % m;
    const std::size_t b = idx / m;
    theta[0] = grid[a];
    double w = (a == 0 || a == m - 1) ? 0.5 : 1.0;
    bool boundary = (a == 0 || a == m - 1);
    if (d == 2) {
      theta[1] = grid[b];
      w *= (b == 0 || b == m - 1) ? 0.5 : 1.0;
      boundary = boundary || b == 0 || b == m - 1;
    }
    logv[idx] = pg.unnorm_log_density(theta);
    weight[idx] = w;
    interior_max = std::max(interior_max, logv[idx]);
    if (boundary) boundary_max = std::max(boundary_max, logv[idx]);
  }
  if (boundary_max - interior_max > std::log(1e-12))
    throw Error(ErrorKind::extent_too_small, "grid extent " + std::to_string(grid_extent) +
                                                 " leaves boundary density above 1e-12 of the mode");
  double s = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) s += weight[idx] * std::exp(logv[idx] - interior_max);
  return interior_max + std::log(s) + static_cast<double>(d) * std::log(h);
}

}  // namespace mfld

#endif  // MFLD_GIBBS_HPP
