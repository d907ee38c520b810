#ifndef MFLD_MODEL_HPP
#define MFLD_MODEL_HPP

// Neuron and loss primitives for a two-layer mean-field network
//   h_q(x) = E_{theta ~ q}[h_theta(x)]
// with uniform 1/M second-layer weights in the particle approximation.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/ensemble.hpp"

namespace mfld {

/// Training data {(x_i, y_i)}. n = 0 is allowed and means "no data term".
struct Dataset {
  Matrix inputs;  // n x d_in
  std::vector<double> targets;

  Dataset() = default;
  Dataset(Matrix x, std::vector<double> y) : inputs(std::move(x)), targets(std::move(y)) { validate(); }

  /// An empty dataset that still fixes the input dimension.
  static Dataset empty(std::size_t d_in) { return Dataset(Matrix(0, d_in), {}); }

  std::size_t n() const noexcept { return inputs.rows(); }
  std::size_t d_in() const noexcept { return inputs.cols(); }
  std::span<const double> x(std::size_t i) const { return inputs.row(i); }

  void validate() const {
    require(targets.size() == inputs.rows(), ErrorKind::dimension_mismatch,
            "dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                std::to_string(targets.size()) + " targets");
    require(all_finite(inputs.flat()) && all_finite(targets), ErrorKind::non_finite,
            "dataset contains NaN or Inf");
  }
};

enum class NeuronKind {
  tanh_affine,  // tanh(<w,x> + b), theta = (w, b)
  scaled_tanh,  // output_scale * tanh(<w,x> + b)
  tanh_linear,  // tanh(<theta,x>), no bias
};

inline std::string_view to_string(NeuronKind k) {
  switch (k) {
    case NeuronKind::tanh_affine: return "tanh-affine";
    case NeuronKind::scaled_tanh: return "scaled-tanh";
    case NeuronKind::tanh_linear: return "tanh-linear";
  }
  return "?";
}

inline std::optional<NeuronKind> parse_neuron_kind(std::string_view s) {
  if (s == "tanh-affine") return NeuronKind::tanh_affine;
  if (s == "scaled-tanh") return NeuronKind::scaled_tanh;
  if (s == "tanh-linear") return NeuronKind::tanh_linear;
  return std::nullopt;
}

struct NeuronModel {
  NeuronKind kind = NeuronKind::tanh_affine;
  std::size_t d_in = 1;
  double output_scale = 1.0;  // read only for scaled_tanh

  bool has_bias() const noexcept { return kind != NeuronKind::tanh_linear; }
  std::size_t param_dim() const noexcept { return d_in + (has_bias() ? 1 : 0); }
  double scale() const noexcept { return kind == NeuronKind::scaled_tanh ? output_scale : 1.0; }
  /// sup |h_theta(x)|
  double bound() const noexcept { return std::abs(scale()); }

  double pre_activation(std::span<const double> theta, std::span<const double> x) const {
    double u = dot(theta.first(d_in), x);
    if (has_bias()) u += theta[d_in];
    return u;
  }

  void check_dims(std::span<const double> theta, std::span<const double> x) const {
    if (theta.size() != param_dim() || x.size() != d_in) [[unlikely]]
      dims_error(theta.size(), x.size());
  }

  [[noreturn, gnu::noinline, gnu::cold]] void dims_error(std::size_t theta_size, std::size_t x_size) const {
    throw Error(ErrorKind::dimension_mismatch, "neuron expects theta in R^" + std::to_string(param_dim()) +
                                                   " and x in R^" + std::to_string(d_in) + ", got " +
                                                   std::to_string(theta_size) + " and " + std::to_string(x_size));
  }
};

inline double neuron_eval(const NeuronModel& model, std::span<const double> theta,
                          std::span<const double> x) {
  model.check_dims(theta, x);
  return model.scale() * std::tanh(model.pre_activation(theta, x));
}

/// d h_theta(x) / d theta written into `out` (size param_dim).
inline void neuron_grad_into(const NeuronModel& model, std::span<const double> theta,
                             std::span<const double> x, std::span<double> out) {
  model.check_dims(theta, x);
  require(out.size() == model.param_dim(), ErrorKind::dimension_mismatch, "gradient buffer size");
  const double t = std::tanh(model.pre_activation(theta, x));
  const double c = model.scale() * (1.0 - t * t);
  for (std::size_t j = 0; j < model.d_in; ++j) out[j] = c * x[j];
  if (model.has_bias()) out[model.d_in] = c;
}

inline std::vector<double> neuron_grad(const NeuronModel& model, std::span<const double> theta,
                                       std::span<const double> x) {
  std::vector<double> g(model.param_dim());
  neuron_grad_into(model, theta, x, g);
  return g;
}

/// (1/M) sum_r h_{theta_r}(x)
inline double predict_mean_field(const ParticleEnsemble& ensemble, const NeuronModel& model,
                                 std::span<const double> x) {
  require(!ensemble.empty(), ErrorKind::empty_ensemble, "prediction needs at least one particle");
  double s = 0.0;
  for (std::size_t r = 0; r < ensemble.size(); ++r) s += neuron_eval(model, ensemble.particle(r), x);
  return s / static_cast<double>(ensemble.size());
}

/// h_q(x_i) for every data point, in data order.
inline std::vector<double> predict_dataset(const ParticleEnsemble& ensemble, const NeuronModel& model,
                                           const Dataset& data) {
  std::vector<double> out(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) out[i] = predict_mean_field(ensemble, model, data.x(i));
  return out;
}

enum class LossKind { squared, logistic };

inline std::string_view to_string(LossKind k) { return k == LossKind::squared ? "squared" : "logistic"; }

inline std::optional<LossKind> parse_loss_kind(std::string_view s) {
  if (s == "squared") return LossKind::squared;
  if (s == "logistic") return LossKind::logistic;
  return std::nullopt;
}

struct LossModel {
  LossKind kind = LossKind::squared;
};

namespace detail {

inline void check_label(LossKind kind, double y) {
  if (kind == LossKind::logistic)
    if (y != 1.0 && y != -1.0)
      throw Error(ErrorKind::domain, "logistic loss needs labels in {-1, +1}, got " + std::to_string(y));
}

// log(1 + exp(t)) without overflow
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// 1 / (1 + exp(-t))
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double xlogx(double u) { return u == 0.0 ? 0.0 : u * std::log(u); }

}  // namespace detail

inline double loss_eval(const LossModel& loss, double z, double y) {
  detail::check_label(loss.kind, y);
  if (loss.kind == LossKind::squared) return 0.5 * (z - y) * (z - y);
  return detail::softplus(-y * z);
}

/// d loss / dz
inline double loss_grad(const LossModel& loss, double z, double y) {
  detail::check_label(loss.kind, y);
  if (loss.kind == LossKind::squared) return z - y;
  return -y * detail::sigmoid(-y * z);
}

/// sup_z { z g - loss(z, y) }. For the logistic loss the domain is -g*y in [0, 1].
inline double fenchel_conjugate(const LossModel& loss, double g, double y) {
  detail::check_label(loss.kind, y);
  if (loss.kind == LossKind::squared) return 0.5 * g * g + g * y;
  const double u = -g * y;
  if (!(u >= 0.0 && u <= 1.0))
    throw Error(ErrorKind::domain, "dual value g=" + std::to_string(g) +
                                       " outside logistic conjugate domain for y=" + std::to_string(y));
  return detail::xlogx(u) + detail::xlogx(1.0 - u);
}

/// g_i = d loss(z, y_i)/dz at z = prediction_i
inline std::vector<double> dual_vector_from_predictions(const LossModel& loss, std::span<const double> predictions,
                                                        const Dataset& data) {
  require(predictions.size() == data.n(), ErrorKind::dimension_mismatch, "one prediction per data point");
  std::vector<double> g(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) g[i] = loss_grad(loss, predictions[i], data.targets[i]);
  return g;
}

inline std::vector<double> dual_vector(const ParticleEnsemble& ensemble, const NeuronModel& model,
                                       const LossModel& loss, const Dataset& data) {
  if (data.n() == 0) return {};
  return dual_vector_from_predictions(loss, predict_dataset(ensemble, model, data), data);
}

struct RegularityConstants {
  double C1 = 0.0;  // sup |d_z loss|
  double C2 = 0.0;  // Lipschitz constant of d_z loss
  double C3 = 0.0;  // sup ||d_theta h||
  double C4 = 0.0;  // Lipschitz constant of d_theta h
  double C5 = 0.0;  // sup |h| (= B)
  bool unit_ball_convention = false;  // no data: ||x|| <= 1 assumed
  bool effective_loss_bound = false;  // squared loss: C1 valid on [-B, B] only
};

/// Effective constants on the reachable prediction range [-B, B].
inline RegularityConstants model_constants(const NeuronModel& model, const LossModel& loss, const Dataset& data) {
  RegularityConstants c;
  double max_feature_sq = 0.0;
  double max_abs_y = 0.0;
  if (data.n() == 0) {
    c.unit_ball_convention = true;
    max_feature_sq = 1.0 + (model.has_bias() ? 1.0 : 0.0);
  } else {
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double f = squared_norm(data.x(i)) + (model.has_bias() ? 1.0 : 0.0);
      max_feature_sq = std::max(max_feature_sq, f);
      max_abs_y = std::max(max_abs_y, std::abs(data.targets[i]));
    }
  }
  const double s = model.bound();
  c.C3 = s * std::sqrt(max_feature_sq);
  c.C4 = 2.0 * s * max_feature_sq;
  c.C5 = s;
  if (loss.kind == LossKind::logistic) {
    c.C1 = 1.0;
    c.C2 = 0.25;
  } else {
    c.C1 = s + max_abs_y;
    c.C2 = 1.0;
    c.effective_loss_bound = true;
  }
  return c;
}

}  // namespace mfld

#endif  // MFLD_MODEL_HPP
