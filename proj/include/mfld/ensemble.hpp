#ifndef MFLD_ENSEMBLE_HPP
#define MFLD_ENSEMBLE_HPP

#include "mfld/core.hpp"

namespace mfld {

/// M particles in R^d; row r is theta_r. The empirical measure of the rows
/// stands in for the parameter distribution q.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  ParticleEnsemble(std::size_t count, std::size_t dim) : params_(count, dim) {}
  explicit ParticleEnsemble(Matrix params) : params_(std::move(params)) {}

  std::size_t size() const noexcept { return params_.rows(); }
  std::size_t dim() const noexcept { return params_.cols(); }
  bool empty() const noexcept { return params_.rows() == 0; }

  std::span<double> particle(std::size_t r) { return params_.row(r); }
  std::span<const double> particle(std::size_t r) const { return params_.row(r); }

  const Matrix& params() const noexcept { return params_; }
  Matrix& params() noexcept { return params_; }

  /// (1/M) sum_r ||theta_r||^2
  double second_moment() const {
    if (empty()) return 0.0;
    double s = 0.0;
    for (std::size_t r = 0; r < size(); ++r) s += squared_norm(particle(r));
    return s / static_cast<double>(size());
  }

  bool operator==(const ParticleEnsemble&) const = default;

 private:
  Matrix params_;
};

}  // namespace mfld

#endif  // MFLD_ENSEMBLE_HPP
