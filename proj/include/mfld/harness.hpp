#ifndef MFLD_HARNESS_HPP
#define MFLD_HARNESS_HPP

// Experiment orchestration: data generation, logging hooks around the
// dynamics, and on-disk run artifacts.
//
// A run directory contains
//   records.csv          one DiagnosticsRecord per logged iteration
//   proximal.csv         L(p_q) and the second duality bound at chosen iterations
//   final_particles.csv  the last ensemble
//   meta.json            flat object: config echo, constants, theory, status
//   fig1/                1-D density snapshots (tanh-linear, d = 1 only)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfld/config.hpp"
#include "mfld/core.hpp"
#include "mfld/diagnostics.hpp"
#include "mfld/dynamics.hpp"
#include "mfld/estimators.hpp"
#include "mfld/gibbs.hpp"
#include "mfld/io.hpp"
#include "mfld/model.hpp"
#include "mfld/rng.hpp"

namespace mfld {

struct TeacherStudent {
  Dataset data;
  Matrix teacher;  // teacher_width x d_in, orthogonal rows of norm sqrt(d_in)
};

/// Rows of a uniformly random orthogonal matrix (Gram-Schmidt on Gaussian
/// draws), scaled by sqrt(d_in); x_i ~ N(0, I);
/// y_i = mean_j sigmoid(<w_j, x_i>) + noise_std * zeta_i.
inline TeacherStudent generate_teacher_student(std::size_t n, std::size_t d_in, std::size_t teacher_width,
                                               double noise_std, const RngSpec& rng) {
  require(teacher_width >= 1 && teacher_width <= d_in, ErrorKind::invalid_argument,
          "teacher_width must be in [1, d_in] for orthogonal neurons");
  require(n >= 1, ErrorKind::invalid_argument, "teacher-student data needs n >= 1");
  require(noise_std >= 0.0, ErrorKind::invalid_argument, "noise_std must be >= 0");
  Matrix basis(d_in, d_in);
  for (std::size_t r = 0; r < d_in; ++r) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      auto row = basis.row(r);
      Stream stream = rng.stream(-2 - static_cast<std::int64_t>(attempt), r, StreamTag::teacher);
      stream.fill_normal(row);
      for (std::size_t p = 0; p < r; ++p) {
        const double proj = dot(row, basis.row(p));
        for (std::size_t c = 0; c < d_in; ++c) row[c] -= proj * basis(p, c);
      }
      const double norm = std::sqrt(squared_norm(row));
      if (norm > 1e-8) {
        for (double& v : row) v /= norm;
        break;
      }
    }
  }
  TeacherStudent ts;
  ts.teacher = Matrix(teacher_width, d_in);
  const double scale = std::sqrt(static_cast<double>(d_in));
  for (std::size_t r = 0; r < teacher_width; ++r)
    for (std::size_t c = 0; c < d_in; ++c) ts.teacher(r, c) = scale * basis(r, c);

  Matrix x(n, d_in);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream xs = rng.stream(static_cast<std::int64_t>(i), 0, StreamTag::data);
    xs.fill_normal(x.row(i));
    double s = 0.0;
    for (std::size_t j = 0; j < teacher_width; ++j) s += detail::sigmoid(dot(ts.teacher.row(j), x.row(i)));
    Stream zs = rng.stream(static_cast<std::int64_t>(i), 1, StreamTag::data);
    y[i] = s / static_cast<double>(teacher_width) + noise_std * zs.normal();
  }
  ts.data = Dataset(std::move(x), std::move(y));
  return ts;
}

inline Dataset build_dataset(const ExperimentConfig& c) {
  switch (c.dataset.kind) {
    case DatasetKind::none: return Dataset::empty(static_cast<std::size_t>(c.dataset.d_in));
    case DatasetKind::file: return io::load_dataset_csv(c.dataset.path);
    case DatasetKind::teacher_student:
      return generate_teacher_student(static_cast<std::size_t>(c.dataset.n), static_cast<std::size_t>(c.dataset.d_in),
                                      static_cast<std::size_t>(c.dataset.teacher_width), c.dataset.noise_std,
                                      RngSpec{c.seed})
          .data;
  }
  return {};
}

inline NeuronModel build_model(const ExperimentConfig& c, std::size_t d_in) {
  return NeuronModel{c.neuron, d_in, c.output_scale};
}

/// One row of records.csv.
struct DiagnosticsRecord {
  std::int64_t iter = 0;
  double sim_time = 0.0;
  double risk = 0.0;
  double moment = 0.0;
  double entropy_est = 0.0;
  double primal_L = 0.0;
  double dual_D = 0.0;
  double gap = 0.0;
  double kl_q_pq = 0.0;
  double kl_indep = 0.0;
  double second_moment = 0.0;
  bool moment_bound_ok = false;
  double primal_se = 0.0;
  double dual_se = 0.0;
  double gap_se = 0.0;
  std::int64_t wallclock_ms = 0;
};

inline constexpr std::array<const char*, 16> kRecordColumns = {
    "iter",      "sim_time",      "risk",            "moment",    "entropy_est", "primal_L",
    "dual_D",    "gap",           "kl_q_pq",         "kl_indep",  "second_moment", "moment_bound_ok",
    "primal_se", "dual_se",       "gap_se",          "wallclock_ms"};

inline std::string record_header() {
  std::string s;
  for (std::size_t i = 0; i < kRecordColumns.size(); ++i) s += (i ? "," : "") + std::string(kRecordColumns[i]);
  return s;
}

inline std::string record_line(const DiagnosticsRecord& r) {
  using io::format_real;
  std::string s = std::to_string(r.iter);
  for (double v : {r.sim_time, r.risk, r.moment, r.entropy_est, r.primal_L, r.dual_D, r.gap, r.kl_q_pq, r.kl_indep,
                   r.second_moment})
    s += "," + format_real(v);
  s += r.moment_bound_ok ? ",1" : ",0";
  for (double v : {r.primal_se, r.dual_se, r.gap_se}) s += "," + format_real(v);
  s += "," + std::to_string(r.wallclock_ms);
  return s;
}

struct ProximalRecord {
  std::int64_t iter = 0;
  double primal_pq = 0.0;
  double primal_pq_se = 0.0;
  double dual_D = 0.0;
  double kl_q_pq = 0.0;
  Theorem4Check check;
};

inline std::string proximal_header() {
  return "iter,primal_pq,primal_pq_se,dual_D,kl_q_pq,thm4_lhs,thm4_rhs,thm4_se,thm4_ok";
}

inline std::string proximal_line(const ProximalRecord& p) {
  using io::format_real;
  return std::to_string(p.iter) + "," + format_real(p.primal_pq) + "," + format_real(p.primal_pq_se) + "," +
         format_real(p.dual_D) + "," + format_real(p.kl_q_pq) + "," + format_real(p.check.lhs) + "," +
         format_real(p.check.rhs) + "," + format_real(p.check.combined_se) + "," + (p.check.ok ? "1" : "0");
}

/// 1-D density table: particle histogram and normalized p_q on one grid.
struct Fig1Snapshot {
  std::vector<double> grid;
  std::vector<double> q_density;
  std::vector<double> pq_density;
  std::vector<double> qstar_density;  // reference-run proxy, empty when not requested
  std::size_t clipped = 0;            // particles outside the grid, counted in the edge bins
};

/// Density-normalized histogram with one bin of width h centered on each grid node.
inline std::vector<double> grid_histogram(const ParticleEnsemble& ensemble, const std::vector<double>& grid,
                                          std::size_t* clipped = nullptr) {
  require(ensemble.dim() == 1, ErrorKind::dimension_mismatch, "histogram needs d = 1");
  require(grid.size() >= 2, ErrorKind::invalid_argument, "grid needs at least two nodes");
  const double h = grid[1] - grid[0];
  std::vector<double> counts(grid.size(), 0.0);
  std::size_t clip = 0;
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    const double pos = (ensemble.particle(r)[0] - grid[0]) / h;
    auto idx = static_cast<std::int64_t>(std::floor(pos + 0.5));
    if (idx < 0 || idx >= static_cast<std::int64_t>(grid.size())) {
      ++clip;
      idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(grid.size()) - 1);
    }
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  const double norm = 1.0 / (static_cast<double>(ensemble.size()) * h);
  for (double& c : counts) c *= norm;
  if (clipped) *clipped = clip;
  return counts;
}

inline Fig1Snapshot fig1_snapshot(const ParticleEnsemble& ensemble, const ProximalGibbs& pg,
                                  const std::vector<double>& grid) {
  require(ensemble.dim() == 1 && pg.dim() == 1, ErrorKind::dimension_mismatch,
          "fig1 snapshots need a one-dimensional parameter space");
  require(grid.size() >= 2, ErrorKind::invalid_argument, "grid needs at least two nodes");
  Fig1Snapshot snap;
  snap.grid = grid;
  snap.q_density = grid_histogram(ensemble, grid, &snap.clipped);
  const double extent = grid.back();
  const double log_z = quadrature_log_partition(pg, extent, grid.size());
  snap.pq_density.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double theta[1] = {grid[i]};
    snap.pq_density[i] = std::exp(pg.unnorm_log_density(theta) - log_z);
  }
  return snap;
}

inline std::string fig1_csv(const Fig1Snapshot& s) {
  using io::format_real;
  const bool star = !s.qstar_density.empty();
  std::string out = star ? "theta,q_density,pq_density,qstar_proxy_density\n" : "theta,q_density,pq_density\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    out += format_real(s.grid[i]) + "," + format_real(s.q_density[i]) + "," + format_real(s.pq_density[i]);
    if (star) out += "," + format_real(s.qstar_density[i]);
    out += "\n";
  }
  return out;
}

struct RunOptions {
  /// Called after each record is written; throwing simulates a failure.
  std::function<void(std::int64_t)> after_record;
};

struct RunResult {
  std::vector<DiagnosticsRecord> records;
  std::vector<ProximalRecord> proximal;
  ParticleEnsemble final_ensemble;
  RegularityConstants constants;
  TheoryReport theory;
  bool init_moment_compliant = false;
  std::vector<double> envelope;  // theorem-2 bound at each logged iteration
};

namespace detail {

inline nlohmann::json meta_base(const ExperimentConfig& c, const RegularityConstants& k, const TheoryReport& t,
                                double sampler_step, std::size_t d) {
  nlohmann::json m = nlohmann::json::object();
  m["library_version"] = kLibraryVersion;
  for (const auto& [key, v] : config_to_table(c)) {
    const std::string name = "config." + key;
    if (v.is_bool()) m[name] = std::get<bool>(v.data);
    else if (v.is_int()) m[name] = std::get<std::int64_t>(v.data);
    else if (v.is_float()) m[name] = std::get<double>(v.data);
    else if (v.is_string()) m[name] = std::get<std::string>(v.data);
    else m[name] = toml::format_value(v);
  }
  m["param_dim"] = d;
  m["sampler.resolved_step"] = sampler_step;
  m["init.distribution"] = "N(0, init_std^2 I)";
  m["constants.C1"] = k.C1;
  m["constants.C2"] = k.C2;
  m["constants.C3"] = k.C3;
  m["constants.C4"] = k.C4;
  m["constants.C5"] = k.C5;
  m["constants.unit_ball_convention"] = k.unit_ball_convention;
  m["constants.effective_loss_bound"] = k.effective_loss_bound;
  m["theory.log_alpha"] = t.alpha.log;
  m["theory.alpha"] = t.alpha.value();
  m["theory.moment_bound"] = t.moment_bound;
  m["theory.delta_bar"] = t.delta_bar;
  m["theory.envelope_floor"] = std::isfinite(t.envelope_floor) ? nlohmann::json(t.envelope_floor) : nlohmann::json("inf");
  m["theory.envelope_vacuous"] = t.envelope_vacuous;
  m["theory.iteration_complexity_gauge"] =
      std::isfinite(t.iteration_complexity_gauge) ? nlohmann::json(t.iteration_complexity_gauge) : nlohmann::json("inf");
  return m;
}

inline void write_meta(const std::filesystem::path& dir, const nlohmann::json& m) {
  io::atomic_write(dir / "meta.json", m.dump(2) + "\n");
}

}  // namespace detail

inline RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const RunOptions& options = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  };

  const RngSpec rng{cfg.seed};
  const Dataset data = build_dataset(cfg);
  const std::size_t d_in = cfg.dataset.kind == DatasetKind::file ? data.d_in() : static_cast<std::size_t>(cfg.dataset.d_in);
  const NeuronModel model = build_model(cfg, d_in);
  const LossModel loss{cfg.loss};
  const std::size_t d = model.param_dim();
  const double lambda = cfg.hp.lambda;
  const double lambda_prime = cfg.hp.lambda_prime;

  RunResult result;
  result.constants = model_constants(model, loss, data);
  result.theory = make_theory_report(cfg.hp.eta, lambda, lambda_prime, result.constants, d);
  const double sampler_step = cfg.sampler.resolved_step(lambda, lambda_prime);

  fs::create_directories(out_dir);
  if (cfg.fig1.snapshots) fs::create_directories(out_dir / "fig1");
  nlohmann::json meta = detail::meta_base(cfg, result.constants, result.theory, sampler_step, d);
  meta["status"] = "running";
  meta["aborted"] = true;  // until the run completes
  detail::write_meta(out_dir, meta);

  const fs::path records_partial = out_dir / "records.csv.partial";
  const fs::path proximal_partial = out_dir / "proximal.csv.partial";
  std::ofstream records_out(records_partial, std::ios::binary | std::ios::trunc);
  std::ofstream proximal_out(proximal_partial, std::ios::binary | std::ios::trunc);
  require(records_out && proximal_out, ErrorKind::io, "cannot write into " + out_dir.string());
  records_out << record_header() << "\n";
  proximal_out << proximal_header() << "\n";

  const std::set<std::int64_t> proximal_iters(cfg.proximal_iterations.begin(), cfg.proximal_iterations.end());
  std::vector<double> grid;
  std::vector<double> qstar;
  if (cfg.fig1.snapshots) grid = uniform_grid(cfg.fig1.grid_extent, static_cast<std::size_t>(cfg.fig1.grid_points));

  auto finish_files = [&] {
    records_out.close();
    proximal_out.close();
    fs::rename(records_partial, out_dir / "records.csv");
    fs::rename(proximal_partial, out_dir / "proximal.csv");
  };

  bool any_jitter = false;
  auto log_state = [&](std::int64_t k, const ParticleEnsemble& e) {
    const ObjectiveReport rep = duality_gap_report(e, model, loss, data, lambda, lambda_prime, cfg.estimator, rng, k);
    any_jitter = any_jitter || rep.jittered;
    DiagnosticsRecord r;
    r.iter = k;
    r.sim_time = static_cast<double>(k) * cfg.hp.eta;
    r.risk = rep.risk;
    r.moment = rep.moment;
    r.entropy_est = rep.entropy;
    r.primal_L = rep.primal;
    r.dual_D = rep.dual;
    r.gap = rep.gap;
    r.kl_q_pq = rep.kl_q_pq;
    r.kl_indep = rep.kl_indep;
    r.second_moment = rep.second_moment;
    r.moment_bound_ok = rep.second_moment <= result.theory.moment_bound;
    r.primal_se = rep.primal_se;
    r.dual_se = rep.dual_se;
    r.gap_se = rep.gap_se;
    if (proximal_iters.count(k) != 0) {
      const ProximalGibbs pg(rep.dual_vector, data, model, lambda, lambda_prime);
      const PrimalComponents lpq = proximal_primal_objective(pg, loss, cfg.sampler, cfg.estimator, rng, k);
      ProximalRecord p;
      p.iter = k;
      p.primal_pq = lpq.primal;
      p.primal_pq_se = lpq.standard_error;
      p.dual_D = rep.dual;
      p.kl_q_pq = rep.kl_q_pq;
      p.check = theorem4_check(rep, lpq, lambda, model.bound(), result.constants.C2);
      proximal_out << proximal_line(p) << "\n" << std::flush;
      result.proximal.push_back(p);
    }
    if (cfg.fig1.snapshots) {
      const ProximalGibbs pg(rep.dual_vector, data, model, lambda, lambda_prime);
      Fig1Snapshot snap = fig1_snapshot(e, pg, grid);
      snap.qstar_density = qstar;
      io::atomic_write(out_dir / "fig1" / ("snapshot_" + std::to_string(k) + ".csv"), fig1_csv(snap));
    }
    r.wallclock_ms = elapsed_ms();
    records_out << record_line(r) << "\n" << std::flush;
    result.records.push_back(r);
    if (options.after_record) options.after_record(k);
  };

  try {
    ParticleEnsemble ensemble = initialize_ensemble(static_cast<std::size_t>(cfg.particles), d, cfg.init_std, rng);
    result.init_moment_compliant = moment_ok(ensemble, result.theory.moment_bound);
    if (cfg.fig1.qstar_proxy) {
      // long small-step reference run; its final histogram stands in for q_*
      HyperParams ref = cfg.hp;
      ref.eta = cfg.hp.eta / 10.0;
      ref.steps = cfg.hp.steps * 10;
      const ParticleEnsemble star = run_dynamics(ensemble, model, loss, data, ref, RngSpec{cfg.seed ^ 0x5157A8ULL});
      qstar = grid_histogram(star, grid.empty() ? uniform_grid(cfg.fig1.grid_extent,
                                                               static_cast<std::size_t>(cfg.fig1.grid_points))
                                                : grid);
      meta["fig1.qstar_proxy_label"] = "proxy: reference run with eta/10 and 10x steps";
    }
    log_state(0, ensemble);
    ensemble = run_dynamics(std::move(ensemble), model, loss, data, cfg.hp, rng, cfg.schedule(), log_state);
    result.final_ensemble = ensemble;

    double min_primal = result.records.front().primal_L;
    for (const auto& r : result.records) min_primal = std::min(min_primal, r.primal_L);
    const double initial_gap = result.records.front().primal_L - min_primal;
    nlohmann::json env = nlohmann::json::array();
    for (const auto& r : result.records) {
      const double v = theorem2_envelope(r.iter, cfg.hp.eta, result.theory.alpha, lambda, result.theory.delta_bar,
                                         initial_gap);
      result.envelope.push_back(v);
      env.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
    }

    io::atomic_write(out_dir / "final_particles.csv", io::matrix_csv(io::theta_header(d), ensemble.params()));
    finish_files();
    meta["theory.initial_gap_estimate"] = initial_gap;
    meta["theory.envelope"] = env;
    meta["init.moment_compliant"] = result.init_moment_compliant;
    meta["entropy.jittered"] = any_jitter;
    meta["records"] = result.records.size();
    meta["status"] = "complete";
    meta["aborted"] = false;
    meta["wallclock_total_ms"] = elapsed_ms();
    detail::write_meta(out_dir, meta);
  } catch (const std::exception& ex) {
    finish_files();
    meta["status"] = "aborted";
    meta["aborted"] = true;
    meta["error"] = ex.what();
    meta["records"] = result.records.size();
    detail::write_meta(out_dir, meta);
    throw;
  }
  return result;
}

}  // namespace mfld

#endif  // MFLD_HARNESS_HPP
