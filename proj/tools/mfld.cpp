// mfld: command-line front end for runs, self-checks, proximal Gibbs
// sampling and standalone entropy estimates.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfld/checks.hpp"
#include "mfld/mfld.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir) {
  mfld::ExperimentConfig cfg = mfld::load_config(config_path);
  mfld::apply_env_overrides(cfg);
  const mfld::RunResult res = mfld::run_experiment(cfg, out_dir);
  const auto& first = res.records.front();
  const auto& last = res.records.back();
  std::printf("run complete: %zu records in %s\n", res.records.size(), out_dir.c_str());
  std::printf("gap: iter %lld %.6g -> iter %lld %.6g\n", static_cast<long long>(first.iter), first.gap,
              static_cast<long long>(last.iter), last.gap);
  for (const auto& p : res.proximal)
    std::printf("theorem-4 check at iter %lld: lhs %.6g rhs %.6g -> %s\n", static_cast<long long>(p.iter),
                p.check.lhs, p.check.rhs, p.check.ok ? "ok" : "VIOLATED");
  return 0;
}

int check_command(const std::string& suite) {
  std::vector<mfld::checks::CheckResult> results;
  if (suite == "theory") results = mfld::checks::theory_suite();
  else if (suite == "estimators") results = mfld::checks::estimators_suite();
  else results = mfld::checks::gaussian_oracle_suite();
  bool all = true;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

int gibbs_command(const std::string& config_path, std::size_t count, const std::string& out,
                  const std::string& particles_path) {
  mfld::ExperimentConfig cfg = mfld::load_config(config_path);
  mfld::apply_env_overrides(cfg);
  cfg.validate();
  const mfld::RngSpec rng{cfg.seed};
  const mfld::Dataset data = mfld::build_dataset(cfg);
  const std::size_t d_in =
      cfg.dataset.kind == mfld::DatasetKind::file ? data.d_in() : static_cast<std::size_t>(cfg.dataset.d_in);
  const mfld::NeuronModel model = mfld::build_model(cfg, d_in);
  mfld::ParticleEnsemble ensemble;
  if (particles_path.empty()) {
    ensemble = mfld::initialize_ensemble(static_cast<std::size_t>(cfg.particles), model.param_dim(), cfg.init_std, rng);
  } else {
    ensemble = mfld::ParticleEnsemble(mfld::io::read_numeric_csv(particles_path).values);
    mfld::require(ensemble.dim() == model.param_dim(), mfld::ErrorKind::dimension_mismatch,
                  "particle file dimension does not match the configured model");
  }
  const auto pg = mfld::ProximalGibbs::around(ensemble, model, mfld::LossModel{cfg.loss}, data, cfg.hp.lambda,
                                              cfg.hp.lambda_prime);
  mfld::SamplerConfig sampler = cfg.sampler;
  sampler.count = count;
  const mfld::Matrix samples = mfld::ula_sample(pg, sampler, rng);
  mfld::io::atomic_write(out, mfld::io::matrix_csv(mfld::io::theta_header(samples.cols()), samples));
  std::printf("wrote %zu samples to %s\n", samples.rows(), out.c_str());
  return 0;
}

int entropy_command(const std::string& samples_path, std::size_t k) {
  const auto table = mfld::io::read_numeric_csv(samples_path);
  const auto h = mfld::knn_entropy(table.values, k);
  std::printf("%.17g\n", h.value);
  std::fprintf(stderr, "standard_error=%.6g jittered=%d samples=%zu dim=%zu\n", h.standard_error, h.jittered ? 1 : 0,
               table.values.rows(), table.values.cols());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field Langevin dynamics simulator and duality-gap diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  run->add_option("--config", config_path, "TOML config")->required();
  run->add_option("--out", out_dir, "Run directory")->required();

  std::string suite;
  auto* check = app.add_subcommand("check", "Run a self-check suite (exit 0 on success)");
  check->add_option("--suite", suite, "Suite name")
      ->required()
      ->check(CLI::IsMember({"theory", "estimators", "gaussian-oracle"}));

  std::size_t count = 0;
  std::string gibbs_out, particles_path;
  auto* gibbs = app.add_subcommand("gibbs-sample", "Sample the proximal Gibbs distribution with ULA");
  gibbs->add_option("--config", config_path, "TOML config")->required();
  gibbs->add_option("--count", count, "Number of samples")->required();
  gibbs->add_option("--out", gibbs_out, "Output CSV")->required();
  gibbs->add_option("--particles", particles_path, "Particle CSV defining q (default: initial ensemble)");

  std::string samples_path;
  std::size_t k = 10;
  auto* entropy = app.add_subcommand("entropy", "Kozachenko-Leonenko entropy of a sample CSV");
  entropy->add_option("--samples", samples_path, "Sample CSV")->required();
  entropy->add_option("--k", k, "Neighbor count")->default_val(10);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config_path, out_dir);
    if (*check) return check_command(suite);
    if (*gibbs) return gibbs_command(config_path, count, gibbs_out, particles_path);
    if (*entropy) return entropy_command(samples_path, k);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}
