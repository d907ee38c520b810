#ifndef MFLD_CONFIG_HPP
#define MFLD_CONFIG_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/dynamics.hpp"
#include "mfld/estimators.hpp"
#include "mfld/gibbs.hpp"
#include "mfld/model.hpp"
#include "mfld/toml.hpp"

namespace mfld {

enum class DatasetKind { none, file, teacher_student };

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::none: return "none";
    case DatasetKind::file: return "file";
    case DatasetKind::teacher_student: return "teacher-student";
  }
  return "?";
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::teacher_student;
  std::string path;              // file
  std::int64_t n = 200;          // teacher-student
  std::int64_t d_in = 5;         // teacher-student and none
  std::int64_t teacher_width = 5;
  double noise_std = 0.05;

  bool operator==(const DatasetSpec&) const = default;
};

struct Fig1Spec {
  bool snapshots = false;
  bool qstar_proxy = false;
  double grid_extent = 4.0;
  std::int64_t grid_points = 201;

  bool operator==(const Fig1Spec&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 2022;
  DatasetSpec dataset;
  NeuronKind neuron = NeuronKind::tanh_affine;
  double output_scale = 1.0;
  LossKind loss = LossKind::squared;
  HyperParams hp;
  std::int64_t particles = 400;
  double init_std = 0.5;
  std::int64_t log_every = 100;
  std::vector<std::int64_t> log_iterations;
  std::vector<std::int64_t> proximal_iterations;
  EstimatorConfig estimator;
  SamplerConfig sampler;
  Fig1Spec fig1;

  LogSchedule schedule() const {
    LogSchedule s;
    s.every = log_every;
    s.iterations.insert(log_iterations.begin(), log_iterations.end());
    s.iterations.insert(proximal_iterations.begin(), proximal_iterations.end());
    return s;
  }

  void validate() const {
    hp.validate();
    estimator.validate();
    require(particles >= 1, ErrorKind::config, "dynamics.particles must be >= 1");
    require(init_std >= 0.0 && std::isfinite(init_std), ErrorKind::config, "dynamics.init_std must be >= 0");
    require(log_every >= 0, ErrorKind::config, "logging.every must be >= 0");
    require(static_cast<std::size_t>(particles) > estimator.knn_k, ErrorKind::config,
            "dynamics.particles must exceed estimator.knn_k");
    require(estimator.is_samples >= 2, ErrorKind::config, "estimator.is_samples must be >= 2");
    require(output_scale > 0.0 && std::isfinite(output_scale), ErrorKind::config, "model.output_scale must be > 0");
    require(sampler.step >= 0.0 && std::isfinite(sampler.step), ErrorKind::config, "sampler.step must be >= 0");
    for (auto k : log_iterations)
      require(k >= 0 && k <= hp.steps, ErrorKind::config, "logging.iterations outside [0, steps]");
    for (auto k : proximal_iterations)
      require(k >= 0 && k <= hp.steps, ErrorKind::config, "logging.proximal_iterations outside [0, steps]");
    if (!proximal_iterations.empty())
      require(sampler.count > estimator.knn_k, ErrorKind::config, "sampler.count must exceed estimator.knn_k");
    switch (dataset.kind) {
      case DatasetKind::file:
        require(!dataset.path.empty(), ErrorKind::config, "dataset.path required for kind = \"file\"");
        break;
      case DatasetKind::teacher_student:
        require(dataset.n >= 1, ErrorKind::config, "dataset.n must be >= 1");
        require(dataset.d_in >= 1, ErrorKind::config, "dataset.d_in must be >= 1");
        require(dataset.teacher_width >= 1 && dataset.teacher_width <= dataset.d_in, ErrorKind::config,
                "dataset.teacher_width must be in [1, d_in]");
        require(dataset.noise_std >= 0.0, ErrorKind::config, "dataset.noise_std must be >= 0");
        break;
      case DatasetKind::none:
        require(dataset.d_in >= 1, ErrorKind::config, "dataset.d_in must be >= 1");
        break;
    }
    if (fig1.snapshots || fig1.qstar_proxy) {
      require(neuron == NeuronKind::tanh_linear, ErrorKind::config, "fig1 output needs model.neuron = \"tanh-linear\"");
      require(fig1.grid_extent > 0.0 && fig1.grid_points >= 2, ErrorKind::config, "fig1 grid is invalid");
    }
  }
};

namespace detail {

class TableReader {
 public:
  explicit TableReader(const toml::Table& t) : table_(t) {}

  const toml::Value* find(const std::string& key) {
    const auto it = table_.find(key);
    if (it == table_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void get(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (v->is_float()) out = std::get<double>(v->data);
      else if (v->is_int()) out = static_cast<double>(std::get<std::int64_t>(v->data));
      else throw Error(ErrorKind::config, key + " must be a number");
    }
  }
  void get(const std::string& key, std::int64_t& out) {
    if (const auto* v = find(key)) {
      require(v->is_int(), ErrorKind::config, key + " must be an integer");
      out = std::get<std::int64_t>(v->data);
    }
  }
  void get(const std::string& key, std::size_t& out) {
    std::int64_t tmp = static_cast<std::int64_t>(out);
    get(key, tmp);
    require(tmp >= 0, ErrorKind::config, key + " must be non-negative");
    out = static_cast<std::size_t>(tmp);
  }
  void get(const std::string& key, std::uint64_t& out, int) {
    if (const auto* v = find(key)) {
      require(v->is_int() && std::get<std::int64_t>(v->data) >= 0, ErrorKind::config,
              key + " must be a non-negative integer");
      out = static_cast<std::uint64_t>(std::get<std::int64_t>(v->data));
    }
  }
  void get(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      require(v->is_bool(), ErrorKind::config, key + " must be a boolean");
      out = std::get<bool>(v->data);
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      require(v->is_string(), ErrorKind::config, key + " must be a string");
      out = std::get<std::string>(v->data);
    }
  }
  void get(const std::string& key, std::vector<std::int64_t>& out) {
    if (const auto* v = find(key)) {
      require(v->is_array(), ErrorKind::config, key + " must be an array of integers");
      out.clear();
      for (const auto& e : std::get<toml::Array>(v->data)) {
        require(e.is_int(), ErrorKind::config, key + " must be an array of integers");
        out.push_back(std::get<std::int64_t>(e.data));
      }
    }
  }

  void reject_unknown() const {
    for (const auto& [key, v] : table_)
      if (used_.count(key) == 0) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  }

 private:
  const toml::Table& table_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Builds a config from a parsed table. Unknown keys are errors.
inline ExperimentConfig config_from_table(const toml::Table& table) {
  ExperimentConfig c;
  detail::TableReader rd(table);
  rd.get("seed", c.seed, 0);

  std::string kind = std::string(to_string(c.dataset.kind));
  rd.get("dataset.kind", kind);
  if (kind == "none") c.dataset.kind = DatasetKind::none;
  else if (kind == "file") c.dataset.kind = DatasetKind::file;
  else if (kind == "teacher-student") c.dataset.kind = DatasetKind::teacher_student;
  else throw Error(ErrorKind::config, "dataset.kind must be none, file or teacher-student");
  rd.get("dataset.path", c.dataset.path);
  rd.get("dataset.n", c.dataset.n);
  rd.get("dataset.d_in", c.dataset.d_in);
  rd.get("dataset.teacher_width", c.dataset.teacher_width);
  rd.get("dataset.noise_std", c.dataset.noise_std);

  std::string neuron = std::string(to_string(c.neuron));
  rd.get("model.neuron", neuron);
  const auto nk = parse_neuron_kind(neuron);
  require(nk.has_value(), ErrorKind::config, "model.neuron must be tanh-affine, scaled-tanh or tanh-linear");
  c.neuron = *nk;
  rd.get("model.output_scale", c.output_scale);
  std::string loss = std::string(to_string(c.loss));
  rd.get("model.loss", loss);
  const auto lk = parse_loss_kind(loss);
  require(lk.has_value(), ErrorKind::config, "model.loss must be squared or logistic");
  c.loss = *lk;

  rd.get("dynamics.lambda", c.hp.lambda);
  rd.get("dynamics.lambda_prime", c.hp.lambda_prime);
  rd.get("dynamics.eta", c.hp.eta);
  rd.get("dynamics.steps", c.hp.steps);
  rd.get("dynamics.particles", c.particles);
  rd.get("dynamics.init_std", c.init_std);

  rd.get("logging.every", c.log_every);
  rd.get("logging.iterations", c.log_iterations);
  rd.get("logging.proximal_iterations", c.proximal_iterations);

  rd.get("estimator.knn_k", c.estimator.knn_k);
  rd.get("estimator.is_samples", c.estimator.is_samples);

  rd.get("sampler.count", c.sampler.count);
  rd.get("sampler.step", c.sampler.step);
  rd.get("sampler.burn_in", c.sampler.burn_in);
  rd.get("sampler.thin", c.sampler.thin);

  rd.get("fig1.snapshots", c.fig1.snapshots);
  rd.get("fig1.qstar_proxy", c.fig1.qstar_proxy);
  rd.get("fig1.grid_extent", c.fig1.grid_extent);
  rd.get("fig1.grid_points", c.fig1.grid_points);

  rd.reject_unknown();
  return c;
}

inline toml::Table config_to_table(const ExperimentConfig& c) {
  toml::Table t;
  auto i64 = [](std::int64_t v) { return toml::Value{v}; };
  auto ints = [](const std::vector<std::int64_t>& v) {
    toml::Array a;
    for (auto x : v) a.push_back(toml::Value{x});
    return toml::Value{a};
  };
  t["seed"] = i64(static_cast<std::int64_t>(c.seed));
  t["dataset.kind"] = toml::Value{std::string(to_string(c.dataset.kind))};
  t["dataset.path"] = toml::Value{c.dataset.path};
  t["dataset.n"] = i64(c.dataset.n);
  t["dataset.d_in"] = i64(c.dataset.d_in);
  t["dataset.teacher_width"] = i64(c.dataset.teacher_width);
  t["dataset.noise_std"] = toml::Value{c.dataset.noise_std};
  t["model.neuron"] = toml::Value{std::string(to_string(c.neuron))};
  t["model.output_scale"] = toml::Value{c.output_scale};
  t["model.loss"] = toml::Value{std::string(to_string(c.loss))};
  t["dynamics.lambda"] = toml::Value{c.hp.lambda};
  t["dynamics.lambda_prime"] = toml::Value{c.hp.lambda_prime};
  t["dynamics.eta"] = toml::Value{c.hp.eta};
  t["dynamics.steps"] = i64(c.hp.steps);
  t["dynamics.particles"] = i64(c.particles);
  t["dynamics.init_std"] = toml::Value{c.init_std};
  t["logging.every"] = i64(c.log_every);
  t["logging.iterations"] = ints(c.log_iterations);
  t["logging.proximal_iterations"] = ints(c.proximal_iterations);
  t["estimator.knn_k"] = i64(static_cast<std::int64_t>(c.estimator.knn_k));
  t["estimator.is_samples"] = i64(static_cast<std::int64_t>(c.estimator.is_samples));
  t["sampler.count"] = i64(static_cast<std::int64_t>(c.sampler.count));
  t["sampler.step"] = toml::Value{c.sampler.step};
  t["sampler.burn_in"] = i64(static_cast<std::int64_t>(c.sampler.burn_in));
  t["sampler.thin"] = i64(static_cast<std::int64_t>(c.sampler.thin));
  t["fig1.snapshots"] = toml::Value{c.fig1.snapshots};
  t["fig1.qstar_proxy"] = toml::Value{c.fig1.qstar_proxy};
  t["fig1.grid_extent"] = toml::Value{c.fig1.grid_extent};
  t["fig1.grid_points"] = i64(c.fig1.grid_points);
  return t;
}

inline ExperimentConfig parse_config(std::string_view text) { return config_from_table(toml::parse(text)); }

inline std::string serialize_config(const ExperimentConfig& c) { return toml::serialize(config_to_table(c)); }

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str());
  // relative dataset paths resolve against the config file's directory
  if (c.dataset.kind == DatasetKind::file && !c.dataset.path.empty() &&
      std::filesystem::path(c.dataset.path).is_relative())
    c.dataset.path = (path.parent_path() / c.dataset.path).lexically_normal().string();
  return c;
}

/// MFLD_SEED, when set, replaces the configured seed.
inline void apply_env_overrides(ExperimentConfig& c) {
  if (const char* s = std::getenv("MFLD_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    require(end != nullptr && *end == '\0', ErrorKind::config, std::string("MFLD_SEED is not an integer: ") + s);
    c.seed = v;
  }
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_table(a) == config_to_table(b);
}

}  // namespace mfld

#endif  // MFLD_CONFIG_HPP
