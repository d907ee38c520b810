// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mfld/checks.hpp"
#include "mfld/mfld.hpp"

namespace fs = std::filesystem;
using namespace mfld;
using checks::CheckResult;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_wallclock(const std::string& csv) {
  const std::size_t col = kRecordColumns.size() - 1;
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    auto fields = io::split(line);
    if (fields.size() != kRecordColumns.size()) return "malformed";
    fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(col));
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += "\n";
  }
  return out;
}

struct Figure2Run {
  RunResult result;
  fs::path dir;
  double seconds = 0.0;
  std::string error;
};

Figure2Run run_figure2(const ExperimentConfig& cfg, const fs::path& dir) {
  Figure2Run run;
  run.dir = dir;
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run.result = run_experiment(cfg, dir);
  } catch (const std::exception& ex) {
    run.error = ex.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

CheckResult figure2_criterion(const ExperimentConfig& cfg, const Figure2Run& run) {
  CheckResult r;
  r.name = "figure-2 analog";
  r.seconds = run.seconds;
  std::ostringstream os;
  os.precision(6);
  if (!run.error.empty()) {
    os << "run failed: " << run.error;
    r.detail = os.str();
    return r;
  }
  const auto& recs = run.result.records;
  bool schedule_ok = !recs.empty() && recs.front().iter == 0 && recs.back().iter == cfg.hp.steps;
  for (std::size_t i = 0; schedule_ok && i < recs.size(); ++i)
    schedule_ok = recs[i].iter == static_cast<std::int64_t>(i) * 100;

  const double gap0 = recs.front().gap;
  const double gap_end = recs.back().gap;
  const bool a = gap_end <= 0.25 * gap0;

  bool b = true, c = true;
  for (const auto& rec : recs) {
    b = b && rec.dual_D <= rec.primal_L + 3.0 * rec.gap_se;
    c = c && rec.moment_bound_ok;
  }

  bool d = run.result.proximal.size() == 3;
  for (std::size_t i = 0; d && i < 3; ++i) {
    const auto& p = run.result.proximal[i];
    d = p.iter == std::array<std::int64_t, 3>{0, 1500, 3000}[i] && p.check.ok;
  }
  const bool fast = run.seconds < 600.0;

  os << "(a) gap " << gap0 << " -> " << gap_end << " ratio " << gap_end / gap0 << " (<= 0.25) " << (a ? "ok" : "FAIL")
     << "; (b) weak duality within 3 SE at all " << recs.size() << " logged iterations " << (b ? "ok" : "FAIL")
     << "; (c) moment bound at every logged iteration " << (c ? "ok" : "FAIL") << "; (d) theorem-4 check";
  for (const auto& p : run.result.proximal)
    os << " [iter " << p.iter << ": " << p.check.lhs << " <= " << p.check.rhs << " + 3*" << p.check.combined_se
       << (p.check.ok ? " ok]" : " FAIL]");
  os << "; schedule " << (schedule_ok ? "ok" : "FAIL") << "; runtime " << run.seconds << " s (limit 600 s)";
  r.passed = a && b && c && d && schedule_ok && fast;
  r.detail = os.str();
  return r;
}

CheckResult determinism_criterion(const Figure2Run& first, const Figure2Run& second) {
  CheckResult r;
  r.name = "determinism";
  std::ostringstream os;
  if (!first.error.empty() || !second.error.empty()) {
    os << "a run failed";
  } else {
    const std::string a = slurp(first.dir / "records.csv");
    const std::string b = slurp(second.dir / "records.csv");
    const bool same = without_wallclock(a) == without_wallclock(b) && !a.empty();
    const bool same_particles = slurp(first.dir / "final_particles.csv") == slurp(second.dir / "final_particles.csv");
    os << "records.csv without wallclock_ms " << (same ? "identical" : "DIFFERENT") << " (" << a.size()
       << " bytes); final particles " << (same_particles ? "identical" : "DIFFERENT");
    r.passed = same && same_particles;
  }
  r.detail = os.str();
  return r;
}

void report(const CheckResult& r, bool& all) {
  std::printf("%s  %-28s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  std::fflush(stdout);
  all = all && r.passed;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <figure2 config>\n", argv[0]);
    return 2;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(argv[1]);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "cannot load %s: %s\n", argv[1], ex.what());
    return 2;
  }

  bool all = true;
  report(checks::check_gaussian_duality(), all);
  report(checks::check_ou_stationarity(), all);
  report(checks::check_entropy_gaussian(), all);
  report(checks::check_log_partition(), all);

  const fs::path base = fs::temp_directory_path() / ("mfld_acceptance_" + std::to_string(::getpid()));
  const Figure2Run first = run_figure2(cfg, base / "run1");
  report(figure2_criterion(cfg, first), all);
  report(checks::check_gradients(), all);
  const Figure2Run second = run_figure2(cfg, base / "run2");
  report(determinism_criterion(first, second), all);
  report(checks::check_theory_formulas(), all);
  fs::remove_all(base);

  std::printf("%s\n", all ? "all acceptance criteria passed" : "some acceptance criteria FAILED");
  return all ? 0 : 1;
}
