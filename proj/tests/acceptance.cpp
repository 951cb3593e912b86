// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rareyield/harness.hpp"
#include "rareyield/normal.hpp"
#include "rareyield/rareyield.h"

using namespace rareyield;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSeeds = 10;
const char* const kPresets[] = {"sram108", "sram569", "sram1093"};

int g_failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  std::printf("criterion %d %s: %s (%s)\n", id, pass ? "PASS" : "FAIL", title.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

/// One method run plus the evaluator-call delta it caused.
struct TrackedRun {
  RunRecord record;
  std::uint64_t eval_delta = 0;
};

TrackedRun tracked(Testbench& bench, const MethodConfig& cfg, std::uint64_t seed) {
  const std::uint64_t before = bench.eval_count();
  RngStream rng(seed);
  TrackedRun t;
  t.record = run_method(bench, cfg, rng);
  t.eval_delta = bench.eval_count() - before;
  return t;
}

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Counters for criterion 8, fed by every run below.
std::size_t g_runs_checked = 0;
std::size_t g_runs_mismatched = 0;

void account(const TrackedRun& t) {
  ++g_runs_checked;
  if (t.record.total_sims != t.eval_delta) ++g_runs_mismatched;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const bool ok = round2(speedup(699000, 5300)) == 131.89 &&
                  round2(speedup(931000, 3400)) == 273.82 &&
                  round2(speedup(1189000, 6400)) == 185.78 &&
                  round2(100.0 * relative_error(4.67e-5, 4.80e-5)) == 2.71 &&
                  round2(100.0 * relative_error(5.25e-5, 4.80e-5)) == 9.38;
  const double s = seconds_since(t0);
  report(1, ok && s < 1.0, "table arithmetic",
         fmt("131.89x 273.82x 185.78x 2.71%% 9.38%%, %.3f s", s));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const double t = -normal_quantile(1e-3);
  const std::vector<double> w{0.6, 0.8};
  Testbench bench = make_linear_bench(w, t);
  const Proposal q = Proposal::shifted(ParamVector{t * w[0], t * w[1]});
  double sum = 0.0;
  double var = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RngStream rng(seed);
    const PfEstimate e = is_estimate(sample_proposal(q, 2000, rng), q, bench);
    sum += e.pf;
    var += e.est_std * e.est_std;
  }
  const double mean = sum / 200.0;
  const double se = std::sqrt(var) / 200.0;
  const double z = std::abs(mean - 1e-3) / se;

  Testbench b1 = make_linear_bench(w, t);
  Testbench b2 = make_linear_bench(w, t);
  RngStream r1(7);
  RngStream r2(7);
  const PfEstimate mc = mc_estimate(b1, 2000, r1);
  const PfEstimate is = is_estimate(sample_proposal(Proposal::standard(2), 2000, r2),
                                    Proposal::standard(2), b2);
  const bool identical = mc.pf == is.pf && mc.est_std == is.est_std && mc.n_sims == is.n_sims;
  const double s = seconds_since(t0);
  report(2, z <= 3.0 && identical && s < 60.0, "estimator soundness",
         "mean " + fmt("%.5e", mean) + ", " + fmt("%.2f", z) +
             " combined SE from 1e-3, standard-proposal identity " +
             (identical ? "bit-exact" : "differs") + fmt(", %.2f s", s));
}

void criterion3() {
  // "Exactly" is read as equal up to floating-point rounding of the two
  // algebraically identical expressions.
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Testbench bench = make_linear_bench({1.0, 0.0}, 1.5 + 0.3 * seed);
    RngStream rng(seed);
    const std::uint64_t n = 200000;
    const PfEstimate e = mc_estimate(bench, n, rng);
    const double expect = std::sqrt((1.0 - e.pf) / (e.pf * static_cast<double>(n)));
    worst = std::max(worst, std::abs(*e.fom - expect) / expect);
  }
  const bool exact_ratio = *fom(5e-6, 5e-5) == 0.1;
  report(3, worst <= 1e-12 && exact_ratio, "FOM contract",
         fmt("max relative deviation of MC FOM %.1e", worst) +
             (exact_ratio ? ", fom(5e-6, 5e-5) == 0.1" : ", fom(5e-6, 5e-5) != 0.1"));
}

struct PresetResults {
  std::map<Method, MethodSummary> summaries;
  std::map<Method, double> median_sims;
  double mc_sims = 0.0;
};

std::map<std::string, PresetResults> run_presets() {
  std::map<std::string, PresetResults> out;
  for (const char* preset : kPresets) {
    PresetResults& pr = out[preset];
    pr.mc_sims = static_cast<double>(preset_mc_sims(preset));
    for (Method m : kAllMethods) {
      MethodConfig cfg;
      cfg.method = m;
      Testbench bench = dims_preset(preset);
      std::vector<RunResult> runs;
      std::vector<double> sims;
      for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        TrackedRun t = tracked(bench, cfg, seed);
        account(t);
        runs.push_back(classify_run(seed, std::move(t.record), bench.analytic_pf()));
        if (!runs.back().failed()) sims.push_back(static_cast<double>(runs.back().record.total_sims));
      }
      pr.median_sims[m] = median(sims);
      pr.summaries[m] = summarize_runs(m, std::move(runs), pr.mc_sims);
    }
  }
  return out;
}

void criterion4(const std::map<std::string, PresetResults>& results, double secs) {
  bool ok = secs <= 600.0;
  std::string worst;
  for (const auto& [preset, pr] : results) {
    for (const auto& [m, s] : pr.summaries) {
      const double limit = m == Method::kOptimis ? 0.10 : 0.20;
      bool fom_ok = true;
      for (const auto& r : s.runs) {
        if (r.record.converged && !(r.record.final_fom() && *r.record.final_fom() <= 0.1)) {
          fom_ok = false;
        }
      }
      const bool good = s.failed <= 3 && s.mean_rel_err && *s.mean_rel_err <= limit && fom_ok;
      if (!good) {
        ok = false;
        worst += " " + preset + "/" + method_name(m);
      }
    }
  }
  std::string detail;
  for (const auto& [preset, pr] : results) {
    detail += preset + ":";
    for (const auto& [m, s] : pr.summaries) {
      detail += " " + method_name(m) + " " + std::to_string(s.failed) + "F " +
                (s.mean_rel_err ? fmt("%.1f%%", 100.0 * *s.mean_rel_err) : "-");
    }
    detail += "; ";
  }
  detail += fmt("%.0f s", secs);
  if (!worst.empty()) detail += "; out of bounds:" + worst;
  report(4, ok, "end-to-end accuracy", detail);
}

void criterion5(const std::map<std::string, PresetResults>& results) {
  int ordered = 0;
  bool ratio_ok = true;
  std::string detail;
  for (const auto& [preset, pr] : results) {
    const auto& ms = pr.median_sims;
    const double o = ms.at(Method::kOptimis), c = ms.at(Method::kAcs), a = ms.at(Method::kAis),
                 h = ms.at(Method::kHscs), n = ms.at(Method::kMnis);
    const bool order = o < c && c <= a && a < h && h <= n;
    if (order) ++ordered;
    detail += preset + " median sims optimis " + fmt("%.0f", o) + " acs " + fmt("%.0f", c) +
              " ais " + fmt("%.0f", a) + " hscs " + fmt("%.0f", h) + " mnis " + fmt("%.0f", n) +
              (order ? " ordered; " : " not ordered; ");
    double lowest = INFINITY;
    for (const auto& [m, s] : pr.summaries) {
      if (!s.mean_speedup || *s.mean_speedup < 10.0) ratio_ok = false;
      if (s.mean_speedup) lowest = std::min(lowest, *s.mean_speedup);
    }
    detail += fmt("min speedup %.1fx; ", lowest);
  }
  detail += std::to_string(ordered) + "/3 presets ordered";
  report(5, ordered >= 2 && ratio_ok, "efficiency ordering", detail);
}

void criterion6() {
  Testbench bench = dims_preset("sram108");
  MethodConfig cfg;
  std::string detail;
  bool ok = true;
  for (auto [base, budget] : {std::pair{Method::kAis, std::uint64_t{1200}},
                              std::pair{Method::kAcs, std::uint64_t{1100}}}) {
    const AblationResult r = run_ablation(bench, base, {budget, budget}, cfg, kSeeds, 0);
    std::size_t wins = 0;
    std::size_t ties = 0;
    for (const auto& row : r.rows) {
      if (row.converged_ours && (!row.converged_origin || row.is_sims_ours < row.is_sims_origin)) {
        ++wins;
      } else if (row.converged_ours && row.is_sims_ours == row.is_sims_origin) {
        ++ties;
      }
    }
    ok = ok && wins >= 7;
    detail += method_name(base) + " (" + std::to_string(budget) + " presamples) " +
              std::to_string(wins) + "/10 fewer IS sims, " + std::to_string(ties) + " ties; ";
  }
  detail.resize(detail.size() - 2);
  report(6, ok, "ablation reproduction", detail);
}

void criterion7() {
  const double t = -normal_quantile(5e-5);
  const std::vector<double> w{0.6, 0.8};
  auto make = [&] { return make_two_region_bench(w, t); };
  const double golden = *make().analytic_pf();
  std::string detail = fmt("golden %.3e; ", golden);
  bool ok = true;
  for (Method m : {Method::kAcs, Method::kOptimis}) {
    MethodConfig cfg;
    cfg.method = m;
    std::size_t both = 0;
    std::size_t within = 0;
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      Testbench bench = make();
      const TrackedRun tr = tracked(bench, cfg, seed);
      account(tr);
      const RunRecord& r = tr.record;
      if (r.proposals.size() >= 2) {
        int pos = 0;
        int neg = 0;
        for (const auto& c : r.proposals[1].components()) {
          (dot(c.mean.coords(), w) > 0 ? pos : neg)++;
        }
        if (pos > 0 && neg > 0) ++both;
      }
      sum += r.final_pf();
      if (relative_error(r.final_pf(), golden) <= 0.15) ++within;
    }
    // The mean over seeds is what must land within 15%.
    const double mean_err = relative_error(sum / kSeeds, golden);
    ok = ok && both >= 9 && mean_err <= 0.15;
    detail += method_name(m) + " both regions by round 2 in " + std::to_string(both) +
              "/10, mean pf error " + fmt("%.1f%%", 100.0 * mean_err) + " (" +
              std::to_string(within) + "/10 runs within 15%); ";
  }
  std::size_t slower = 0;
  std::size_t mnis_converged = 0;
  double mnis_err = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    MethodConfig cfg;
    cfg.method = Method::kMnis;
    Testbench bm = make();
    const TrackedRun rm = tracked(bm, cfg, seed);
    account(rm);
    cfg.method = Method::kAcs;
    Testbench ba = make();
    const TrackedRun ra = tracked(ba, cfg, seed);
    account(ra);
    if (rm.record.converged) {
      ++mnis_converged;
      mnis_err += relative_error(rm.record.final_pf(), golden);
    }
    if (ra.record.converged &&
        (!rm.record.converged || rm.record.total_sims > ra.record.total_sims)) {
      ++slower;
    }
  }
  ok = ok && slower >= 7;
  detail += "mnis needs more sims than acs in " + std::to_string(slower) + "/10";
  if (mnis_converged > 0) {
    detail += fmt(" (mnis converged runs miss golden by %.0f%% on average)",
                  100.0 * mnis_err / static_cast<double>(mnis_converged));
  }
  report(7, ok, "multi-region discovery", detail);
}

void criterion8() {
  // Extra benches beyond the presets and the two-region runs above.
  for (Method m : kAllMethods) {
    MethodConfig cfg;
    cfg.method = m;
    cfg.max_rounds = 20;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Testbench lin = make_linear_bench({0.6, 0.8, 0.0}, 3.5);
      account(tracked(lin, cfg, seed));
      Testbench quad = make_quadratic_bench({1.0, 1.0, 0.0, 0.0}, 5.0, 0.1);
      account(tracked(quad, cfg, seed));
      Testbench far = make_linear_bench({1.0, 0.0}, 8.0);
      account(tracked(far, cfg, seed));
    }
  }
  report(8, g_runs_mismatched == 0 && g_runs_checked > 0, "accounting exactness",
         std::to_string(g_runs_checked) + " runs checked, " +
             std::to_string(g_runs_mismatched) + " mismatches");
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) ++count_b;
  }
  if (rel.size() != count_b) return false;
  files = rel.size();
  for (const auto& r : rel) {
    if (!fs::exists(b / r) || read_text_file(a / r) != read_text_file(b / r)) return false;
  }
  return true;
}

void criterion9() {
  const fs::path root = fs::temp_directory_path() / "rareyield_acceptance_determinism";
  fs::remove_all(root);
  bool ok = true;
  for (int rep = 0; rep < 2 && ok; ++rep) {
    ry_config* cfg = nullptr;
    ry_bench* bench = nullptr;
    ry_experiment* exp = nullptr;
    const std::string dir = (root / ("rep" + std::to_string(rep))).string();
    std::size_t wins[2];
    std::size_t n = 0;
    ok = ry_config_parse(R"({"method": "all", "runs": 3, "seed": 21})", &cfg) == RY_OK &&
         ry_bench_create(cfg, nullptr, &bench) == RY_OK &&
         ry_experiment_run(bench, cfg, &exp) == RY_OK &&
         ry_experiment_write(exp, dir.c_str()) == RY_OK &&
         ry_ablation_run(cfg, dir.c_str(), wins, &n) == RY_OK;
    ry_experiment_free(exp);
    ry_bench_free(bench);
    ry_config_free(cfg);
  }
  std::size_t files = 0;
  ok = ok && same_tree(root / "rep0", root / "rep1", files);
  fs::remove_all(root);
  report(9, ok, "determinism",
         std::to_string(files) + " output files compared byte for byte");
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    criterion3();
    const auto t0 = std::chrono::steady_clock::now();
    const auto presets = run_presets();
    const double secs = seconds_since(t0);
    criterion4(presets, secs);
    criterion5(presets);
    criterion6();
    criterion7();
    criterion8();
    criterion9();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d of 9 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
