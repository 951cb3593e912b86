// Command-line front end over the C interface.
//
//   rareyield run --config FILE --method NAME|all --bench PRESET|external:CMD
//                 --runs N --seed S --out DIR
//   rareyield ablation --config FILE --out DIR
//   rareyield plot --traces DIR --golden X --out FILE.svg
//
// Exit status: 0 success, 2 every run failed, 1 usage or configuration error.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rareyield/rareyield.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAllFailed = 2;

int report(ry_status s, const char* what) {
  std::fprintf(stderr, "rareyield: %s: %s (%s)\n", what, ry_last_error(),
               ry_status_name(s));
  return kExitError;
}

/// Owns a C handle.
template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

ry_status load_or_default(const std::string& path, ry_config** out) {
  return path.empty() ? ry_config_default(out) : ry_config_load(path.c_str(), out);
}

std::string opt(int has, double v, const char* fmt) {
  if (!has) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

int cmd_run(const std::string& config, const std::optional<std::string>& method,
            const std::optional<std::string>& bench_spec,
            const std::optional<std::size_t>& runs,
            const std::optional<std::uint64_t>& seed, const std::string& out) {
  Handle<ry_config, ry_config_free> cfg;
  if (ry_status s = load_or_default(config, &cfg.p)) return report(s, "config");
  if (method) {
    if (ry_status s = ry_config_set_methods(cfg.p, method->c_str())) {
      return report(s, "--method");
    }
  }
  if (bench_spec) {
    if (ry_status s = ry_config_set_bench(cfg.p, bench_spec->c_str())) {
      return report(s, "--bench");
    }
  }
  if (runs) {
    if (ry_status s = ry_config_set_runs(cfg.p, *runs)) return report(s, "--runs");
  }
  if (seed) {
    if (ry_status s = ry_config_set_seed(cfg.p, *seed)) return report(s, "--seed");
  }
  Handle<ry_bench, ry_bench_free> bench;
  if (ry_status s = ry_bench_create(cfg.p, nullptr, &bench.p)) return report(s, "bench");
  Handle<ry_experiment, ry_experiment_free> exp;
  if (ry_status s = ry_experiment_run(bench.p, cfg.p, &exp.p)) return report(s, "run");
  if (ry_status s = ry_experiment_write(exp.p, out.c_str())) return report(s, "output");

  std::size_t n = 0;
  ry_experiment_method_count(exp.p, &n);
  std::printf("%-8s %12s %10s %10s %10s %8s\n", "method", "mean_pf", "rel_err",
              "mean_sims", "speedup", "failed");
  for (std::size_t i = 0; i < n; ++i) {
    ry_method_summary m;
    ry_experiment_summary(exp.p, i, &m);
    std::printf("%-8s %12s %10s %10s %10s %5zu/%zu\n", m.method,
                opt(m.has_stats, m.mean_pf, "%.4e").c_str(),
                opt(m.has_stats && m.has_rel_err, 100.0 * m.mean_rel_err, "%.2f%%").c_str(),
                opt(m.has_stats, m.mean_sims, "%.0f").c_str(),
                opt(m.has_stats && m.has_speedup, m.mean_speedup, "%.2fx").c_str(),
                m.failed, m.n_runs);
  }
  int all_failed = 0;
  ry_experiment_all_failed(exp.p, &all_failed);
  return all_failed ? kExitAllFailed : kExitOk;
}

int cmd_ablation(const std::string& config, const std::string& out) {
  Handle<ry_config, ry_config_free> cfg;
  if (ry_status s = load_or_default(config, &cfg.p)) return report(s, "config");
  std::size_t wins[2] = {0, 0};
  std::size_t n = 0;
  if (ry_status s = ry_ablation_run(cfg.p, out.c_str(), wins, &n)) {
    return report(s, "ablation");
  }
  std::printf("ais: ray-bisection arm needed fewer IS sims in %zu/%zu seeds\n", wins[0], n);
  std::printf("acs: ray-bisection arm needed fewer IS sims in %zu/%zu seeds\n", wins[1], n);
  return kExitOk;
}

int cmd_plot(const std::string& traces, double golden, const std::string& out) {
  if (ry_status s = ry_plot_traces(traces.c_str(), golden, out.c_str())) {
    return report(s, "plot");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event failure probability estimation experiments"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> method;
  std::optional<std::string> bench;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::string out;
  auto* run = app.add_subcommand("run", "Repeated seeded runs of one or all methods");
  run->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--method", method, "mnis, hscs, ais, acs, optimis or all");
  run->add_option("--bench", bench, "Preset name or external:<command>");
  run->add_option("--runs", runs, "Runs per method")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "First seed");
  run->add_option("--out", out, "Output directory")->required();

  std::string ab_config;
  std::string ab_out;
  auto* ablation = app.add_subcommand("ablation", "Presampler ablation for ais and acs");
  ablation->add_option("--config", ab_config, "JSON config file")
      ->check(CLI::ExistingFile);
  ablation->add_option("--out", ab_out, "Output directory")->required();

  std::string traces;
  double golden = 0.0;
  std::string svg;
  auto* plot = app.add_subcommand("plot", "Convergence plot of trace CSVs");
  plot->add_option("--traces", traces, "Directory of trace CSVs")->required();
  plot->add_option("--golden", golden, "Reference failure probability")->required();
  plot->add_option("--out", svg, "Output SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }
  if (*run) return cmd_run(config, method, bench, runs, seed, out);
  if (*ablation) return cmd_ablation(ab_config, ab_out);
  return cmd_plot(traces, golden, svg);
}
