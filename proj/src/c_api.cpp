#include "rareyield/rareyield.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "rareyield/config.hpp"
#include "rareyield/error.hpp"
#include "rareyield/harness.hpp"

struct ry_config {
  rareyield::ExperimentConfig cfg;
};

struct ry_bench {
  rareyield::Testbench bench;
  std::optional<double> golden;
  std::optional<double> mc_sims;
};

struct ry_experiment {
  std::vector<rareyield::MethodSummary> summaries;
  double golden = 0.0;
  double fom_threshold = 0.1;
};

namespace {

thread_local std::string g_last_error;

ry_status to_status(rareyield::ErrorCode code) {
  using rareyield::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return RY_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch: return RY_ERR_DIMENSION;
    case ErrorCode::kEvaluation: return RY_ERR_EVALUATION;
    case ErrorCode::kIo: return RY_ERR_IO;
    case ErrorCode::kConfig: return RY_ERR_CONFIG;
    case ErrorCode::kNumeric: return RY_ERR_NUMERIC;
  }
  return RY_ERR_INTERNAL;
}

ry_status set_error(ry_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

/// Runs f, mapping exceptions onto status codes.
template <class F>
ry_status guarded(F&& f) {
  try {
    f();
    return RY_OK;
  } catch (const rareyield::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RY_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RY_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(RY_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  rareyield::require(p != nullptr, rareyield::ErrorCode::kInvalidArgument,
                     std::string(what) + " must not be NULL");
}

std::string trace_file_name(rareyield::Method m, std::uint64_t seed) {
  return rareyield::method_name(m) + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace

extern "C" {

const char* ry_version(void) { return "0.1.0"; }

const char* ry_last_error(void) { return g_last_error.c_str(); }

const char* ry_status_name(ry_status status) {
  switch (status) {
    case RY_OK: return "ok";
    case RY_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RY_ERR_DIMENSION: return "dimension_mismatch";
    case RY_ERR_EVALUATION: return "evaluation_error";
    case RY_ERR_IO: return "io_error";
    case RY_ERR_CONFIG: return "config_error";
    case RY_ERR_NUMERIC: return "numeric_error";
    case RY_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

ry_status ry_config_default(ry_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ry_config{};
  });
}

ry_status ry_config_load(const char* path, ry_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ry_config{rareyield::load_config(path)};
  });
}

ry_status ry_config_parse(const char* json_text, ry_config** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = new ry_config{rareyield::parse_config(json_text)};
  });
}

void ry_config_free(ry_config* cfg) { delete cfg; }

ry_status ry_config_set_methods(ry_config* cfg, const char* methods) {
  return guarded([&] {
    need(cfg, "cfg");
    need(methods, "methods");
    try {
      cfg->cfg.methods = rareyield::parse_method_list(methods);
    } catch (const rareyield::Error&) {
      rareyield::fail(rareyield::ErrorCode::kConfig,
                      std::string("unknown method '") + methods + "'");
    }
    cfg->cfg.method.method = cfg->cfg.methods.front();
  });
}

ry_status ry_config_set_bench(ry_config* cfg, const char* bench_spec) {
  return guarded([&] {
    need(cfg, "cfg");
    need(bench_spec, "bench_spec");
    cfg->cfg.bench = bench_spec;
  });
}

ry_status ry_config_set_runs(ry_config* cfg, size_t runs) {
  return guarded([&] {
    need(cfg, "cfg");
    rareyield::require(runs >= 1, rareyield::ErrorCode::kConfig,
                       "runs must be at least 1");
    cfg->cfg.runs = runs;
  });
}

ry_status ry_config_set_seed(ry_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

ry_status ry_bench_create(const ry_config* cfg, const char* spec, ry_bench** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    rareyield::ExperimentConfig c = cfg->cfg;
    rareyield::Testbench bench = rareyield::make_bench(spec ? spec : c.bench, c);
    *out = new ry_bench{std::move(bench), c.golden, c.mc_sims};
  });
}

ry_status ry_bench_linear(const double* w, size_t dim, double t, ry_bench** out) {
  return guarded([&] {
    need(w, "w");
    need(out, "out");
    auto b = rareyield::make_linear_bench(std::vector<double>(w, w + dim), t);
    const auto golden = b.analytic_pf();
    *out = new ry_bench{std::move(b), golden, std::nullopt};
  });
}

ry_status ry_bench_two_region(const double* w, size_t dim, double t, ry_bench** out) {
  return guarded([&] {
    need(w, "w");
    need(out, "out");
    auto b = rareyield::make_two_region_bench(std::vector<double>(w, w + dim), t);
    const auto golden = b.analytic_pf();
    *out = new ry_bench{std::move(b), golden, std::nullopt};
  });
}

void ry_bench_free(ry_bench* bench) { delete bench; }

ry_status ry_bench_dim(const ry_bench* bench, size_t* out) {
  return guarded([&] {
    need(bench, "bench");
    need(out, "out");
    *out = bench->bench.dim();
  });
}

ry_status ry_bench_eval_count(const ry_bench* bench, uint64_t* out) {
  return guarded([&] {
    need(bench, "bench");
    need(out, "out");
    *out = bench->bench.eval_count();
  });
}

ry_status ry_bench_analytic_pf(const ry_bench* bench, double* out, int* has) {
  return guarded([&] {
    need(bench, "bench");
    need(out, "out");
    need(has, "has");
    const auto& pf = bench->bench.analytic_pf();
    *has = pf.has_value() ? 1 : 0;
    *out = pf.value_or(0.0);
  });
}

ry_status ry_bench_fails(ry_bench* bench, const double* x, size_t dim, int* out) {
  return guarded([&] {
    need(bench, "bench");
    need(x, "x");
    need(out, "out");
    *out = bench->bench.fails(std::span<const double>(x, dim)) ? 1 : 0;
  });
}

ry_status ry_run_method(ry_bench* bench, const ry_config* cfg, const char* method,
                        uint64_t seed, ry_run_info* out) {
  return guarded([&] {
    need(bench, "bench");
    need(cfg, "cfg");
    need(out, "out");
    rareyield::MethodConfig mc = cfg->cfg.method;
    if (method) mc.method = rareyield::parse_method(method);
    rareyield::RngStream rng(seed);
    const rareyield::RunRecord r = rareyield::run_method(bench->bench, mc, rng);
    out->converged = r.converged ? 1 : 0;
    out->total_sims = r.total_sims;
    out->presample_sims = r.presample_sims;
    out->rounds = r.rounds.size();
    out->final_pf = r.final_pf();
    const auto f = r.final_fom();
    out->has_fom = f.has_value() ? 1 : 0;
    out->final_fom = f.value_or(0.0);
  });
}

ry_status ry_experiment_run(ry_bench* bench, const ry_config* cfg,
                            ry_experiment** out) {
  return guarded([&] {
    need(bench, "bench");
    need(cfg, "cfg");
    need(out, "out");
    const rareyield::ExperimentConfig& c = cfg->cfg;
    rareyield::ExperimentOptions opts;
    opts.n_runs = c.runs;
    opts.seed0 = c.seed;
    opts.golden = c.golden ? c.golden : bench->golden;
    opts.mc_sims = c.mc_sims ? c.mc_sims : bench->mc_sims;
    opts.max_rel_err = c.max_rel_err;
    auto exp = std::make_unique<ry_experiment>();
    exp->golden = opts.golden.value_or(0.0);
    exp->fom_threshold = c.method.fom_threshold;
    std::vector<rareyield::Method> methods = c.methods;
    if (methods.empty()) methods = rareyield::parse_method_list("all");
    for (rareyield::Method m : methods) {
      rareyield::MethodConfig mc = c.method;
      mc.method = m;
      exp->summaries.push_back(rareyield::run_experiment(bench->bench, mc, opts));
    }
    *out = exp.release();
  });
}

void ry_experiment_free(ry_experiment* exp) { delete exp; }

ry_status ry_experiment_method_count(const ry_experiment* exp, size_t* out) {
  return guarded([&] {
    need(exp, "exp");
    need(out, "out");
    *out = exp->summaries.size();
  });
}

ry_status ry_experiment_summary(const ry_experiment* exp, size_t index,
                                ry_method_summary* out) {
  return guarded([&] {
    need(exp, "exp");
    need(out, "out");
    rareyield::require(index < exp->summaries.size(),
                       rareyield::ErrorCode::kInvalidArgument,
                       "summary index out of range");
    const auto& s = exp->summaries[index];
    *out = ry_method_summary{};
    const std::string name = rareyield::method_name(s.method);
    std::strncpy(out->method, name.c_str(), sizeof out->method - 1);
    out->n_runs = s.n_runs;
    out->failed = s.failed;
    out->has_stats = s.mean_pf.has_value() ? 1 : 0;
    out->mean_pf = s.mean_pf.value_or(0.0);
    out->has_rel_err = s.mean_rel_err.has_value() ? 1 : 0;
    out->mean_rel_err = s.mean_rel_err.value_or(0.0);
    out->mean_sims = s.mean_sims.value_or(0.0);
    out->has_speedup = s.mean_speedup.has_value() ? 1 : 0;
    out->mean_speedup = s.mean_speedup.value_or(0.0);
    out->best_seed = s.best ? s.best->seed : 0;
  });
}

ry_status ry_experiment_all_failed(const ry_experiment* exp, int* out) {
  return guarded([&] {
    need(exp, "exp");
    need(out, "out");
    *out = std::all_of(exp->summaries.begin(), exp->summaries.end(),
                       [](const auto& s) { return s.all_failed(); })
               ? 1
               : 0;
  });
}

ry_status ry_experiment_write(const ry_experiment* exp, const char* dir) {
  return guarded([&] {
    need(exp, "exp");
    need(dir, "dir");
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "traces", ec);
    rareyield::require(!ec, rareyield::ErrorCode::kIo,
                       "cannot create " + (root / "traces").string() + ": " +
                           ec.message());
    std::vector<rareyield::LabeledTrace> best;
    for (const auto& s : exp->summaries) {
      for (const auto& r : s.runs) {
        if (r.record.rounds.empty()) continue;
        rareyield::emit_trace_csv(r.record,
                                  root / "traces" / trace_file_name(s.method, r.seed));
      }
      if (s.best) {
        best.push_back({rareyield::method_name(s.method), s.best->record.rounds});
      }
    }
    rareyield::write_text_file(root / "runs.csv",
                               rareyield::format_runs_csv(exp->summaries));
    rareyield::write_text_file(root / "summary.csv",
                               rareyield::format_summary_csv(exp->summaries));
    if (!best.empty()) {
      rareyield::emit_convergence_svg(best, exp->golden, root / "convergence.svg",
                                      exp->fom_threshold);
    }
  });
}

ry_status ry_ablation_run(const ry_config* cfg, const char* dir, size_t wins[2],
                          size_t* n_runs) {
  return guarded([&] {
    need(cfg, "cfg");
    need(dir, "dir");
    need(wins, "wins");
    need(n_runs, "n_runs");
    rareyield::ExperimentConfig c = cfg->cfg;
    rareyield::Testbench bench = rareyield::make_bench(c.ablation_bench, c);
    std::vector<rareyield::AblationResult> results;
    const std::pair<rareyield::Method, std::uint64_t> arms[] = {
        {rareyield::Method::kAis, c.ablation_ais_budget},
        {rareyield::Method::kAcs, c.ablation_acs_budget}};
    for (std::size_t i = 0; i < 2; ++i) {
      rareyield::AblationArms a;
      a.budget_origin = a.budget_ours = arms[i].second;
      results.push_back(rareyield::run_ablation(bench, arms[i].first, a, c.method,
                                                c.runs, c.seed));
      wins[i] = static_cast<size_t>(std::count_if(
          results.back().rows.begin(), results.back().rows.end(),
          [](const rareyield::AblationRow& r) {
            return r.converged_ours &&
                   (!r.converged_origin || r.is_sims_ours < r.is_sims_origin);
          }));
    }
    *n_runs = c.runs;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    rareyield::require(!ec, rareyield::ErrorCode::kIo,
                       std::string("cannot create ") + dir + ": " + ec.message());
    rareyield::write_text_file(std::filesystem::path(dir) / "ablation.csv",
                               rareyield::format_ablation_csv(results));
  });
}

ry_status ry_plot_traces(const char* traces_dir, double golden, const char* out_svg) {
  return guarded([&] {
    need(traces_dir, "traces_dir");
    need(out_svg, "out_svg");
    namespace fs = std::filesystem;
    rareyield::require(golden > 0.0, rareyield::ErrorCode::kInvalidArgument,
                       "golden must be positive");
    std::error_code ec;
    fs::directory_iterator it(traces_dir, ec);
    rareyield::require(!ec, rareyield::ErrorCode::kIo,
                       std::string("cannot read ") + traces_dir + ": " + ec.message());
    std::vector<fs::path> files;
    for (const auto& entry : it) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<rareyield::LabeledTrace> traces;
    for (const auto& f : files) {
      const std::string text = rareyield::read_text_file(f);
      if (text.rfind("round,cumulative_sims,pf,fom\n", 0) != 0) continue;
      traces.push_back({f.stem().string(), rareyield::parse_trace_csv(text)});
    }
    rareyield::require(!traces.empty(), rareyield::ErrorCode::kIo,
                       std::string("no trace CSVs in ") + traces_dir);
    rareyield::emit_convergence_svg(traces, golden, out_svg);
  });
}

}  // extern "C"
