#pragma once

// Experiment protocol: repeated seeded runs, failed-run accounting, table
// metrics, the presampler ablation, and trace artifacts (CSV, SVG).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rareyield/estimation.hpp"
#include "rareyield/methods.hpp"

namespace rareyield {

/// |pf - golden| / golden. Throws kInvalidArgument unless golden > 0.
double relative_error(double pf, double golden);
/// mc_sims / method_sims. Throws kInvalidArgument unless method_sims > 0.
double speedup(double mc_sims, double method_sims);

enum class RunVerdict { kOk, kNoSeeds, kNotConverged, kInaccurate };
std::string verdict_name(RunVerdict v);

struct RunResult {
  std::uint64_t seed = 0;
  RunRecord record;
  RunVerdict verdict = RunVerdict::kOk;
  /// Against the golden value, when one is known.
  std::optional<double> rel_err;

  bool failed() const { return verdict != RunVerdict::kOk; }
};

/// A run fails when it found no seeds, did not converge, or ended more
/// than max_rel_err away from golden (only checked when golden is known).
RunResult classify_run(std::uint64_t seed, RunRecord record,
                       std::optional<double> golden, double max_rel_err = 0.5);

struct MethodSummary {
  Method method = Method::kOptimis;
  std::size_t n_runs = 0;
  std::size_t failed = 0;
  bool all_failed() const { return failed == n_runs; }

  // Over successful runs only; empty when every run failed. Relative
  // error needs a golden value and speedup an MC reference count.
  std::optional<double> mean_pf;
  std::optional<double> mean_rel_err;
  std::optional<double> mean_sims;
  std::optional<double> mean_speedup;
  /// Successful run with the lowest relative error, ties to fewer sims.
  /// Without a golden value, the successful run with fewest sims.
  std::optional<RunResult> best;

  std::vector<RunResult> runs;
};

/// Aggregates classified runs. mean_speedup is mc_sims / mean_sims.
MethodSummary summarize_runs(Method method, std::vector<RunResult> runs,
                             std::optional<double> mc_sims);

struct ExperimentOptions {
  std::size_t n_runs = 10;
  std::uint64_t seed0 = 0;
  /// Defaults to the bench's analytic P_f.
  std::optional<double> golden;
  std::optional<double> mc_sims;
  double max_rel_err = 0.5;
};

/// Runs cfg.method with seeds seed0 .. seed0 + n_runs - 1, one after the
/// other on the same bench.
MethodSummary run_experiment(Testbench& bench, const MethodConfig& cfg,
                             const ExperimentOptions& opts);

struct AblationRow {
  std::uint64_t seed = 0;
  double pf_origin = 0.0;
  std::uint64_t is_sims_origin = 0;
  bool converged_origin = false;
  double pf_ours = 0.0;
  std::uint64_t is_sims_ours = 0;
  bool converged_ours = false;
};

struct AblationResult {
  Method base = Method::kAis;
  std::uint64_t budget = 0;
  std::vector<AblationRow> rows;
};

struct AblationArms {
  std::uint64_t budget_origin = 0;
  std::uint64_t budget_ours = 0;
  PresamplerKind origin = PresamplerKind::kHypersphere;
  PresamplerKind ours = PresamplerKind::kRayBisection;
};

/// Paired runs of `base` (ais or acs) that differ only in the presampler.
/// IS-phase sims are total sims minus presample sims. Throws kConfig on
/// unequal budgets or an unsupported base method.
AblationResult run_ablation(Testbench& bench, Method base, const AblationArms& arms,
                            const MethodConfig& base_cfg, std::size_t n_runs,
                            std::uint64_t seed0);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

/// "round,cumulative_sims,pf,fom" plus one row per round; an undefined
/// fom is an empty field.
std::string format_trace_csv(const RunRecord& record);
std::vector<RoundRecord> parse_trace_csv(const std::string& text);
void emit_trace_csv(const RunRecord& record, const std::filesystem::path& path);
std::vector<RoundRecord> read_trace_csv(const std::filesystem::path& path);

/// One row per run: method, seed, verdict, sims and final estimate.
std::string format_runs_csv(std::span<const MethodSummary> summaries);
/// One row per method with the table columns.
std::string format_summary_csv(std::span<const MethodSummary> summaries);
std::string format_ablation_csv(std::span<const AblationResult> results);

struct LabeledTrace {
  std::string label;
  std::vector<RoundRecord> rounds;
};

/// Two stacked panels, pf and fom against cumulative sims, both with a
/// log-scale y axis, a golden line on the first and a 0.1 line on the
/// second. One polyline per trace and panel.
std::string render_convergence_svg(std::span<const LabeledTrace> traces,
                                   double golden, double fom_threshold = 0.1);
void emit_convergence_svg(std::span<const LabeledTrace> traces, double golden,
                          const std::filesystem::path& path,
                          double fom_threshold = 0.1);

/// Writes text to path, throwing kIo on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rareyield
