#pragma once

// Experiment configuration files (JSON objects). Unknown keys are errors.
//
//   method               "mnis" | "hscs" | "ais" | "acs" | "optimis" | "all"
//   presample_budget, batch_size, max_rounds, k_clusters, patience,
//   refine_rounds        non-negative integers
//   fom_threshold, sigma positive reals
//   presampler           "hypersphere" | "ray_bisection"
//   bench                preset name or "external:<command>"
//   threshold            overrides the bench threshold
//   fail_direction       "greater" | "less" (external benches)
//   dim                  dimension of an external bench
//   timeout_s            per-evaluation timeout of an external bench
//   golden, mc_sims      reference P_f and MC sim count
//   runs, seed           experiment size and first seed
//   max_rel_err          failed-run cutoff against golden
//   ablation_ais_budget, ablation_acs_budget, ablation_bench

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rareyield/methods.hpp"
#include "rareyield/testbench.hpp"

namespace rareyield {

struct ExperimentConfig {
  MethodConfig method;
  /// Empty means every method.
  std::vector<Method> methods;
  std::string bench = "sram108";
  std::optional<double> threshold;
  std::optional<FailDirection> fail_direction;
  std::optional<std::size_t> dim;
  double timeout_s = 30.0;
  std::optional<double> golden;
  std::optional<double> mc_sims;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  double max_rel_err = 0.5;
  std::uint64_t ablation_ais_budget = 1200;
  std::uint64_t ablation_acs_budget = 1100;
  std::string ablation_bench = "sram108";
};

/// Parses a JSON object. Throws kConfig naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// "all" or a single method name.
std::vector<Method> parse_method_list(const std::string& name);

/// Preset name or "external:<command>"; applies the threshold override.
/// Preset golden and MC counts are filled into cfg when unset.
Testbench make_bench(const std::string& spec, ExperimentConfig& cfg);

}  // namespace rareyield
