#pragma once

// Importance-sampling drivers. Each one is a loop of proposal
// construction, a batch of weighted simulations and a FOM check.
//
// The five drivers are reconstructions from one-line method descriptions,
// not ports of the original implementations:
//
//   mnis     hypersphere seeds -> one min-norm point -> fixed shifted proposal
//   hscs     hypersphere seeds -> k-means -> min-norm refined centroids
//            -> fixed mixture
//   ais      clustered seeds -> mixture whose means follow the importance-
//            weighted failure samples of each round
//   acs      like ais, but re-clusters the accumulated failure samples every
//            round (components may disappear)
//   optimis  ray-bisection seeds -> acs-style rounds that also adapt each
//            component's sigma

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rareyield/estimation.hpp"
#include "rareyield/presampling.hpp"

namespace rareyield {

enum class Method { kMnis, kHscs, kAis, kAcs, kOptimis };

std::string method_name(Method m);
Method parse_method(const std::string& name);
inline constexpr Method kAllMethods[] = {Method::kMnis, Method::kHscs, Method::kAis,
                                         Method::kAcs, Method::kOptimis};

struct MethodConfig {
  Method method = Method::kOptimis;
  std::uint64_t presample_budget = 1000;
  std::size_t batch_size = 500;
  std::size_t max_rounds = 100;
  std::size_t k_clusters = 4;
  double fom_threshold = 0.1;
  double sigma = 1.0;
  /// Consecutive rounds at or below the threshold needed to stop.
  std::size_t patience = 2;
  /// Perturbation rounds of the full min-norm search (mnis, hscs).
  std::size_t refine_rounds = 200;
  /// Replaces the method's own presampler when set (ablation swap).
  std::optional<PresamplerKind> presampler;

  /// Throws kConfig when an invariant is violated.
  void validate() const;
};

struct Cluster {
  ParamVector centroid;
  std::vector<std::size_t> members;
};

/// Lloyd iterations from k-means++ seeding until the assignment stops
/// changing or 100 iterations pass. An emptied cluster is re-seeded at the
/// point farthest from its centroid. Ties go to the lowest index.
std::vector<Cluster> kmeans_cluster(std::span<const ParamVector> points,
                                    std::size_t k, RngStream& rng);

/// sum(w_i x_i) / sum(w_i).
ParamVector weighted_mean_update(std::span<const ParamVector> points,
                                 std::span<const double> weights);

/// Weighted mean with every coordinate that is not at least `z` standard
/// errors away from zero set to zero. Returns nothing when the effective
/// sample size is below `min_ess`.
std::optional<ParamVector> screened_mean(std::span<const ParamVector> points,
                                         std::span<const double> weights,
                                         double z = 3.0, double min_ess = 8.0);

/// Kish effective sample size (sum w)^2 / sum w^2; zero for empty or
/// all-zero weights.
double effective_sample_size(std::span<const double> weights);

/// Raises positive weights to the largest power beta in [0, 1] whose
/// effective sample size reaches `target_ess`. The raw weights come back
/// unchanged when they already do; tempered weights are scaled so the
/// largest is 1. Zero weights stay zero.
std::vector<double> temper_weights(std::span<const double> weights,
                                   double target_ess);

RunRecord run_mnis(Testbench& bench, const MethodConfig& cfg, RngStream& rng);
RunRecord run_hscs(Testbench& bench, const MethodConfig& cfg, RngStream& rng);
RunRecord run_ais(Testbench& bench, const MethodConfig& cfg, RngStream& rng);
RunRecord run_acs(Testbench& bench, const MethodConfig& cfg, RngStream& rng);
RunRecord run_optimis(Testbench& bench, const MethodConfig& cfg, RngStream& rng);

/// Dispatches on cfg.method.
RunRecord run_method(Testbench& bench, const MethodConfig& cfg, RngStream& rng);

}  // namespace rareyield
