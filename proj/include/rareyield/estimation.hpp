#pragma once

// Failure-probability estimators and the FOM stopping rule.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rareyield/testbench.hpp"
#include "rareyield/variation_space.hpp"

namespace rareyield {

struct PfEstimate {
  double pf = 0.0;
  /// Standard deviation of the estimator (not of a single sample).
  double est_std = 0.0;
  std::uint64_t n_sims = 0;
  /// est_std / pf; empty when pf == 0.
  std::optional<double> fom;
};

/// FOM rho = est_std / pf. Empty (undefined) when pf == 0.
std::optional<double> fom(double est_std, double pf);
std::optional<double> fom(const PfEstimate& est);

/// Running sums of the weighted indicators v_i = I_i * w_i, with
/// compensated summation so the result does not depend on the order in
/// which batches are merged.
class IsAccumulator {
 public:
  void add(double v) noexcept;
  void merge(const IsAccumulator& other) noexcept;

  std::uint64_t count() const noexcept { return n_; }
  double sum() const noexcept { return s1_ + c1_; }
  double sum_squares() const noexcept { return s2_ + c2_; }

  /// pf = mean(v); est_std = sqrt((mean(v^2) - pf^2) / n).
  PfEstimate estimate() const;

 private:
  std::uint64_t n_ = 0;
  double s1_ = 0.0, c1_ = 0.0;
  double s2_ = 0.0, c2_ = 0.0;
};

/// Plain Monte Carlo from the nominal distribution; draws n consecutive
/// sample indices from rng.
PfEstimate mc_estimate(Testbench& bench, std::uint64_t n, RngStream& rng);

/// Importance-sampling estimate from samples drawn from q.
PfEstimate is_estimate(std::span<const ParamVector> samples, const Proposal& q,
                       Testbench& bench);

/// Weighted indicators of a batch: v_i = I(fail(x_i)) * p(x_i)/q(x_i).
/// `failed`, when given, receives the failure flags.
std::vector<double> weighted_indicators(std::span<const ParamVector> samples,
                                        const Proposal& q, Testbench& bench,
                                        std::vector<bool>* failed = nullptr);

/// Two estimates over disjoint batches of the same proposal, pooled as if
/// computed in one pass.
PfEstimate merge_estimates(const PfEstimate& a, const PfEstimate& b);

/// Estimates from different proposal epochs, averaged with weights
/// proportional to simulation count; variances pool accordingly.
PfEstimate combine_epochs(std::span<const PfEstimate> epochs);

struct RoundRecord {
  std::uint64_t cumulative_sims = 0;
  double pf = 0.0;
  std::optional<double> fom;
};

/// Why a method run did not produce a usable estimate.
enum class RunStatus { kOk, kNoSeeds, kNotConverged };

struct RunRecord {
  std::vector<RoundRecord> rounds;
  bool converged = false;
  std::uint64_t total_sims = 0;

  // Diagnostics beyond the convergence trace.
  RunStatus status = RunStatus::kOk;
  std::uint64_t presample_sims = 0;
  /// Proposal in force for each round.
  std::vector<Proposal> proposals;

  double final_pf() const { return rounds.empty() ? 0.0 : rounds.back().pf; }
  std::optional<double> final_fom() const {
    return rounds.empty() ? std::nullopt : rounds.back().fom;
  }
};

struct Convergence {
  bool converged = false;
  /// Index of the first round of the qualifying streak.
  std::optional<std::size_t> first_round;
};

/// Converged once fom <= threshold with pf > 0 holds for `patience`
/// consecutive rounds.
Convergence check_converged(std::span<const RoundRecord> trace,
                            double threshold = 0.1, std::size_t patience = 2);
Convergence check_converged(const RunRecord& record, double threshold = 0.1,
                            std::size_t patience = 2);

}  // namespace rareyield
