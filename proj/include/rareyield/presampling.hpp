#pragma once

// Failure-region discovery ahead of importance sampling.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rareyield/testbench.hpp"
#include "rareyield/variation_space.hpp"

namespace rareyield {

struct PresampleResult {
  /// Failure points, ordered by (ray or shell, sample index).
  std::vector<ParamVector> seeds;
  std::uint64_t n_evals = 0;
  /// Smallest-norm seed; ties go to the earliest seed.
  std::optional<ParamVector> min_norm_seed;
};

enum class PresamplerKind { kHypersphere, kRayBisection };

/// Shell radii used when none are given: `shells` evenly spaced values from
/// 2 to max(sqrt(d) + 6, 2 sqrt(d)).
std::vector<double> default_radii(std::size_t d, std::size_t shells = 8);

/// Outer search radius used by both presamplers by default.
double default_search_radius(std::size_t d);

/// Draws n_per_shell points uniformly on each sphere ||x|| = r and keeps
/// the failing ones.
PresampleResult hypersphere_presample(Testbench& bench,
                                      std::span<const double> radii,
                                      std::size_t n_per_shell, RngStream& rng);

/// Casts rays in uniform random directions. A ray that fails at r_max is
/// bisected down to its boundary radius (within tol) and the just-failing
/// point becomes a seed. `max_evals` caps the total evaluator calls; a
/// bisection cut short by the cap still yields its failing endpoint.
PresampleResult ray_bisection_presample(
    Testbench& bench, std::size_t n_rays, double r_max, double tol,
    RngStream& rng, std::optional<std::uint64_t> max_evals = std::nullopt);

/// Runs either presampler inside an evaluation budget with default shapes.
PresampleResult presample(PresamplerKind kind, Testbench& bench,
                          std::uint64_t budget, RngStream& rng);

struct MinNormOptions {
  double tol = 1e-3;
  /// Coordinate-perturbation rounds after the pruning pass.
  std::size_t rounds = 200;
  /// Evaluation cap for the whole search, including the seed check.
  std::optional<std::uint64_t> max_evals;
};

/// Searches for a failure point of small norm starting from a failing seed.
///
/// 1. Bisects along the seed ray toward the origin.
/// 2. Prunes coordinates: blocks of coordinates are zeroed together and the
///    change kept whenever the point still fails; rejected blocks are split
///    in half until single coordinates remain.
/// 3. Runs `rounds` random single-coordinate perturbations. A candidate that
///    would grow the norm is rescaled to a slightly smaller norm first; only
///    failing candidates of smaller norm are accepted.
/// 4. Bisects along the final ray again.
///
/// The result fails and its norm never exceeds the seed's.
ParamVector min_norm_point(Testbench& bench, const ParamVector& seed,
                           RngStream& rng, const MinNormOptions& options = {});

}  // namespace rareyield
