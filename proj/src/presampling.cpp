#include "rareyield/presampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

std::vector<double> random_direction(std::size_t d, const CounterRng& rng,
                                     std::uint64_t index) {
  std::vector<double> u(d);
  rng.fill_normal(index, u.data(), d);
  double n2 = 0.0;
  for (double v : u) n2 += v * v;
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : u) v *= inv;
  return u;
}

std::vector<double> scaled(std::span<const double> u, double r) {
  std::vector<double> x(u.begin(), u.end());
  for (double& v : x) v *= r;
  return x;
}

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

void set_min_norm_seed(PresampleResult& out) {
  const ParamVector* best = nullptr;
  double best_norm = 0.0;
  for (const auto& s : out.seeds) {
    const double n = s.squared_norm();
    if (!best || n < best_norm) {
      best = &s;
      best_norm = n;
    }
  }
  if (best) out.min_norm_seed = *best;
}

/// Evaluation meter for budgeted searches.
class Budget {
 public:
  explicit Budget(std::optional<std::uint64_t> cap) : cap_(cap) {}
  bool exhausted() const { return cap_ && used_ >= *cap_; }
  bool fails(Testbench& bench, std::span<const double> x) {
    ++used_;
    return bench.fails(x);
  }
  std::uint64_t used() const { return used_; }

 private:
  std::optional<std::uint64_t> cap_;
  std::uint64_t used_ = 0;
};

/// Smallest scale s in (0, 1] (within tol in norm units) at which s*x still
/// fails, given that x itself fails.
std::vector<double> radial_bisect(Testbench& bench, std::vector<double> x,
                                  double tol, Budget& budget) {
  const double norm = std::sqrt(squared_norm(x));
  if (norm == 0.0) return x;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> probe(x.size());
  while ((hi - lo) * norm > tol && !budget.exhausted()) {
    const double mid = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < x.size(); ++i) probe[i] = mid * x[i];
    if (budget.fails(bench, probe)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  for (double& v : x) v *= hi;
  return x;
}

/// Recursively zeroes the coordinates in `block`, keeping each change that
/// leaves x failing.
void prune_block(Testbench& bench, std::vector<double>& x,
                 std::span<const std::size_t> block, Budget& budget) {
  if (block.empty() || budget.exhausted()) return;
  std::vector<double> candidate = x;
  bool changes = false;
  for (std::size_t j : block) {
    changes = changes || candidate[j] != 0.0;
    candidate[j] = 0.0;
  }
  if (!changes) return;
  if (budget.fails(bench, candidate)) {
    x = std::move(candidate);
    return;
  }
  if (block.size() == 1) return;
  const std::size_t half = block.size() / 2;
  prune_block(bench, x, block.first(half), budget);
  prune_block(bench, x, block.subspan(half), budget);
}

}  // namespace

double default_search_radius(std::size_t d) {
  const double root = std::sqrt(static_cast<double>(d));
  return std::max(root + 6.0, 2.0 * root);
}

std::vector<double> default_radii(std::size_t d, std::size_t shells) {
  require(shells >= 1, ErrorCode::kInvalidArgument, "need at least one shell");
  const double lo = 2.0;
  const double hi = default_search_radius(d);
  std::vector<double> radii(shells);
  for (std::size_t i = 0; i < shells; ++i) {
    radii[i] = shells == 1 ? hi
                           : lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(shells - 1);
  }
  return radii;
}

PresampleResult hypersphere_presample(Testbench& bench,
                                      std::span<const double> radii,
                                      std::size_t n_per_shell, RngStream& rng) {
  require(!radii.empty(), ErrorCode::kInvalidArgument,
          "hypersphere presampling needs at least one radius");
  require(n_per_shell >= 1, ErrorCode::kInvalidArgument,
          "hypersphere presampling needs n_per_shell >= 1");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(std::isfinite(radii[i]) && radii[i] > 0.0 &&
                (i == 0 || radii[i] > radii[i - 1]),
            ErrorCode::kInvalidArgument,
            "radii must be positive and strictly increasing");
  }
  PresampleResult out;
  const std::size_t d = bench.dim();
  for (double r : radii) {
    const std::uint64_t first = rng.take(n_per_shell);
    for (std::size_t k = 0; k < n_per_shell; ++k) {
      auto x = scaled(random_direction(d, rng.rng(), first + k), r);
      ++out.n_evals;
      if (bench.fails(x)) out.seeds.emplace_back(std::move(x));
    }
  }
  set_min_norm_seed(out);
  return out;
}

PresampleResult ray_bisection_presample(Testbench& bench, std::size_t n_rays,
                                        double r_max, double tol,
                                        RngStream& rng,
                                        std::optional<std::uint64_t> max_evals) {
  require(n_rays >= 1, ErrorCode::kInvalidArgument, "need n_rays >= 1");
  require(r_max > 0.0 && tol > 0.0, ErrorCode::kInvalidArgument,
          "ray bisection needs r_max > 0 and tol > 0");
  Budget budget(max_evals);
  PresampleResult out;
  const std::size_t d = bench.dim();
  const std::uint64_t first = rng.take(n_rays);
  for (std::size_t k = 0; k < n_rays && !budget.exhausted(); ++k) {
    const auto u = random_direction(d, rng.rng(), first + k);
    if (!budget.fails(bench, scaled(u, r_max))) continue;
    double lo = 0.0;
    double hi = r_max;
    while (hi - lo > tol && !budget.exhausted()) {
      const double mid = 0.5 * (lo + hi);
      if (budget.fails(bench, scaled(u, mid))) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    out.seeds.emplace_back(scaled(u, hi));
  }
  out.n_evals = budget.used();
  set_min_norm_seed(out);
  return out;
}

PresampleResult presample(PresamplerKind kind, Testbench& bench,
                          std::uint64_t budget, RngStream& rng) {
  require(budget >= 1, ErrorCode::kInvalidArgument,
          "presample budget must be positive");
  const std::size_t d = bench.dim();
  if (kind == PresamplerKind::kHypersphere) {
    const std::size_t shells = std::min<std::uint64_t>(8, budget);
    const auto radii = default_radii(d, shells);
    return hypersphere_presample(bench, radii, budget / shells, rng);
  }
  return ray_bisection_presample(bench, budget, default_search_radius(d), 1e-3,
                                 rng, budget);
}

ParamVector min_norm_point(Testbench& bench, const ParamVector& seed,
                           RngStream& rng, const MinNormOptions& options) {
  require(options.tol > 0.0, ErrorCode::kInvalidArgument,
          "min_norm_point needs tol > 0");
  Budget budget(options.max_evals);
  std::vector<double> x = seed.vec();
  require(budget.fails(bench, x), ErrorCode::kInvalidArgument,
          "min_norm_point: seed is not a failure point");
  const std::size_t d = x.size();

  x = radial_bisect(bench, std::move(x), options.tol, budget);

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < d; ++j) {
    if (x[j] != 0.0) active.push_back(j);
  }
  for (std::size_t i = active.size(); i > 1; --i) {
    std::swap(active[i - 1], active[rng.below(i)]);
  }
  // Top-level blocks of ~1/16 of the coordinates; rejected ones split.
  const std::size_t block = std::max<std::size_t>(1, active.size() / 16);
  for (std::size_t start = 0; start < active.size(); start += block) {
    const std::size_t len = std::min(block, active.size() - start);
    prune_block(bench, x, std::span(active).subspan(start, len), budget);
  }
  x = radial_bisect(bench, std::move(x), options.tol, budget);

  // Candidates are pulled in to `norm - gain` before the test, so each
  // acceptance is real progress. A rejected step is retried with the
  // opposite sign; step and gain shrink only after both signs fail on a
  // coordinate already in use.
  double norm = std::sqrt(squared_norm(x));
  double step = 0.25 * norm;
  double gain = 0.05 * norm;
  std::vector<double> candidate(d);
  auto try_move = [&](std::size_t j, double delta) {
    candidate = x;
    candidate[j] += delta;
    const double target = std::max(norm - gain, 0.0);
    const double cand_norm = std::sqrt(squared_norm(candidate));
    if (cand_norm > target && cand_norm > 0.0) {
      const double s = target / cand_norm;
      for (double& v : candidate) v *= s;
    }
    if (!budget.fails(bench, candidate)) return false;
    x = candidate;
    norm = std::sqrt(squared_norm(x));
    return true;
  };
  for (std::size_t round = 0; round < options.rounds && !budget.exhausted();
       ++round) {
    active.clear();
    for (std::size_t j = 0; j < d; ++j) {
      if (x[j] != 0.0) active.push_back(j);
    }
    const bool explore = active.empty() || rng.uniform() < 0.5;
    const std::size_t j = explore ? rng.below(d) : active[rng.below(active.size())];
    const double delta = step * rng.normal();
    const bool ok = try_move(j, delta) || (!budget.exhausted() && try_move(j, -delta));
    if (ok) {
      step = std::min(step * 1.2, 0.25 * norm);
      gain = std::min(gain * 1.5, 0.25 * norm);
    } else if (!explore) {
      step = std::max(step * 0.9, options.tol);
      gain = std::max(gain * 0.8, 0.01 * options.tol);
    }
  }
  x = radial_bisect(bench, std::move(x), options.tol, budget);
  return ParamVector(std::move(x));
}

}  // namespace rareyield
