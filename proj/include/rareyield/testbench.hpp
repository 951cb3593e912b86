#pragma once

// Performance evaluators standing in for circuit simulation. A Testbench
// pairs an evaluator with a failure specification and counts every call.

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rareyield/variation_space.hpp"

namespace rareyield {

enum class FailDirection { kGreater, kLess };

struct FailureSpec {
  double threshold = 0.0;
  FailDirection direction = FailDirection::kGreater;

  bool fails(double metric) const noexcept {
    return direction == FailDirection::kGreater ? metric > threshold
                                                : metric < threshold;
  }
};

/// Maps a point of the variation space to a scalar metric. Implementations
/// must be deterministic.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(std::span<const double> x) = 0;
};

/// y = w.x
class LinearEvaluator final : public Evaluator {
 public:
  explicit LinearEvaluator(std::vector<double> w);
  double evaluate(std::span<const double> x) override;
  const std::vector<double>& w() const noexcept { return w_; }
  double w_norm() const noexcept { return w_norm_; }

 private:
  std::vector<double> w_;
  double w_norm_;
};

/// y = |w.x|: two mirror-image failure regions.
class TwoRegionEvaluator final : public Evaluator {
 public:
  explicit TwoRegionEvaluator(std::vector<double> w);
  double evaluate(std::span<const double> x) override;
  const std::vector<double>& w() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

/// y = s + c*s*|s| with s = w.x: monotone in the projection, curved in x.
class QuadraticEvaluator final : public Evaluator {
 public:
  QuadraticEvaluator(std::vector<double> w, double curvature);
  double evaluate(std::span<const double> x) override;
  const std::vector<double>& w() const noexcept { return w_; }
  double curvature() const noexcept { return c_; }

 private:
  std::vector<double> w_;
  double c_;
};

class Testbench {
 public:
  Testbench(std::string name, std::size_t dim,
            std::shared_ptr<Evaluator> evaluator, FailureSpec spec,
            std::optional<double> analytic_pf = std::nullopt);

  Testbench(Testbench&&) noexcept = default;
  Testbench& operator=(Testbench&&) noexcept = default;

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  const FailureSpec& failure_spec() const noexcept { return spec_; }
  const std::optional<double>& analytic_pf() const noexcept { return analytic_pf_; }
  const Evaluator& evaluator() const noexcept { return *evaluator_; }

  /// Runs the evaluator once and bumps the counter.
  double evaluate(std::span<const double> x);
  double evaluate(const ParamVector& x) { return evaluate(x.coords()); }
  bool fails(const ParamVector& x) { return spec_.fails(evaluate(x)); }
  bool fails(std::span<const double> x) { return spec_.fails(evaluate(x)); }

  std::uint64_t eval_count() const noexcept {
    return counter_->load(std::memory_order_relaxed);
  }

 private:
  std::string name_;
  std::size_t dim_;
  std::shared_ptr<Evaluator> evaluator_;
  FailureSpec spec_;
  std::optional<double> analytic_pf_;
  std::unique_ptr<std::atomic<std::uint64_t>> counter_;
};

/// Fails iff w.x > t. Analytic P_f = Phi(-t/|w|).
Testbench make_linear_bench(std::vector<double> w, double t,
                            std::string name = "linear");
/// Fails iff |w.x| > t (t > 0). Analytic P_f = 2 Phi(-t/|w|).
Testbench make_two_region_bench(std::vector<double> w, double t,
                                std::string name = "two_region");
/// Fails iff w.x + c (w.x)|w.x| > t. Analytic P_f = Phi(-r/|w|) where r
/// solves c r|r| + r = t.
Testbench make_quadratic_bench(std::vector<double> w, double t, double curvature,
                               std::string name = "quadratic");

/// Boundary of the quadratic metric along the projection: the r with
/// c r|r| + r = t.
double quadratic_boundary(double t, double curvature);

/// Unit vector along coordinate 0 of a d-dimensional space.
std::vector<double> unit_vector(std::size_t d, std::size_t axis = 0);

/// Number of coordinates that carry the metric in the SRAM presets.
inline constexpr std::size_t kPresetDominantParams = 6;
inline constexpr std::uint64_t kPresetSeed = 20240611;

bool is_preset(const std::string& name);
/// Golden failure probability of a named preset.
double preset_golden_pf(const std::string& name);
/// Reference Monte Carlo simulation count reported for a named preset.
std::uint64_t preset_mc_sims(const std::string& name);

/// Linear presets "sram108", "sram569", "sram1093". The weight vector is a
/// seeded random unit vector carried by kPresetDominantParams coordinates;
/// the threshold puts the analytic P_f on the preset's golden value.
Testbench dims_preset(const std::string& name, std::uint64_t seed = kPresetSeed);

}  // namespace rareyield
