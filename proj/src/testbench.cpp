#include "rareyield/testbench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareyield/error.hpp"
#include "rareyield/normal.hpp"

namespace rareyield {
namespace {

double checked_norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) {
    require(std::isfinite(v), ErrorCode::kInvalidArgument,
            "weight vector must be finite");
    s += v * v;
  }
  require(!w.empty(), ErrorCode::kInvalidArgument,
          "invalid dimension: weight vector is empty");
  require(s > 0.0, ErrorCode::kInvalidArgument,
          "weight vector must be non-zero");
  return std::sqrt(s);
}

double projection(const std::vector<double>& w, std::span<const double> x) {
  if (x.size() != w.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "evaluator expects dimension " + std::to_string(w.size()) + ", got " +
             std::to_string(x.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

struct Preset {
  const char* name;
  std::size_t dim;
  double golden_pf;
  std::uint64_t mc_sims;
};

constexpr Preset kPresets[] = {
    {"sram108", 108, 5.01e-5, 699000},
    {"sram569", 569, 2.50e-5, 931000},
    {"sram1093", 1093, 4.80e-5, 1189000},
};

const Preset& find_preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return p;
  }
  fail(ErrorCode::kInvalidArgument, "unknown preset '" + name + "'");
}

}  // namespace

LinearEvaluator::LinearEvaluator(std::vector<double> w)
    : w_(std::move(w)), w_norm_(checked_norm(w_)) {}

double LinearEvaluator::evaluate(std::span<const double> x) {
  return projection(w_, x);
}

TwoRegionEvaluator::TwoRegionEvaluator(std::vector<double> w) : w_(std::move(w)) {
  checked_norm(w_);
}

double TwoRegionEvaluator::evaluate(std::span<const double> x) {
  return std::abs(projection(w_, x));
}

QuadraticEvaluator::QuadraticEvaluator(std::vector<double> w, double curvature)
    : w_(std::move(w)), c_(curvature) {
  checked_norm(w_);
  require(std::isfinite(c_) && c_ >= 0.0, ErrorCode::kInvalidArgument,
          "curvature must be >= 0");
}

double QuadraticEvaluator::evaluate(std::span<const double> x) {
  const double s = projection(w_, x);
  return s + c_ * s * std::abs(s);
}

Testbench::Testbench(std::string name, std::size_t dim,
                     std::shared_ptr<Evaluator> evaluator, FailureSpec spec,
                     std::optional<double> analytic_pf)
    : name_(std::move(name)),
      dim_(dim),
      evaluator_(std::move(evaluator)),
      spec_(spec),
      analytic_pf_(analytic_pf),
      counter_(std::make_unique<std::atomic<std::uint64_t>>(0)) {
  require(dim_ >= 1, ErrorCode::kInvalidArgument, "invalid dimension: d = 0");
  require(evaluator_ != nullptr, ErrorCode::kInvalidArgument,
          "testbench needs an evaluator");
  require(std::isfinite(spec_.threshold), ErrorCode::kInvalidArgument,
          "failure threshold must be finite");
  if (analytic_pf_) {
    require(*analytic_pf_ > 0.0 && *analytic_pf_ < 1.0,
            ErrorCode::kInvalidArgument, "analytic P_f must lie in (0, 1)");
  }
}

double Testbench::evaluate(std::span<const double> x) {
  if (x.size() != dim_) {
    fail(ErrorCode::kDimensionMismatch,
         "testbench '" + name_ + "' expects dimension " + std::to_string(dim_) +
             ", got " + std::to_string(x.size()));
  }
  counter_->fetch_add(1, std::memory_order_relaxed);
  const double y = evaluator_->evaluate(x);
  require(std::isfinite(y), ErrorCode::kEvaluation,
          "evaluator returned a non-finite metric");
  return y;
}

Testbench make_linear_bench(std::vector<double> w, double t, std::string name) {
  const std::size_t d = w.size();
  auto eval = std::make_shared<LinearEvaluator>(std::move(w));
  const double pf = normal_cdf(-t / eval->w_norm());
  return Testbench(std::move(name), d, std::move(eval),
                   {t, FailDirection::kGreater}, pf);
}

Testbench make_two_region_bench(std::vector<double> w, double t,
                                std::string name) {
  require(t > 0.0, ErrorCode::kInvalidArgument,
          "two-region threshold must be positive");
  const std::size_t d = w.size();
  const double norm = checked_norm(w);
  auto eval = std::make_shared<TwoRegionEvaluator>(std::move(w));
  return Testbench(std::move(name), d, std::move(eval),
                   {t, FailDirection::kGreater}, 2.0 * normal_cdf(-t / norm));
}

double quadratic_boundary(double t, double curvature) {
  require(curvature >= 0.0, ErrorCode::kInvalidArgument,
          "curvature must be >= 0");
  if (curvature == 0.0) return t;
  // g(r) = r + c r|r| is odd and increasing, so solve on |t| and restore
  // the sign. The rationalized root avoids cancellation for small c*t.
  const double a = std::abs(t);
  const double r = 2.0 * a / (1.0 + std::sqrt(1.0 + 4.0 * curvature * a));
  return std::copysign(r, t);
}

Testbench make_quadratic_bench(std::vector<double> w, double t, double curvature,
                               std::string name) {
  const std::size_t d = w.size();
  auto eval = std::make_shared<QuadraticEvaluator>(std::move(w), curvature);
  const double norm = checked_norm(eval->w());
  const double pf = normal_cdf(-quadratic_boundary(t, curvature) / norm);
  return Testbench(std::move(name), d, std::move(eval),
                   {t, FailDirection::kGreater}, pf);
}

std::vector<double> unit_vector(std::size_t d, std::size_t axis) {
  require(axis < d, ErrorCode::kInvalidArgument, "axis out of range");
  std::vector<double> w(d, 0.0);
  w[axis] = 1.0;
  return w;
}

bool is_preset(const std::string& name) {
  return std::any_of(std::begin(kPresets), std::end(kPresets),
                     [&](const Preset& p) { return name == p.name; });
}

double preset_golden_pf(const std::string& name) {
  return find_preset(name).golden_pf;
}

std::uint64_t preset_mc_sims(const std::string& name) {
  return find_preset(name).mc_sims;
}

Testbench dims_preset(const std::string& name, std::uint64_t seed) {
  const Preset& p = find_preset(name);
  RngStream rng(seed, p.dim);

  // Partial Fisher-Yates picks the dominant coordinates.
  std::vector<std::size_t> order(p.dim);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < kPresetDominantParams; ++i) {
    const std::size_t j = i + rng.below(p.dim - i);
    std::swap(order[i], order[j]);
  }
  std::vector<double> w(p.dim, 0.0);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < kPresetDominantParams; ++i) {
    const double v = rng.normal();
    w[order[i]] = v;
    norm2 += v * v;
  }
  for (double& v : w) v /= std::sqrt(norm2);

  const double t = -normal_quantile(p.golden_pf);
  return make_linear_bench(std::move(w), t, p.name);
}

}  // namespace rareyield
