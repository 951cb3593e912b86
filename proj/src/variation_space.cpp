#include "rareyield/variation_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
// Slot used for the mixture component choice; far above any dimension.
constexpr std::uint64_t kComponentSlot = 0xC0FFEE0000000000ULL;

void check_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(what) + ": dimension " + std::to_string(a) +
             " does not match " + std::to_string(b));
  }
}

void validate_component(const GaussianComponent& c, std::size_t d) {
  check_dim(c.mean.dim(), d, "mixture component");
  require(std::isfinite(c.sigma) && c.sigma > 0.0,
          ErrorCode::kInvalidArgument, "component sigma must be positive");
  require(std::isfinite(c.weight) && c.weight > 0.0 && c.weight <= 1.0,
          ErrorCode::kInvalidArgument,
          "component weight must lie in (0, 1]");
}

}  // namespace

ParamVector::ParamVector(std::vector<double> coords)
    : coords_(std::move(coords)) {
  require(!coords_.empty(), ErrorCode::kInvalidArgument,
          "invalid dimension: parameter vector must have d >= 1");
  for (double c : coords_) {
    require(std::isfinite(c), ErrorCode::kInvalidArgument,
            "parameter vector coordinates must be finite");
  }
}

ParamVector ParamVector::zeros(std::size_t d) {
  return ParamVector(std::vector<double>(d, 0.0));
}

double ParamVector::squared_norm() const noexcept {
  double s = 0.0;
  for (double c : coords_) s += c * c;
  return s;
}

double ParamVector::norm() const noexcept { return std::sqrt(squared_norm()); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_dim(a.size(), b.size(), "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

Proposal Proposal::standard(std::size_t d) {
  require(d >= 1, ErrorCode::kInvalidArgument, "invalid dimension: d = 0");
  Proposal q;
  q.kind_ = Kind::kStandard;
  q.dim_ = d;
  return q;
}

Proposal Proposal::shifted(ParamVector mean, double sigma) {
  Proposal q;
  q.kind_ = Kind::kShifted;
  q.dim_ = mean.dim();
  q.components_.push_back({1.0, std::move(mean), sigma});
  validate_component(q.components_.front(), q.dim_);
  q.log_weights_ = {0.0};
  return q;
}

Proposal Proposal::mixture(std::vector<GaussianComponent> components) {
  require(!components.empty(), ErrorCode::kInvalidArgument,
          "mixture proposal needs at least one component");
  Proposal q;
  q.kind_ = Kind::kMixture;
  q.dim_ = components.front().mean.dim();
  double total = 0.0;
  for (const auto& c : components) {
    validate_component(c, q.dim_);
    total += c.weight;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::kInvalidArgument,
          "mixture weights must sum to 1");
  q.components_ = std::move(components);
  for (const auto& c : q.components_) q.log_weights_.push_back(std::log(c.weight));
  return q;
}

Proposal Proposal::normalized_mixture(std::vector<GaussianComponent> components) {
  require(!components.empty(), ErrorCode::kInvalidArgument,
          "mixture proposal needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    require(std::isfinite(c.weight) && c.weight > 0.0,
            ErrorCode::kInvalidArgument, "component weight must be positive");
    total += c.weight;
  }
  for (auto& c : components) c.weight /= total;
  // Division can leave the sum a few ulps off; fold the residue into the
  // heaviest component.
  double sum = 0.0;
  for (const auto& c : components) sum += c.weight;
  auto heaviest = std::max_element(
      components.begin(), components.end(),
      [](const auto& a, const auto& b) { return a.weight < b.weight; });
  heaviest->weight += 1.0 - sum;
  return mixture(std::move(components));
}

ParamVector sample_standard(std::size_t d, const CounterRng& rng,
                            std::uint64_t index) {
  require(d >= 1, ErrorCode::kInvalidArgument, "invalid dimension: d = 0");
  std::vector<double> coords(d);
  rng.fill_normal(index, coords.data(), d);
  return ParamVector(std::move(coords));
}

ParamVector sample_standard(std::size_t d, RngStream& rng) {
  require(d >= 1, ErrorCode::kInvalidArgument, "invalid dimension: d = 0");
  return sample_standard(d, rng.rng(), rng.take());
}

double log_density_standard(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return -0.5 * static_cast<double>(x.size()) * kLogTwoPi - 0.5 * s;
}

double log_density_component(std::span<const double> x,
                             std::span<const double> mean, double sigma) {
  const double d = static_cast<double>(x.size());
  return -0.5 * d * kLogTwoPi - d * std::log(sigma) -
         0.5 * squared_distance(x, mean) / (sigma * sigma);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

double log_density(const ParamVector& x, const Proposal& q) {
  check_dim(x.dim(), q.dim(), "log_density");
  switch (q.kind_) {
    case Proposal::Kind::kStandard:
      return log_density_standard(x.coords());
    case Proposal::Kind::kShifted: {
      const auto& c = q.components_.front();
      return log_density_component(x.coords(), c.mean.coords(), c.sigma);
    }
    case Proposal::Kind::kMixture: {
      std::vector<double> terms(q.components_.size());
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& c = q.components_[k];
        terms[k] = q.log_weights_[k] +
                   log_density_component(x.coords(), c.mean.coords(), c.sigma);
      }
      return log_sum_exp(terms);
    }
  }
  return 0.0;
}

ParamVector sample_proposal_at(const Proposal& q, const CounterRng& rng,
                               std::uint64_t index) {
  const std::size_t d = q.dim();
  std::vector<double> coords(d);
  rng.fill_normal(index, coords.data(), d);
  if (q.kind() == Proposal::Kind::kStandard) return ParamVector(std::move(coords));

  const auto& comps = q.components();
  std::size_t pick = 0;
  if (comps.size() > 1) {
    const double u = rng.uniform(index, kComponentSlot);
    double acc = 0.0;
    pick = comps.size() - 1;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      acc += comps[k].weight;
      if (u < acc) {
        pick = k;
        break;
      }
    }
  }
  const auto& c = comps[pick];
  for (std::size_t i = 0; i < d; ++i) coords[i] = c.mean[i] + c.sigma * coords[i];
  return ParamVector(std::move(coords));
}

std::vector<ParamVector> sample_proposal(const Proposal& q, std::size_t n,
                                         RngStream& rng) {
  require(n >= 1, ErrorCode::kInvalidArgument,
          "sample_proposal needs n >= 1");
  const std::uint64_t first = rng.take(n);
  std::vector<ParamVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sample_proposal_at(q, rng.rng(), first + i));
  }
  return out;
}

double is_weight(const ParamVector& x, const Proposal& q) {
  check_dim(x.dim(), q.dim(), "is_weight");
  if (q.kind() == Proposal::Kind::kStandard) return 1.0;
  const double log_ratio = log_density_standard(x.coords()) - log_density(x, q);
  const double w = std::exp(log_ratio);
  require(std::isfinite(log_ratio) && std::isfinite(w), ErrorCode::kNumeric,
          "importance weight is not finite (degenerate proposal sigma?)");
  return w;
}

}  // namespace rareyield
