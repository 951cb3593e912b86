#pragma once

// Standard-normal variation space: points, proposal distributions,
// log-densities and importance weights.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <variant>
#include <vector>

#include "rareyield/rng.hpp"

namespace rareyield {

/// A point in the d-dimensional variation space, in standard-normal units.
/// Always non-empty with finite coordinates.
class ParamVector {
 public:
  explicit ParamVector(std::vector<double> coords);
  ParamVector(std::initializer_list<double> coords)
      : ParamVector(std::vector<double>(coords)) {}

  /// The origin of a d-dimensional space.
  static ParamVector zeros(std::size_t d);

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }
  const std::vector<double>& vec() const noexcept { return coords_; }

  double squared_norm() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> coords_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// One isotropic Gaussian N(mean, sigma^2 I) with a mixing weight.
struct GaussianComponent {
  double weight = 1.0;
  ParamVector mean;
  double sigma = 1.0;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

/// Sampling distribution over the variation space: the nominal standard
/// normal, a single shifted Gaussian, or a finite isotropic mixture.
class Proposal {
 public:
  enum class Kind { kStandard, kShifted, kMixture };

  static Proposal standard(std::size_t d);
  static Proposal shifted(ParamVector mean, double sigma = 1.0);
  /// Weights must be positive and sum to one within 1e-12.
  static Proposal mixture(std::vector<GaussianComponent> components);
  /// Mixture with weights renormalized to sum to one first.
  static Proposal normalized_mixture(std::vector<GaussianComponent> components);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Empty for kStandard; one unit-weight entry for kShifted.
  const std::vector<GaussianComponent>& components() const noexcept {
    return components_;
  }

  friend bool operator==(const Proposal&, const Proposal&) = default;

 private:
  Proposal() = default;

  Kind kind_ = Kind::kStandard;
  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<double> log_weights_;

  friend double log_density(const ParamVector& x, const Proposal& q);
};

/// Deterministic in (rng, index): coordinate k is rng.normal(index, k).
ParamVector sample_standard(std::size_t d, const CounterRng& rng,
                            std::uint64_t index);
ParamVector sample_standard(std::size_t d, RngStream& rng);

/// Log-density of the standard normal at x.
double log_density_standard(std::span<const double> x);
/// Log-density of N(mean, sigma^2 I) at x.
double log_density_component(std::span<const double> x,
                             std::span<const double> mean, double sigma);
double log_density(const ParamVector& x, const Proposal& q);

/// Draws one sample with the given index. A mixture picks its component
/// from a dedicated uniform slot, then shifts and scales the same normals
/// sample_standard would produce.
ParamVector sample_proposal_at(const Proposal& q, const CounterRng& rng,
                               std::uint64_t index);
std::vector<ParamVector> sample_proposal(const Proposal& q, std::size_t n,
                                         RngStream& rng);

/// Likelihood ratio p(x)/q(x) against the standard normal. Exactly 1 for
/// the standard proposal. May underflow to 0 far outside q's bulk.
double is_weight(const ParamVector& x, const Proposal& q);

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

}  // namespace rareyield
