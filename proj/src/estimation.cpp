#include "rareyield/estimation.hpp"

#include <cmath>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

// Neumaier's variant of Kahan summation.
void neumaier_add(double& sum, double& comp, double v) noexcept {
  const double t = sum + v;
  if (std::abs(sum) >= std::abs(v)) {
    comp += (sum - t) + v;
  } else {
    comp += (v - t) + sum;
  }
  sum = t;
}

}  // namespace

std::optional<double> fom(double est_std, double pf) {
  require(est_std >= 0.0 && pf >= 0.0, ErrorCode::kInvalidArgument,
          "fom: negative estimate or standard deviation");
  if (pf == 0.0) return std::nullopt;
  return est_std / pf;
}

std::optional<double> fom(const PfEstimate& est) { return fom(est.est_std, est.pf); }

void IsAccumulator::add(double v) noexcept {
  ++n_;
  neumaier_add(s1_, c1_, v);
  neumaier_add(s2_, c2_, v * v);
}

void IsAccumulator::merge(const IsAccumulator& other) noexcept {
  n_ += other.n_;
  neumaier_add(s1_, c1_, other.s1_);
  neumaier_add(s1_, c1_, other.c1_);
  neumaier_add(s2_, c2_, other.s2_);
  neumaier_add(s2_, c2_, other.c2_);
}

PfEstimate IsAccumulator::estimate() const {
  require(n_ > 0, ErrorCode::kInvalidArgument, "estimate over zero samples");
  const double n = static_cast<double>(n_);
  PfEstimate est;
  est.n_sims = n_;
  est.pf = sum() / n;
  const double var = std::max(0.0, sum_squares() / n - est.pf * est.pf);
  est.est_std = std::sqrt(var / n);
  est.fom = fom(est);
  return est;
}

PfEstimate mc_estimate(Testbench& bench, std::uint64_t n, RngStream& rng) {
  require(n >= 1, ErrorCode::kInvalidArgument, "mc_estimate needs n >= 1");
  const std::uint64_t first = rng.take(n);
  IsAccumulator acc;
  for (std::uint64_t i = 0; i < n; ++i) {
    const ParamVector x = sample_standard(bench.dim(), rng.rng(), first + i);
    acc.add(bench.fails(x) ? 1.0 : 0.0);
  }
  return acc.estimate();
}

std::vector<double> weighted_indicators(std::span<const ParamVector> samples,
                                        const Proposal& q, Testbench& bench,
                                        std::vector<bool>* failed) {
  std::vector<double> v(samples.size(), 0.0);
  if (failed) failed->assign(samples.size(), false);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bench.fails(samples[i])) {
      v[i] = is_weight(samples[i], q);
      if (failed) (*failed)[i] = true;
    }
  }
  return v;
}

PfEstimate is_estimate(std::span<const ParamVector> samples, const Proposal& q,
                       Testbench& bench) {
  require(!samples.empty(), ErrorCode::kInvalidArgument,
          "is_estimate needs at least one sample");
  IsAccumulator acc;
  for (double v : weighted_indicators(samples, q, bench)) acc.add(v);
  return acc.estimate();
}

PfEstimate merge_estimates(const PfEstimate& a, const PfEstimate& b) {
  require(a.n_sims > 0 && b.n_sims > 0, ErrorCode::kInvalidArgument,
          "merge_estimates needs non-empty estimates");
  const double na = static_cast<double>(a.n_sims);
  const double nb = static_cast<double>(b.n_sims);
  const double n = na + nb;
  // Recover each batch's second moment mean(v^2) = n*std^2 + pf^2.
  const double m2a = na * a.est_std * a.est_std + a.pf * a.pf;
  const double m2b = nb * b.est_std * b.est_std + b.pf * b.pf;
  PfEstimate out;
  out.n_sims = a.n_sims + b.n_sims;
  out.pf = (na * a.pf + nb * b.pf) / n;
  const double var = std::max(0.0, (na * m2a + nb * m2b) / n - out.pf * out.pf);
  out.est_std = std::sqrt(var / n);
  out.fom = fom(out);
  return out;
}

PfEstimate combine_epochs(std::span<const PfEstimate> epochs) {
  require(!epochs.empty(), ErrorCode::kInvalidArgument,
          "combine_epochs needs at least one epoch");
  double total = 0.0;
  for (const auto& e : epochs) total += static_cast<double>(e.n_sims);
  require(total > 0.0, ErrorCode::kInvalidArgument,
          "combine_epochs over zero simulations");
  PfEstimate out;
  double var = 0.0;
  for (const auto& e : epochs) {
    const double share = static_cast<double>(e.n_sims) / total;
    out.pf += share * e.pf;
    var += share * share * e.est_std * e.est_std;
    out.n_sims += e.n_sims;
  }
  out.est_std = std::sqrt(var);
  out.fom = fom(out);
  return out;
}

Convergence check_converged(std::span<const RoundRecord> trace, double threshold,
                            std::size_t patience) {
  require(!trace.empty(), ErrorCode::kInvalidArgument,
          "check_converged on an empty trace");
  require(patience >= 1, ErrorCode::kInvalidArgument, "patience must be >= 1");
  std::size_t streak = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    if (r.pf > 0.0 && r.fom && *r.fom <= threshold) {
      if (++streak == patience) return {true, i + 1 - patience};
    } else {
      streak = 0;
    }
  }
  return {};
}

Convergence check_converged(const RunRecord& record, double threshold,
                            std::size_t patience) {
  return check_converged(record.rounds, threshold, patience);
}

}  // namespace rareyield
