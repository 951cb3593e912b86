#include "rareyield/methods.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

// Stream tags; each stage draws from its own substream.
constexpr std::uint64_t kPresampleStream = 1;
constexpr std::uint64_t kRefineStream = 2;
constexpr std::uint64_t kSamplingStream = 3;
constexpr std::uint64_t kClusterStream = 4;

constexpr double kSigmaFloor = 0.3;
constexpr std::size_t kMinClusterMembers = 3;
constexpr double kMinComponentShare = 0.01;
// Mean updates temper the importance weights until this fraction of the
// samples is effective (never fewer than kMinUpdateEss).
constexpr double kUpdateEssFraction = 0.2;
constexpr double kMinUpdateEss = 8.0;

double update_ess_target(std::size_t n) {
  return std::max(kMinUpdateEss, kUpdateEssFraction * static_cast<double>(n));
}

/// Evaluator-call counter for one run.
class SimMeter {
 public:
  explicit SimMeter(const Testbench& bench)
      : bench_(bench), start_(bench.eval_count()) {}
  std::uint64_t used() const { return bench_.eval_count() - start_; }

 private:
  const Testbench& bench_;
  std::uint64_t start_;
};

struct Sample {
  ParamVector x;
  double weight;  // p(x) / q(x) under the proposal that drew it
};

struct Batch {
  IsAccumulator acc;
  std::vector<Sample> failures;
};

Batch simulate_batch(Testbench& bench, const Proposal& q, std::size_t n,
                     RngStream& rng) {
  Batch b;
  const auto xs = sample_proposal(q, n, rng);
  std::vector<bool> failed;
  const auto v = weighted_indicators(xs, q, bench, &failed);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    b.acc.add(v[i]);
    if (failed[i]) b.failures.push_back({xs[i], v[i]});
  }
  return b;
}

void record_round(RunRecord& rec, const SimMeter& meter, const PfEstimate& est,
                  const Proposal& q) {
  rec.rounds.push_back({meter.used(), est.pf, est.fom});
  rec.proposals.push_back(q);
}

bool converged_now(const RunRecord& rec, const MethodConfig& cfg) {
  return check_converged(rec, cfg.fom_threshold, cfg.patience).converged;
}

void finish(RunRecord& rec, const SimMeter& meter) {
  rec.total_sims = meter.used();
  if (rec.status == RunStatus::kOk && !rec.converged) {
    rec.status = RunStatus::kNotConverged;
  }
}

PresampleResult run_presample(Testbench& bench, const MethodConfig& cfg,
                              PresamplerKind own, RngStream& rng) {
  RngStream pre_rng = rng.fork(kPresampleStream);
  return presample(cfg.presampler.value_or(own), bench, cfg.presample_budget,
                   pre_rng);
}

/// Starting point for refinement of a cluster: its centroid when that
/// fails, otherwise the member seed of smallest norm.
ParamVector cluster_start(Testbench& bench, const Cluster& c,
                          std::span<const ParamVector> seeds) {
  if (bench.fails(c.centroid)) return c.centroid;
  const ParamVector* best = &seeds[c.members.front()];
  for (std::size_t m : c.members) {
    if (seeds[m].squared_norm() < best->squared_norm()) best = &seeds[m];
  }
  return *best;
}

/// Mixture over min-norm refined cluster starts, weights by cluster size.
Proposal clustered_proposal(Testbench& bench, const MethodConfig& cfg,
                            std::span<const ParamVector> seeds,
                            std::size_t refine_rounds, RngStream& rng) {
  RngStream cluster_rng = rng.fork(kClusterStream);
  RngStream refine_rng = rng.fork(kRefineStream);
  const std::size_t k = std::min(cfg.k_clusters, seeds.size());
  const auto clusters = kmeans_cluster(seeds, k, cluster_rng);
  MinNormOptions opts;
  opts.rounds = refine_rounds;
  std::vector<GaussianComponent> comps;
  for (const auto& c : clusters) {
    if (c.members.empty()) continue;
    const ParamVector start = cluster_start(bench, c, seeds);
    comps.push_back({static_cast<double>(c.members.size()),
                     min_norm_point(bench, start, refine_rng, opts), cfg.sigma});
  }
  return Proposal::normalized_mixture(std::move(comps));
}

/// Fixed-proposal IS rounds: every batch joins one epoch.
void fixed_rounds(Testbench& bench, const MethodConfig& cfg, const Proposal& q,
                  RunRecord& rec, const SimMeter& meter, RngStream& rng) {
  RngStream sample_rng = rng.fork(kSamplingStream);
  IsAccumulator acc;
  for (std::size_t round = 0; round < cfg.max_rounds; ++round) {
    const Batch b = simulate_batch(bench, q, cfg.batch_size, sample_rng);
    acc.merge(b.acc);
    record_round(rec, meter, acc.estimate(), q);
    if (converged_now(rec, cfg)) {
      rec.converged = true;
      break;
    }
  }
}

struct AdaptiveStyle {
  bool recluster = false;
  bool adapt_sigma = false;
};

/// Per-component log terms log(pi_k) + log N_k(x) and their log-sum-exp.
std::vector<double> component_log_terms(const ParamVector& x, const Proposal& q,
                                        double& log_q) {
  const auto& comps = q.components();
  std::vector<double> terms(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    terms[k] = std::log(comps[k].weight) +
               log_density_component(x.coords(), comps[k].mean.coords(),
                                     comps[k].sigma);
  }
  log_q = log_sum_exp(terms);
  return terms;
}

/// Weighted isotropic spread of points around mean, per coordinate.
double pooled_sigma(std::span<const ParamVector> points,
                    std::span<const double> weights, const ParamVector& mean) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    num += weights[i] * squared_distance(points[i].coords(), mean.coords());
    den += weights[i];
  }
  return std::sqrt(num / (den * static_cast<double>(mean.dim())));
}

double clamp_sigma(double s, const MethodConfig& cfg) {
  if (!std::isfinite(s)) return cfg.sigma;
  return std::clamp(s, std::min(kSigmaFloor, cfg.sigma), cfg.sigma);
}

/// AIS update: each component mean moves to the responsibility- and
/// importance-weighted mean of this round's failures.
Proposal responsibility_update(const Proposal& q, std::span<const Sample> failures,
                               const MethodConfig& cfg, bool adapt_sigma) {
  if (failures.empty()) return q;
  const auto& comps = q.components();
  const std::size_t k = comps.size();
  std::vector<ParamVector> xs;
  xs.reserve(failures.size());
  std::vector<double> ws;
  ws.reserve(failures.size());
  for (const auto& f : failures) ws.push_back(f.weight);
  ws = temper_weights(ws, update_ess_target(ws.size()));
  std::vector<std::vector<double>> resp(k, std::vector<double>(failures.size()));
  for (std::size_t i = 0; i < failures.size(); ++i) {
    xs.push_back(failures[i].x);
    double log_q = 0.0;
    const auto terms = component_log_terms(failures[i].x, q, log_q);
    for (std::size_t c = 0; c < k; ++c) {
      resp[c][i] = ws[i] * std::exp(terms[c] - log_q);
    }
  }
  std::vector<GaussianComponent> next;
  std::vector<double> mass(k, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    mass[c] = std::accumulate(resp[c].begin(), resp[c].end(), 0.0);
    total += mass[c];
  }
  if (!(total > 0.0)) return q;
  for (std::size_t c = 0; c < k; ++c) {
    GaussianComponent comp = comps[c];
    if (mass[c] > 0.0) {
      if (auto m = screened_mean(xs, resp[c])) {
        comp.mean = std::move(*m);
        if (adapt_sigma) comp.sigma = clamp_sigma(pooled_sigma(xs, resp[c], comp.mean), cfg);
      }
    }
    comp.weight = std::max(mass[c] / total, kMinComponentShare);
    next.push_back(std::move(comp));
  }
  return Proposal::normalized_mixture(std::move(next));
}

/// ACS update: k-means over the failure memory; each surviving cluster
/// becomes a component at its importance-weighted mean.
Proposal recluster_update(const Proposal& q, std::span<const Sample> memory,
                          const MethodConfig& cfg, bool adapt_sigma,
                          RngStream& rng) {
  const std::size_t k_now = q.components().size();
  if (memory.size() < std::max<std::size_t>(k_now, kMinClusterMembers)) return q;
  std::vector<ParamVector> xs;
  std::vector<double> ws;
  xs.reserve(memory.size());
  for (const auto& s : memory) {
    xs.push_back(s.x);
    ws.push_back(s.weight);
  }
  const auto clusters = kmeans_cluster(xs, k_now, rng);
  const double total = std::accumulate(ws.begin(), ws.end(), 0.0);
  if (!(total > 0.0)) return q;
  std::vector<GaussianComponent> next;
  for (const auto& c : clusters) {
    if (c.members.size() < kMinClusterMembers) continue;
    std::vector<ParamVector> mx;
    std::vector<double> mw;
    double mass = 0.0;
    for (std::size_t i : c.members) {
      mx.push_back(xs[i]);
      mw.push_back(ws[i]);
      mass += ws[i];
    }
    if (mass / total < kMinComponentShare) continue;
    mw = temper_weights(mw, update_ess_target(mw.size()));
    auto mean = screened_mean(mx, mw);
    if (!mean) continue;
    const double sigma =
        adapt_sigma ? clamp_sigma(pooled_sigma(mx, mw, *mean), cfg) : cfg.sigma;
    next.push_back({mass, std::move(*mean), sigma});
  }
  if (next.empty()) return q;
  return Proposal::normalized_mixture(std::move(next));
}

RunRecord run_adaptive(Testbench& bench, const MethodConfig& cfg, RngStream& rng,
                       PresamplerKind own_presampler, AdaptiveStyle style) {
  cfg.validate();
  SimMeter meter(bench);
  RunRecord rec;
  const PresampleResult pre = run_presample(bench, cfg, own_presampler, rng);
  rec.presample_sims = meter.used();
  if (pre.seeds.empty()) {
    rec.status = RunStatus::kNoSeeds;
    rec.total_sims = meter.used();
    return rec;
  }
  // Adaptive rounds take over the fine search, so refinement stops after
  // the radial bisection and coordinate pruning.
  Proposal q = clustered_proposal(bench, cfg, pre.seeds, 0, rng);

  RngStream sample_rng = rng.fork(kSamplingStream);
  RngStream cluster_rng = rng.fork(kClusterStream).fork(1);
  std::vector<PfEstimate> epochs;
  std::vector<Sample> memory;
  const std::size_t memory_cap = 4 * cfg.batch_size;
  for (std::size_t round = 0; round < cfg.max_rounds; ++round) {
    Batch b = simulate_batch(bench, q, cfg.batch_size, sample_rng);
    epochs.push_back(b.acc.estimate());
    record_round(rec, meter, combine_epochs(epochs), q);
    if (converged_now(rec, cfg)) {
      rec.converged = true;
      break;
    }
    if (style.recluster) {
      memory.insert(memory.end(), b.failures.begin(), b.failures.end());
      if (memory.size() > memory_cap) {
        memory.erase(memory.begin(), memory.end() - memory_cap);
      }
      q = recluster_update(q, memory, cfg, style.adapt_sigma, cluster_rng);
    } else {
      q = responsibility_update(q, b.failures, cfg, style.adapt_sigma);
    }
  }
  finish(rec, meter);
  return rec;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kMnis: return "mnis";
    case Method::kHscs: return "hscs";
    case Method::kAis: return "ais";
    case Method::kAcs: return "acs";
    case Method::kOptimis: return "optimis";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorCode::kConfig, "unknown method '" + name + "'");
}

void MethodConfig::validate() const {
  require(batch_size >= 10, ErrorCode::kConfig, "batch_size must be >= 10");
  require(max_rounds >= 1, ErrorCode::kConfig, "max_rounds must be >= 1");
  require(k_clusters >= 1, ErrorCode::kConfig, "k_clusters must be >= 1");
  require(presample_budget >= 1, ErrorCode::kConfig,
          "presample_budget must be >= 1");
  require(patience >= 1, ErrorCode::kConfig, "patience must be >= 1");
  require(std::isfinite(fom_threshold) && fom_threshold > 0.0, ErrorCode::kConfig,
          "fom_threshold must be positive");
  require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::kConfig,
          "sigma must be positive");
}

std::vector<Cluster> kmeans_cluster(std::span<const ParamVector> points,
                                    std::size_t k, RngStream& rng) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k-means needs k >= 1");
  require(points.size() >= k, ErrorCode::kInvalidArgument,
          "k-means needs at least k points");
  const std::size_t n = points.size();
  const std::size_t d = points.front().dim();

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.below(n)].vec());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i],
                            squared_distance(points[i].coords(), centers.back()));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (nearest[i] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    centers.push_back(points[pick].vec());
  }

  std::vector<std::size_t> assign(n, k);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i].coords(), centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dist = squared_distance(points[i].coords(), centers[c]);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Re-seed at the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;
        const double dist = squared_distance(points[i].coords(), centers[assign[i]]);
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      if (far_d < 0.0) continue;
      --counts[assign[far]];
      assign[far] = c;
      counts[c] = 1;
      centers[c] = points[far].vec();
      changed = true;
    }
    if (!changed) break;
  }

  std::vector<Cluster> out;
  out.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    out.push_back({ParamVector(centers[c]), {}});
  }
  for (std::size_t i = 0; i < n; ++i) out[assign[i]].members.push_back(i);
  return out;
}

ParamVector weighted_mean_update(std::span<const ParamVector> points,
                                 std::span<const double> weights) {
  require(!points.empty() && points.size() == weights.size(),
          ErrorCode::kInvalidArgument,
          "weighted mean needs one weight per point");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::kInvalidArgument,
            "weights must be non-negative");
    total += w;
  }
  require(total > 0.0, ErrorCode::kInvalidArgument,
          "weighted mean with all-zero weights");
  std::vector<double> m(points.front().dim(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] == 0.0) continue;
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += weights[i] * points[i][j];
  }
  for (double& v : m) v /= total;
  return ParamVector(std::move(m));
}

double effective_sample_size(std::span<const double> weights) {
  double total = 0.0;
  double total_sq = 0.0;
  for (double w : weights) {
    total += w;
    total_sq += w * w;
  }
  return total_sq > 0.0 ? total * total / total_sq : 0.0;
}

std::vector<double> temper_weights(std::span<const double> weights,
                                   double target_ess) {
  std::vector<double> logs(weights.size(), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, ErrorCode::kInvalidArgument, "negative weight");
    if (weights[i] > 0.0) {
      logs[i] = std::log(weights[i]);
      top = std::max(top, logs[i]);
    }
  }
  std::vector<double> out(weights.size(), 0.0);
  auto powered = [&](double beta) {
    for (std::size_t i = 0; i < logs.size(); ++i) {
      out[i] = std::isinf(logs[i]) ? 0.0 : std::exp(beta * (logs[i] - top));
    }
    return effective_sample_size(out);
  };
  if (!std::isfinite(top) || powered(1.0) >= target_ess) {
    return {weights.begin(), weights.end()};
  }
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (powered(mid) >= target_ess ? lo : hi) = mid;
  }
  powered(lo);
  return out;
}

std::optional<ParamVector> screened_mean(std::span<const ParamVector> points,
                                         std::span<const double> weights,
                                         double z, double min_ess) {
  double total = 0.0;
  double total_sq = 0.0;
  for (double w : weights) {
    total += w;
    total_sq += w * w;
  }
  if (!(total > 0.0) || total * total < min_ess * total_sq) return std::nullopt;
  ParamVector mean = weighted_mean_update(points, weights);
  std::vector<double> m = mean.vec();
  for (std::size_t j = 0; j < m.size(); ++j) {
    // Delta-method standard error of a ratio estimator.
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double dev = points[i][j] - m[j];
      s += weights[i] * weights[i] * dev * dev;
    }
    const double se = std::sqrt(s) / total;
    if (std::abs(m[j]) < z * se) m[j] = 0.0;
  }
  return ParamVector(std::move(m));
}

RunRecord run_mnis(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  cfg.validate();
  SimMeter meter(bench);
  RunRecord rec;
  const PresampleResult pre =
      run_presample(bench, cfg, PresamplerKind::kHypersphere, rng);
  rec.presample_sims = meter.used();
  if (!pre.min_norm_seed) {
    rec.status = RunStatus::kNoSeeds;
    rec.total_sims = meter.used();
    return rec;
  }
  RngStream refine_rng = rng.fork(kRefineStream);
  MinNormOptions opts;
  opts.rounds = cfg.refine_rounds;
  const ParamVector shift = min_norm_point(bench, *pre.min_norm_seed, refine_rng, opts);
  fixed_rounds(bench, cfg, Proposal::shifted(shift, cfg.sigma), rec, meter, rng);
  finish(rec, meter);
  return rec;
}

RunRecord run_hscs(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  cfg.validate();
  SimMeter meter(bench);
  RunRecord rec;
  const PresampleResult pre =
      run_presample(bench, cfg, PresamplerKind::kHypersphere, rng);
  rec.presample_sims = meter.used();
  if (pre.seeds.empty()) {
    rec.status = RunStatus::kNoSeeds;
    rec.total_sims = meter.used();
    return rec;
  }
  const Proposal q = clustered_proposal(bench, cfg, pre.seeds, cfg.refine_rounds, rng);
  fixed_rounds(bench, cfg, q, rec, meter, rng);
  finish(rec, meter);
  return rec;
}

RunRecord run_ais(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  return run_adaptive(bench, cfg, rng, PresamplerKind::kHypersphere, {false, false});
}

RunRecord run_acs(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  return run_adaptive(bench, cfg, rng, PresamplerKind::kHypersphere, {true, false});
}

RunRecord run_optimis(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  return run_adaptive(bench, cfg, rng, PresamplerKind::kRayBisection, {true, true});
}

RunRecord run_method(Testbench& bench, const MethodConfig& cfg, RngStream& rng) {
  switch (cfg.method) {
    case Method::kMnis: return run_mnis(bench, cfg, rng);
    case Method::kHscs: return run_hscs(bench, cfg, rng);
    case Method::kAis: return run_ais(bench, cfg, rng);
    case Method::kAcs: return run_acs(bench, cfg, rng);
    case Method::kOptimis: return run_optimis(bench, cfg, rng);
  }
  fail(ErrorCode::kConfig, "unknown method");
}

}  // namespace rareyield
