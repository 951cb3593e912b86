#include <cmath>
#include <functional>
#include <memory>

#include "doctest.h"
#include "oracle.hpp"
#include "rareyield/error.hpp"
#include "rareyield/methods.hpp"

using namespace rareyield;

namespace {

using Runner = RunRecord (*)(Testbench&, const MethodConfig&, RngStream&);

double rel_err(double pf, double golden) { return std::abs(pf - golden) / golden; }

/// Two-region bench with pf = 1e-4 split evenly between the regions.
Testbench two_region() {
  return make_two_region_bench({0.6, 0.8}, -oracle::phi_inverse(5e-5));
}

/// Fails like a half-space for the first `live` calls and never afterwards.
struct FadingEvaluator final : Evaluator {
  std::uint64_t live;
  std::uint64_t calls = 0;
  explicit FadingEvaluator(std::uint64_t n) : live(n) {}
  double evaluate(std::span<const double> x) override {
    return ++calls <= live ? x[0] : -1.0;
  }
};

/// Component means on each side of the hyperplane w.x = 0.
std::pair<int, int> sides(const Proposal& q, const std::vector<double>& w) {
  int pos = 0;
  int neg = 0;
  for (const auto& c : q.components()) (dot(c.mean.coords(), w) > 0 ? pos : neg)++;
  return {pos, neg};
}

}  // namespace

TEST_SUITE("methods") {
  TEST_CASE("method names") {
    for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("lrta"), Error);
  }

  TEST_CASE("config validation") {
    MethodConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 9;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.max_rounds = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.k_clusters = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.sigma = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.fom_threshold = -0.1;
    CHECK_THROWS_AS(c.validate(), Error);
    Testbench b = make_linear_bench(unit_vector(2), 3.0);
    RngStream s(0);
    c = {};
    c.batch_size = 1;
    CHECK_THROWS_AS(run_optimis(b, c, s), Error);
  }

  TEST_CASE("kmeans on separated pairs") {
    const std::vector<ParamVector> pts{{0.0, 0.0}, {10.0, 0.0}, {0.1, 0.0}, {10.1, 0.0}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RngStream s(seed);
      auto cl = kmeans_cluster(pts, 2, s);
      REQUIRE(cl.size() == 2);
      if (cl[0].centroid[0] > cl[1].centroid[0]) std::swap(cl[0], cl[1]);
      CHECK(cl[0].centroid[0] == doctest::Approx(0.05));
      CHECK(cl[1].centroid[0] == doctest::Approx(10.05));
      CHECK(cl[0].members == std::vector<std::size_t>{0, 2});
      CHECK(cl[1].members == std::vector<std::size_t>{1, 3});
    }
  }

  TEST_CASE("kmeans with k = 1 and k = n") {
    const std::vector<ParamVector> pts{{1.0, 2.0}, {3.0, -2.0}, {5.0, 3.0}};
    RngStream s(1);
    const auto one = kmeans_cluster(pts, 1, s);
    REQUIRE(one.size() == 1);
    CHECK(one[0].centroid[0] == doctest::Approx(3.0));
    CHECK(one[0].centroid[1] == doctest::Approx(1.0));
    const auto all = kmeans_cluster(pts, 3, s);
    REQUIRE(all.size() == 3);
    for (const auto& c : all) {
      REQUIRE(c.members.size() == 1);
      CHECK(c.centroid == pts[c.members[0]]);
    }
  }

  TEST_CASE("kmeans re-seeds empty clusters on duplicate points") {
    const std::vector<ParamVector> pts{{0.0}, {0.0}, {0.0}, {5.0}};
    RngStream s(2);
    const auto cl = kmeans_cluster(pts, 3, s);
    std::size_t members = 0;
    for (const auto& c : cl) members += c.members.size();
    CHECK(members == 4);
  }

  TEST_CASE("kmeans argument checks") {
    const std::vector<ParamVector> pts{{0.0}, {1.0}};
    RngStream s(0);
    CHECK_THROWS_AS(kmeans_cluster(pts, 3, s), Error);
    CHECK_THROWS_AS(kmeans_cluster(pts, 0, s), Error);
  }

  TEST_CASE("weighted mean update") {
    const std::vector<ParamVector> pts{{0.0, 0.0}, {2.0, 0.0}};
    const double w13[] = {1.0, 3.0};
    CHECK(weighted_mean_update(pts, w13) == ParamVector{1.5, 0.0});
    const double uniform[] = {2.0, 2.0};
    CHECK(weighted_mean_update(pts, uniform) == ParamVector{1.0, 0.0});
    const double single[] = {0.0, 1.0};
    CHECK(weighted_mean_update(pts, single) == pts[1]);
    const double zero[] = {0.0, 0.0};
    CHECK_THROWS_AS(weighted_mean_update(pts, zero), Error);
    const double negative[] = {-1.0, 2.0};
    CHECK_THROWS_AS(weighted_mean_update(pts, negative), Error);
    const double short_w[] = {1.0};
    CHECK_THROWS_AS(weighted_mean_update(pts, short_w), Error);
  }

  TEST_CASE("screened mean drops coordinates indistinguishable from zero") {
    std::vector<ParamVector> pts;
    std::vector<double> w;
    RngStream s(3);
    for (int i = 0; i < 400; ++i) {
      pts.push_back(ParamVector{3.0 + 0.1 * s.normal(), s.normal()});
      w.push_back(1.0);
    }
    const auto m = screened_mean(pts, w);
    REQUIRE(m.has_value());
    CHECK((*m)[0] == doctest::Approx(3.0).epsilon(0.02));
    CHECK((*m)[1] == 0.0);
    std::vector<double> spiky(400, 0.0);
    spiky[0] = 1.0;
    CHECK_FALSE(screened_mean(pts, spiky).has_value());
  }

  TEST_CASE("effective sample size and tempering") {
    const double flat[] = {2.0, 2.0, 2.0, 2.0};
    CHECK(effective_sample_size(flat) == doctest::Approx(4.0));
    const double one[] = {0.0, 5.0, 0.0};
    CHECK(effective_sample_size(one) == doctest::Approx(1.0));
    CHECK(effective_sample_size({}) == 0.0);

    std::vector<double> w;
    for (int i = 0; i < 50; ++i) w.push_back(std::exp(-0.5 * i));
    const double raw = effective_sample_size(w);
    CHECK(temper_weights(w, raw - 0.1) == w);
    const auto t = temper_weights(w, 20.0);
    CHECK(effective_sample_size(t) >= 20.0 - 1e-9);
    CHECK(effective_sample_size(t) <= 20.5);
    // Tempering is a power law: log-weights stay affine in the raw ones.
    const double beta = std::log(t[1]) / -0.5;
    CHECK(beta > 0.0);
    CHECK(beta < 1.0);
    for (int i = 0; i < 50; ++i) CHECK(std::log(t[i]) == doctest::Approx(-0.5 * i * beta));

    std::vector<double> with_zero{0.0, 1.0, 1e-30, 0.0};
    const auto tz = temper_weights(with_zero, 2.0);
    CHECK(tz[0] == 0.0);
    CHECK(tz[3] == 0.0);
    CHECK(effective_sample_size(tz) == doctest::Approx(2.0).epsilon(1e-6));
    const double bad[] = {1.0, -1.0};
    CHECK_THROWS_AS(temper_weights(bad, 1.0), Error);
    const double zeros[] = {0.0, 0.0};
    CHECK(temper_weights(zeros, 2.0) == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("no presample seeds is a failed run") {
    // A threshold far beyond every shell and ray.
    MethodConfig cfg;
    cfg.presample_budget = 200;
    for (Method m : kAllMethods) {
      Testbench b = make_linear_bench(unit_vector(2), 30.0);
      cfg.method = m;
      RngStream s(1);
      const RunRecord r = run_method(b, cfg, s);
      CHECK(r.status == RunStatus::kNoSeeds);
      CHECK_FALSE(r.converged);
      CHECK(r.rounds.empty());
      CHECK(r.total_sims == b.eval_count());
      CHECK(r.presample_sims == r.total_sims);
    }
  }

  TEST_CASE("mnis on sram108") {
    MethodConfig cfg;
    cfg.method = Method::kMnis;
    int good = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = dims_preset("sram108");
      RngStream s(seed);
      const RunRecord r = run_mnis(b, cfg, s);
      if (r.converged && rel_err(r.final_pf(), 5.01e-5) <= 0.2) ++good;
      // Pre-fixed search area: one proposal for every round.
      for (const auto& q : r.proposals) CHECK(q == r.proposals.front());
      if (!r.proposals.empty()) CHECK(r.proposals.front().kind() == Proposal::Kind::kShifted);
    }
    CHECK(good >= 6);
  }

  TEST_CASE("hscs on the two-region bench places mass in both regions") {
    MethodConfig cfg;
    cfg.k_clusters = 4;
    cfg.max_rounds = 1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = two_region();
      RngStream s(seed);
      const RunRecord r = run_hscs(b, cfg, s);
      REQUIRE_FALSE(r.proposals.empty());
      const auto [pos, neg] = sides(r.proposals.front(), {0.6, 0.8});
      CHECK(pos >= 1);
      CHECK(neg >= 1);
    }
  }

  TEST_CASE("hscs with one cluster is a single shift") {
    MethodConfig cfg;
    cfg.k_clusters = 1;
    cfg.max_rounds = 3;
    Testbench b = make_linear_bench({0.6, 0.8}, 3.5);
    RngStream s(4);
    const RunRecord r = run_hscs(b, cfg, s);
    REQUIRE_FALSE(r.proposals.empty());
    const Proposal& q = r.proposals.front();
    REQUIRE(q.components().size() == 1);
    CHECK(q.components()[0].weight == 1.0);
    CHECK(q.components()[0].mean.norm() == doctest::Approx(3.5).epsilon(0.01));
    for (const auto& p : r.proposals) CHECK(p == q);
  }

  TEST_CASE("hscs on sram108") {
    MethodConfig cfg;
    double sum = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = dims_preset("sram108");
      RngStream s(seed);
      const RunRecord r = run_hscs(b, cfg, s);
      if (r.converged) {
        sum += r.final_pf();
        ++n;
      }
    }
    REQUIRE(n > 0);
    CHECK(rel_err(sum / n, 5.01e-5) <= 0.15);
  }

  TEST_CASE("adaptive proposals hold still when a round has no failures") {
    MethodConfig cfg;
    cfg.max_rounds = 4;
    cfg.presample_budget = 300;
    for (Runner run : {&run_ais, &run_acs, &run_optimis}) {
      // A dry run tells how many calls presampling and seed refinement use;
      // the second run stops failing right after them.
      Testbench probe("probe", 2, std::make_shared<FadingEvaluator>(~0ull), {2.5});
      RngStream s0(5);
      const RunRecord dry = run(probe, cfg, s0);
      REQUIRE_FALSE(dry.rounds.empty());
      const std::uint64_t setup = dry.rounds.front().cumulative_sims - cfg.batch_size;
      Testbench b("fading", 2, std::make_shared<FadingEvaluator>(setup), {2.5});
      RngStream s(5);
      const RunRecord r = run(b, cfg, s);
      REQUIRE(r.rounds.size() == 4);
      for (std::size_t i = 1; i < r.proposals.size(); ++i) {
        CHECK(r.proposals[i] == r.proposals[i - 1]);
      }
      CHECK(r.final_pf() == 0.0);
      CHECK_FALSE(r.converged);
      CHECK(r.status == RunStatus::kNotConverged);
    }
  }

}

// Empirical claims about how the methods compare, each over 10 seeds.
TEST_SUITE("method_behavior") {
  TEST_CASE("ais means contract toward the min-norm point") {
    MethodConfig cfg;
    cfg.k_clusters = 1;
    cfg.sigma = 1.0;
    cfg.fom_threshold = 0.02;
    cfg.max_rounds = 6;
    const std::vector<double> target{1.8, 2.4};
    int closer = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = make_linear_bench({0.6, 0.8}, 3.0);
      RngStream s(seed);
      const RunRecord r = run_ais(b, cfg, s);
      REQUIRE(r.proposals.size() >= 2);
      const double first = squared_distance(r.proposals.front().components()[0].mean.coords(), target);
      const double last = squared_distance(r.proposals.back().components()[0].mean.coords(), target);
      if (last < first) ++closer;
    }
    CHECK(closer >= 8);
  }

  TEST_CASE("ais needs fewer sims than mnis on sram108") {
    MethodConfig cfg;
    int fewer = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench a = dims_preset("sram108");
      Testbench m = dims_preset("sram108");
      RngStream sa(seed);
      RngStream sm(seed);
      const RunRecord ra = run_ais(a, cfg, sa);
      const RunRecord rm = run_mnis(m, cfg, sm);
      if (ra.converged && (!rm.converged || ra.total_sims < rm.total_sims)) ++fewer;
    }
    CHECK(fewer >= 6);
  }

  TEST_CASE("acs finds both regions of the two-region bench by round 2") {
    MethodConfig cfg;
    int both = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = two_region();
      RngStream s(seed);
      const RunRecord r = run_acs(b, cfg, s);
      REQUIRE(r.proposals.size() >= 2);
      const auto [pos, neg] = sides(r.proposals[1], {0.6, 0.8});
      if (pos >= 1 && neg >= 1) ++both;
    }
    CHECK(both >= 9);
  }

  TEST_CASE("acs components collapse onto a single region") {
    MethodConfig cfg;
    cfg.k_clusters = 3;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = make_linear_bench({0.6, 0.8}, 4.0);
      RngStream s(seed);
      const RunRecord r = run_acs(b, cfg, s);
      REQUIRE(r.converged);
      for (const auto& c : r.proposals.back().components()) {
        CHECK(std::sqrt(squared_distance(c.mean.coords(), std::vector<double>{2.4, 3.2})) <=
              2.0 * c.sigma);
      }
    }
  }

  TEST_CASE("mnis converges slower than acs on the two-region bench") {
    MethodConfig cfg;
    int slower = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench bm = two_region();
      Testbench ba = two_region();
      RngStream sm(seed);
      RngStream sa(seed);
      const RunRecord rm = run_mnis(bm, cfg, sm);
      const RunRecord ra = run_acs(ba, cfg, sa);
      if (ra.converged && (!rm.converged || rm.total_sims > ra.total_sims)) ++slower;
    }
    CHECK(slower >= 7);
  }

  TEST_CASE("optimis first round on sram108") {
    MethodConfig cfg;
    int close = 0;
    double err_sum = 0.0;
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Testbench b = dims_preset("sram108");
      RngStream s(seed);
      const RunRecord r = run_optimis(b, cfg, s);
      REQUIRE_FALSE(r.rounds.empty());
      if (rel_err(r.rounds.front().pf, 5.01e-5) <= 0.5) ++close;
      if (r.converged) {
        err_sum += rel_err(r.final_pf(), 5.01e-5);
        ++converged;
      }
    }
    CHECK(close >= 7);
    REQUIRE(converged > 0);
    CHECK(err_sum / converged <= 0.05);
  }

  TEST_CASE("optimis beats acs with hypersphere presampling at equal budget") {
    MethodConfig cfg;
    for (const char* preset : {"sram108", "sram569", "sram1093"}) {
      int wins = 0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Testbench bo = dims_preset(preset);
        Testbench ba = dims_preset(preset);
        RngStream so(seed);
        RngStream sa(seed);
        const RunRecord ro = run_optimis(bo, cfg, so);
        const RunRecord ra = run_acs(ba, cfg, sa);
        if (ro.converged && (!ra.converged || ro.total_sims < ra.total_sims)) ++wins;
      }
      INFO(std::string(preset));
      CHECK(wins >= 7);
    }
  }

}

TEST_SUITE("methods") {
  TEST_CASE("same seed gives an identical run") {
    MethodConfig cfg;
    for (Method m : kAllMethods) {
      cfg.method = m;
      Testbench b1 = two_region();
      Testbench b2 = two_region();
      RngStream s1(77);
      RngStream s2(77);
      const RunRecord r1 = run_method(b1, cfg, s1);
      const RunRecord r2 = run_method(b2, cfg, s2);
      REQUIRE(r1.rounds.size() == r2.rounds.size());
      for (std::size_t i = 0; i < r1.rounds.size(); ++i) {
        CHECK(r1.rounds[i].pf == r2.rounds[i].pf);
        CHECK(r1.rounds[i].fom == r2.rounds[i].fom);
        CHECK(r1.rounds[i].cumulative_sims == r2.rounds[i].cumulative_sims);
      }
      CHECK(r1.proposals == r2.proposals);
    }
  }

  TEST_CASE("presampler swap changes only the presample stage") {
    // With the same presampler forced, ais is the same run whatever its own
    // default would have been; swapping changes the seeds it starts from.
    MethodConfig cfg;
    cfg.method = Method::kAis;
    cfg.presampler = PresamplerKind::kHypersphere;
    Testbench b1 = dims_preset("sram108");
    Testbench b2 = dims_preset("sram108");
    RngStream s1(3);
    RngStream s2(3);
    const RunRecord own = run_ais(b1, MethodConfig{}, s1);
    const RunRecord forced = run_ais(b2, cfg, s2);
    CHECK(own.proposals == forced.proposals);
    CHECK(own.total_sims == forced.total_sims);

    cfg.presampler = PresamplerKind::kRayBisection;
    Testbench b3 = dims_preset("sram108");
    RngStream s3(3);
    const RunRecord swapped = run_ais(b3, cfg, s3);
    CHECK(swapped.proposals.front() != own.proposals.front());
    CHECK(swapped.presample_sims <= cfg.presample_budget);
  }
}
