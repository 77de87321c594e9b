#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mislab/analytic.hpp"
#include "mislab/estimators.hpp"
#include "test_support.hpp"

using namespace mislab;
using Catch::Approx;
using Fn = StepFunction<double>;

namespace {

const std::vector<SchemeId> kUnbiased = {
    SchemeId(Scheme::n1), SchemeId(Scheme::n2), SchemeId(Scheme::n3),
    SchemeId(Scheme::r1), SchemeId(Scheme::r2), SchemeId(Scheme::r3)};

/// Integrand proportional to the balance mixture, so u / psi is constant.
Problem<double> balance_integrand(double c) {
  const auto base = testing::three_proposals();
  std::vector<Fn> qs;
  for (Eigen::Index n = 0; n < base.proposals.size(); ++n) qs.push_back(base.proposals.density(n));
  return make_problem(qs, scale(base.proposals.balance_mixture(), c));
}

}  // namespace

TEST_CASE("scheme binding", "[estimators]") {
  CHECK(SchemeId(Scheme::r2).strategy() == SelectionStrategy::rswr);
  CHECK(SchemeId(Scheme::n2).strategy() == SelectionStrategy::rswor);
  CHECK_THROWS_AS(SchemeId(Scheme::r1, SelectionStrategy::dswor), ArgumentError);
  CHECK_THROWS_AS(SchemeId(Scheme::n3, SelectionStrategy::rswr), ArgumentError);
  CHECK(parse_scheme("n2+dswor").biased());
  CHECK_FALSE(parse_scheme("n2").biased());
  CHECK_FALSE(parse_scheme("n1+dswor").biased());
  CHECK(parse_scheme("n2+dswor").name() == "n2+dswor");
  CHECK(parse_scheme("r3").name() == "r3");
  CHECK_THROWS_AS(parse_scheme("n4"), ArgumentError);
  CHECK_THROWS_AS(parse_scheme("r2+rswor"), ArgumentError);
}

TEST_CASE("weighting weights", "[estimators]") {
  const std::vector<int> j{2, 0, 3, 1};
  const Eigen::Vector4d quarter = Eigen::Vector4d::Constant(0.25);

  // shrinking tail: psi first, q_{j_N} last
  CHECK(weighting_weights(Scheme::n2, 0, j).isApprox(quarter));
  CHECK(weighting_weights(Scheme::n2, 3, j) == Eigen::Vector4d(0, 1, 0, 0));
  CHECK(weighting_weights(Scheme::n2, 2, j) == Eigen::Vector4d(0, 0.5, 0, 0.5));
  CHECK(weighting_weights(Scheme::n1, 1, j) == Eigen::Vector4d(1, 0, 0, 0));
  CHECK(weighting_weights(Scheme::n3, 1, j).isApprox(quarter));

  // realized mixture counts repeats
  const std::vector<int> repeats{0, 0, 0, 0};
  CHECK(weighting_weights(Scheme::r2, 1, repeats) == Eigen::Vector4d(1, 0, 0, 0));
  const std::vector<int> mixed{1, 3, 1, 1};
  CHECK(weighting_weights(Scheme::r2, 0, mixed) == Eigen::Vector4d(0, 0.75, 0, 0.25));
  CHECK(weighting_weights(Scheme::r3, 0, mixed).isApprox(quarter));
}

TEST_CASE("first shrinking-tail denominator is the balance mixture", "[estimators]") {
  const auto p = testing::three_proposals();
  const auto psi = p.proposals.balance_mixture();
  const SchemeId n2(Scheme::n2);
  for (const auto& j : enumerate_permutations(3)) {
    const auto first = weighting_function(n2, 0, j, p.proposals);
    CHECK((first.values() - psi.values()).cwiseAbs().maxCoeff() < 1e-15);
    const auto last = weighting_function(n2, 2, j, p.proposals);
    CHECK(last.values() == p.proposals.density(j[2]).values());
  }
}

TEST_CASE("denominator at a point", "[estimators]") {
  const auto p = testing::three_proposals();
  const IndexVector j({1, 2, 0}, SelectionStrategy::rswor);
  const SchemeId n2(Scheme::n2);
  // x = 1.5 lies in cell 1: q values 0.25, 0.6, 0.2
  CHECK(denominator(n2, 0, j, 1.5, p.proposals) == Approx((0.25 + 0.6 + 0.2) / 3));
  CHECK(denominator(n2, 1, j, 1.5, p.proposals) == Approx((0.2 + 0.25) / 2));
  CHECK(denominator(n2, 2, j, 1.5, p.proposals) == 0.25);
  CHECK(denominator(SchemeId(Scheme::n1), 0, j, 1.5, p.proposals) == 0.6);
  CHECK(denominator(n2, 0, j, 3.5, p.proposals) == 0.0);

  const IndexVector ones({0, 0, 0}, SelectionStrategy::rswr);
  CHECK(denominator(SchemeId(Scheme::r2), 1, ones, 0.5, p.proposals) == 0.5);
  CHECK_THROWS_AS(denominator(n2, 3, j, 1.5, p.proposals), ArgumentError);
}

TEST_CASE("inverse-CDF sampler", "[estimators][statistical]") {
  constexpr int draws = 100000;

  SECTION("uniform density") {
    const InverseCdfSampler<double> s(Fn({0.0, 1.0}, {1.0}));
    double sum = 0;
    for (int r = 0; r < draws; ++r) {
      auto gen = RngStream(3, static_cast<std::uint64_t>(r)).slot(1);
      const double x = s(gen).x;
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
      sum += x;
    }
    CHECK(std::abs(sum / draws - 0.5) <= 4 * std::sqrt(1.0 / 12 / draws));
  }
  SECTION("two-cell mass split") {
    const auto p = testing::two_proposals(0.25);
    const InverseCdfSampler<double> s(p.proposals.density(0));
    int left = 0;
    for (int r = 0; r < draws; ++r) {
      auto gen = RngStream(4, static_cast<std::uint64_t>(r)).slot(1);
      const auto d = s(gen);
      REQUIRE(d.cell == p.proposals.density(0).cell_of(d.x));
      left += d.x <= 1.0;
    }
    CHECK(std::abs(static_cast<double>(left) / draws - 0.25) <= 4 * std::sqrt(0.25 * 0.75 / draws));
  }
  SECTION("all mass in one cell") {
    const InverseCdfSampler<double> s(Fn({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 0.0}));
    for (int r = 0; r < 1000; ++r) {
      auto gen = RngStream(5, static_cast<std::uint64_t>(r)).slot(1);
      const auto d = s(gen);
      CHECK(d.cell == 1);
      CHECK(d.x >= 1.0);
      CHECK(d.x <= 2.0);
    }
  }
  SECTION("zero or negative densities are rejected") {
    CHECK_THROWS_AS(InverseCdfSampler<double>(Fn({0.0, 1.0}, {0.0})), DomainError);
    CHECK_THROWS_AS(InverseCdfSampler<double>(Fn({0.0, 1.0, 2.0}, {2.0, -1.0})), DomainError);
  }
}

TEST_CASE("draw records expose each denominator", "[estimators]") {
  const auto p = testing::three_proposals();
  const auto& q = p.proposals.matrix();
  const Simulator<double> sim(p.proposals, p.integrand);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const RngStream key(21, r);

    const auto r2 = sim.replicate(SchemeId(Scheme::r2), key);
    for (const auto& d : r2.draws) {
      double expected = 0;
      for (int m : r2.indices.indices()) expected += q(d.cell, m) / 3;
      CHECK(d.denominator == Approx(expected).epsilon(1e-15));
      CHECK(d.cell == p.integrand.function().cell_of(d.x));
    }

    const auto n1 = sim.replicate(SchemeId(Scheme::n1), key);
    for (const auto& d : n1.draws) CHECK(d.denominator == q(d.cell, d.proposal));

    const auto n3 = sim.replicate(SchemeId(Scheme::n3), key);
    double total = 0;
    for (const auto& d : n3.draws) {
      CHECK(d.denominator == Approx(q.row(d.cell).mean()).epsilon(1e-15));
      total += d.u / d.denominator;
    }
    CHECK(n3.estimate == Approx(total / 3).epsilon(1e-15));
    CHECK(sim.estimate(SchemeId(Scheme::n3), key) == n3.estimate);
  }
}

TEST_CASE("identical proposals make every scheme coincide", "[estimators]") {
  const auto p = testing::identical_proposals(4);
  const Simulator<double> sim(p.proposals, p.integrand);
  for (std::uint64_t r = 0; r < 100; ++r) {
    const RngStream key(8, r);
    const double reference = sim.estimate(kUnbiased[0], key);
    for (const auto& s : kUnbiased) CHECK(sim.estimate(s, key) == Approx(reference).epsilon(1e-14));
  }
}

TEST_CASE("integrand proportional to the balance mixture is estimated exactly", "[estimators]") {
  const auto p = balance_integrand(2.5);
  const Simulator<double> sim(p.proposals, p.integrand);
  for (std::uint64_t r = 0; r < 100; ++r) {
    CHECK(sim.estimate(SchemeId(Scheme::n3), RngStream(9, r)) == Approx(2.5).epsilon(1e-14));
    CHECK(sim.estimate(SchemeId(Scheme::r3), RngStream(9, r)) == Approx(2.5).epsilon(1e-14));
  }
  const auto batch = run_batch(SchemeId(Scheme::n3), sim, 2, 1);
  CHECK(batch.mean == Approx(2.5).epsilon(1e-14));
  CHECK(batch.variance < 1e-28);
  CHECK(std::isnan(batch.variance_se));
}

TEST_CASE("batches are reproducible per seed", "[estimators]") {
  const auto p = testing::two_proposals(0.25);
  const Simulator<double> sim(p.proposals, p.integrand);
  const auto a = run_batch(SchemeId(Scheme::r2), sim, 1000, 77);
  const auto b = run_batch(SchemeId(Scheme::r2), sim, 1000, 77);
  const auto c = run_batch(SchemeId(Scheme::r2), sim, 1000, 78);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  CHECK(a.variance_se == b.variance_se);
  CHECK(a.mean != c.mean);
  CHECK_THROWS_AS(run_batch(SchemeId(Scheme::r2), sim, 1, 77), ArgumentError);
}

TEST_CASE("unbiased schemes centre on the integral", "[estimators][statistical]") {
  const auto p = testing::three_proposals();
  const Simulator<double> sim(p.proposals, p.integrand);
  const double I = exact_I(p.integrand);
  for (const auto& s : kUnbiased) {
    INFO(s.name());
    const auto batch = run_batch(s, sim, 20000, 31);
    CHECK(std::abs(batch.mean - I) <= 4 * batch.mean_se);
  }
}

TEST_CASE("sample variances match the closed forms", "[estimators][statistical]") {
  const auto p = testing::two_proposals(0.25);
  const Simulator<double> sim(p.proposals, p.integrand);
  const auto v = analytic_variances(p.proposals, p.integrand);
  const std::vector<std::pair<Scheme, double>> expected = {
      {Scheme::n1, v.n1}, {Scheme::n2, v.n2}, {Scheme::n3, v.n3},
      {Scheme::r1, v.r1}, {Scheme::r2, v.r2}, {Scheme::r3, v.r3}};
  for (const auto& [tag, var] : expected) {
    INFO(to_string(tag));
    const auto batch = run_batch(SchemeId(tag), sim, 20000, 41);
    CHECK(std::abs(batch.variance - var) <= 5 * batch.variance_se);
  }
}

TEST_CASE("deterministic selection biases the shrinking-tail scheme", "[estimators][statistical]") {
  const auto p = testing::two_proposals(0.25);
  const auto batch = run_batch(parse_scheme("n2+dswor"), p.proposals, p.integrand, 100000, 2024);
  CHECK(std::abs(batch.mean - 3.25) <= 3 * batch.mean_se);
  CHECK(std::abs(batch.mean - 3.0) > 5 * batch.mean_se);
}
