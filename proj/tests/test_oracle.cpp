#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mislab/analytic.hpp"
#include "mislab/harness.hpp"
#include "mislab/oracle.hpp"
#include "test_support.hpp"

using namespace mislab;
using Catch::Approx;
using testing::relative_gap;

namespace {

double closed_form(Scheme s, const Problem<double>& p) {
  switch (s) {
    case Scheme::n1: return var_n1(p.proposals, p.integrand);
    case Scheme::n2: return var_n2(p.proposals, p.integrand);
    case Scheme::n3: return var_n3(p.proposals, p.integrand);
    case Scheme::r1: return var_r1(p.proposals, p.integrand);
    case Scheme::r2: return var_r2(p.proposals, p.integrand);
    case Scheme::r3: return var_r3(p.proposals, p.integrand);
  }
  return NAN;
}

constexpr Scheme kAll[] = {Scheme::n1, Scheme::n2, Scheme::n3, Scheme::r1, Scheme::r2, Scheme::r3};

}  // namespace

TEST_CASE("oracle reproduces the frozen two-proposal values", "[oracle]") {
  const auto p = testing::two_proposals(0.25);
  const auto n2 = brute_variance(SchemeId(Scheme::n2), p.proposals, p.integrand);
  CHECK(n2.index_vectors == 2);
  CHECK(n2.expectation == Approx(3.0).epsilon(1e-14));
  CHECK(n2.variance.total == Approx(4.0 / 3).epsilon(1e-14));
  CHECK(n2.variance.expected_conditional_variance == Approx(61.0 / 48).epsilon(1e-14));
  CHECK(n2.variance.variance_of_conditional_expectation == Approx(1.0 / 16).epsilon(1e-14));

  const auto r3 = brute_variance(SchemeId(Scheme::r3), p.proposals, p.integrand);
  CHECK(r3.index_vectors == 4);
  CHECK(r3.variance.expected_conditional_variance == Approx(3.0 / 8).epsilon(1e-14));
  CHECK(r3.variance.variance_of_conditional_expectation == Approx(1.0 / 8).epsilon(1e-14));

  const auto biased = brute_variance(parse_scheme("n2+dswor"), p.proposals, p.integrand);
  CHECK(biased.index_vectors == 1);
  CHECK(biased.expectation == Approx(3.25).epsilon(1e-14));
  CHECK(biased.variance.total == Approx(109.0 / 48).epsilon(1e-14));
}

TEST_CASE("oracle decomposition matches the pair formula", "[oracle]") {
  for (int i = 1; i <= 9; ++i) {
    const auto p = testing::two_proposals(0.1 * i);
    const auto o = brute_variance(SchemeId(Scheme::n2), p.proposals, p.integrand);
    const auto d = var_n2_decomposition_pair(p.proposals, p.integrand);
    CHECK(relative_gap(o.variance.expected_conditional_variance,
                       d.expected_conditional_variance) <= 1e-12);
    CHECK(relative_gap(o.variance.variance_of_conditional_expectation,
                       d.variance_of_conditional_expectation) <= 1e-12);
  }
}

TEST_CASE("oracle agrees with every closed form", "[oracle]") {
  for (int n = 2; n <= 5; ++n) {
    for (std::uint64_t k = 0; k < 4; ++k) {
      const auto p = random_instance(n, 5, RngStream(900 + n, k));
      const double I = exact_I(p.integrand);
      for (Scheme s : kAll) {
        INFO("N = " << n << ", " << to_string(s));
        const auto o = brute_variance(SchemeId(s), p.proposals, p.integrand);
        const double tol = (s == Scheme::n2 || s == Scheme::r2) ? 1e-10 : 1e-12;
        CHECK(relative_gap(o.variance.total, closed_form(s, p)) <= tol);
        CHECK(relative_gap(o.expectation, I) <= 1e-12);
      }
    }
  }
}

TEST_CASE("fixed-denominator schemes have a constant conditional mean", "[oracle]") {
  const auto p = random_instance(4, 6, RngStream(17, 0));
  for (Scheme s : {Scheme::n1, Scheme::n3}) {
    const auto o = brute_variance(SchemeId(s), p.proposals, p.integrand);
    CHECK(std::abs(o.variance.variance_of_conditional_expectation) <= 1e-13);
  }
  // r2 averages over multisets but each conditional mean is still I
  const auto r2 = brute_variance(SchemeId(Scheme::r2), p.proposals, p.integrand);
  CHECK(std::abs(r2.variance.variance_of_conditional_expectation) <= 1e-13);
}

TEST_CASE("conditional moments are well formed", "[oracle]") {
  const auto p = testing::three_proposals();
  for (const auto& j : enumerate_permutations(3)) {
    const auto m = conditional_moments(SchemeId(Scheme::n2), j, p.proposals, p.integrand);
    for (Eigen::Index n = 0; n < 3; ++n) CHECK(m.V[n] >= -1e-14);
  }
  const IndexVector wrong({0, 1}, SelectionStrategy::rswor);
  CHECK_THROWS_AS(conditional_moments(SchemeId(Scheme::n2), wrong, p.proposals, p.integrand),
                  ArgumentError);
}

TEST_CASE("shrinking-tail terms are uncorrelated", "[oracle]") {
  for (int n = 2; n <= 6; ++n) {
    const auto p = random_instance(n, 5, RngStream(61, static_cast<std::uint64_t>(n)));
    const double scale = std::max(1.0, std::pow(exact_I(p.integrand), 2));
    CHECK(check_vanishing_covariances(p.proposals, p.integrand) <= 1e-12 * scale);
  }
}

TEST_CASE("prefix averages are constant", "[oracle]") {
  for (int n = 2; n <= 6; ++n) {
    const auto p = random_instance(n, 5, RngStream(62, static_cast<std::uint64_t>(n)));
    const auto c = check_prefix_constancy(p.proposals, p.integrand);
    INFO("N = " << n << " mean gap " << c.max_mean_gap << " mixture gap " << c.max_mixture_gap);
    CHECK(c.pass);
    // ordered prefixes of length 1..N-1 drawn from N indices
    std::size_t expected = 0;
    for (int len = 1; len < n; ++len) expected += factorial(n) / factorial(n - len);
    CHECK(c.prefixes == expected);
  }
}

TEST_CASE("deterministic selection shifts the mean", "[oracle]") {
  for (int n = 2; n <= 5; ++n) {
    const auto p = random_instance(n, 5, RngStream(63, static_cast<std::uint64_t>(n)));
    const auto o = brute_variance(parse_scheme("n2+dswor"), p.proposals, p.integrand);
    CHECK(relative_gap(o.expectation, expected_n2_dswor(p.proposals, p.integrand)) <= 1e-12);
  }
  const auto p = testing::three_proposals();
  const auto o = brute_variance(parse_scheme("n2+dswor"), p.proposals, p.integrand);
  CHECK(std::abs(o.expectation - 2.5) > 0.1);
}

TEST_CASE("oracle size caps", "[oracle]") {
  const auto perm = testing::identical_proposals(kMaxOraclePermutationN + 1);
  CHECK_THROWS_AS(brute_variance(SchemeId(Scheme::n2), perm.proposals, perm.integrand), SizeError);
  CHECK_THROWS_AS(check_vanishing_covariances(perm.proposals, perm.integrand), SizeError);
  const auto rep = testing::identical_proposals(kMaxOracleIndexVectorN + 1);
  CHECK_THROWS_AS(brute_variance(SchemeId(Scheme::r2), rep.proposals, rep.integrand), SizeError);
}
