#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "mislab/proposal_set.hpp"
#include "mislab/rng.hpp"
#include "mislab/step_function.hpp"
#include "test_support.hpp"

using namespace mislab;
using Catch::Approx;
using Fn = StepFunction<double>;

namespace {

/// Random step function on [0, 1] with `cells` cells of random width.
Fn random_step(SplitMix64& gen, int cells, double lo, double hi) {
  std::vector<double> b{0.0};
  for (int k = 0; k < cells; ++k) b.push_back(b.back() + 0.1 + gen.uniform());
  for (auto& x : b) x /= b.back();
  b.back() = 1.0;
  std::vector<double> v;
  for (int k = 0; k < cells; ++k) v.push_back(lo + (hi - lo) * gen.uniform());
  return Fn(b, v);
}

}  // namespace

TEST_CASE("step function construction validates its grid", "[functions]") {
  CHECK_THROWS_AS(Fn(std::vector<double>{0.0, 1.0}, std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(Fn(std::vector<double>{0.0, 1.0, 1.0}, std::vector<double>{1, 2}), DomainError);
  CHECK_THROWS_AS(Fn(std::vector<double>{0.0, 2.0, 1.0}, std::vector<double>{1, 2}), DomainError);
  CHECK_THROWS_AS(Fn(std::vector<double>{0.0, 1.0}, std::vector<double>{1, 2}), DomainError);
  CHECK_THROWS_AS(Fn(std::vector<double>{0.0, 1.0}, std::vector<double>{NAN}), DomainError);
}

TEST_CASE("cells are left-open except the first", "[functions]") {
  const Fn f({0.0, 1.0, 2.0}, {3.0, 5.0});
  CHECK(f(0.0) == 3.0);
  CHECK(f(1.0) == 3.0);
  CHECK(f(1.0000001) == 5.0);
  CHECK(f(2.0) == 5.0);
  CHECK(f(-0.1) == 0.0);
  CHECK(f(2.1) == 0.0);
  CHECK(f.cell_of(2.5) == -1);
}

TEST_CASE("refine_to_common_grid", "[functions]") {
  SECTION("identical grids come back unchanged") {
    const std::vector<Fn> in{Fn({0.0, 1.0, 2.0}, {1.0, 2.0}), Fn({0.0, 1.0, 2.0}, {4.0, 0.0})};
    const auto out = refine_to_common_grid(in);
    REQUIRE(out.size() == 2);
    CHECK(out[0].values() == in[0].values());
    CHECK(out[1].breakpoints() == in[1].breakpoints());
  }
  SECTION("union grid with replicated values") {
    const std::vector<Fn> in{Fn({0.0, 1.0, 2.0}, {1.0, 2.0}), Fn({0.0, 0.5, 2.0}, {7.0, 9.0})};
    const auto out = refine_to_common_grid(in);
    Eigen::Vector4d grid(0.0, 0.5, 1.0, 2.0);
    CHECK(out[0].breakpoints() == grid);
    CHECK(out[1].breakpoints() == grid);
    CHECK(out[0].values() == Eigen::Vector3d(1.0, 1.0, 2.0));
    CHECK(out[1].values() == Eigen::Vector3d(7.0, 9.0, 9.0));
  }
  SECTION("mismatched endpoints are a domain error") {
    const std::vector<Fn> in{Fn({0.0, 1.0}, {1.0}), Fn({0.0, 2.0}, {1.0})};
    CHECK_THROWS_AS(refine_to_common_grid(in), DomainError);
  }
  SECTION("the two-proposal densities already share a grid") {
    const auto p = testing::two_proposals(0.25);
    CHECK(p.proposals.breakpoints() == Eigen::Vector3d(0.0, 1.0, 2.0));
  }
}

TEST_CASE("integrate", "[functions]") {
  const auto p = testing::two_proposals(0.25);
  CHECK(integrate(p.proposals.density(0)) == Approx(1.0).margin(1e-15));
  CHECK(integrate(p.proposals.balance_mixture()) == 1.0);
  CHECK(p.proposals.balance_values() == Eigen::Vector2d(0.5, 0.5));
  CHECK(integrate(Fn({0.0, 1.0, 2.0}, {1.0, 2.0})) == 3.0);
}

TEST_CASE("integrate_ratio", "[functions]") {
  const Fn u({0.0, 1.0, 2.0}, {1.0, 2.0});
  const Fn psi({0.0, 1.0, 2.0}, {0.5, 0.5});
  CHECK(integrate_ratio(psi, psi) == 2.0);
  CHECK(integrate_ratio(square(u), psi) == 10.0);

  const Fn zero({0.0, 1.0, 2.0}, {0.0, 0.0});
  const Fn holes({0.0, 1.0, 2.0}, {0.0, 0.0});
  CHECK(integrate_ratio(zero, holes) == 0.0);

  const Fn partial({0.0, 1.0, 2.0}, {0.0, 3.0});
  try {
    integrate_ratio(u, partial);
    FAIL("expected InfiniteIntegralError");
  } catch (const InfiniteIntegralError& e) {
    CHECK(e.cell() == 0);
  }
  CHECK_THROWS_AS(integrate_ratio(u, Fn({0.0, 2.0}, {1.0})), DomainError);
}

TEST_CASE("mixture", "[functions]") {
  const auto p = testing::two_proposals(0.25);
  const std::vector<Fn> parts{p.proposals.density(0), p.proposals.density(1)};

  const auto half = mixture<double>({0.5, 0.5}, parts);
  CHECK(half.values() == Eigen::Vector2d(0.5, 0.5));

  const auto first = mixture<double>({1.0, 0.0}, parts);
  CHECK(first.values() == parts[0].values());

  const std::vector<Fn> same(3, parts[0]);
  const auto idem = mixture<double>({1.0 / 3, 1.0 / 3, 1.0 / 3}, same);
  CHECK((idem.values() - parts[0].values()).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(mixture<double>({0.5, 0.4}, parts), ArgumentError);
  CHECK_THROWS_AS(mixture<double>({1.2, -0.2}, parts), ArgumentError);
  CHECK_THROWS_AS(mixture<double>({1.0}, parts), ArgumentError);
}

TEST_CASE("integration properties on random step functions", "[functions][property]") {
  SplitMix64 gen(20240611);
  for (int trial = 0; trial < 200; ++trial) {
    const int cells_a = 1 + static_cast<int>(gen.uniform_index(6));
    const int cells_b = 1 + static_cast<int>(gen.uniform_index(6));
    const Fn a = random_step(gen, cells_a, 0.05, 2.0);
    const Fn b = random_step(gen, cells_b, 0.05, 2.0);
    const Fn f = random_step(gen, cells_a, -1.0, 1.0);

    // refinement preserves integrals
    const auto refined = refine_to_common_grid(std::vector<Fn>{a, b, f});
    CHECK(integrate(refined[0]) == Approx(integrate(a)).margin(1e-12));
    CHECK(integrate(refined[1]) == Approx(integrate(b)).margin(1e-12));
    CHECK(integrate(refined[2]) == Approx(integrate(f)).margin(1e-12));

    // linearity of mixture
    const double w = gen.uniform();
    const std::vector<Fn> parts{refined[0], refined[1]};
    const auto mix = mixture<double>({w, 1.0 - w}, parts);
    CHECK(integrate(mix) ==
          Approx(w * integrate(a) + (1.0 - w) * integrate(b)).margin(1e-12));

    // (f g) / g integrates like f when g > 0
    CHECK(integrate_ratio(product(refined[2], refined[1]), refined[1]) ==
          Approx(integrate(f)).margin(1e-12));

    // harmonic mean never exceeds the arithmetic mean
    const auto u2 = square(refined[2]);
    const auto equal = mixture<double>({0.5, 0.5}, parts);
    const double to_mixture = integrate_ratio(u2, equal);
    const double mean_of_parts = 0.5 * (integrate_ratio(u2, parts[0]) + integrate_ratio(u2, parts[1]));
    CHECK(to_mixture <= mean_of_parts + 1e-12);
  }
}

TEST_CASE("proposal sets normalize within tolerance and reject otherwise", "[functions]") {
  const std::vector<double> grid{0.0, 1.0};
  const Fn good = Fn(grid, {1.0});
  const Fn close = Fn(grid, {1.0 + 5e-10});
  const Fn off = Fn(grid, {0.9});
  const Fn negative = Fn({0.0, 1.0, 2.0}, {1.5, -0.5});

  const ProposalSet<double> ok({good, close});
  CHECK(integrate(ok.density(1)) == Approx(1.0).margin(1e-15));
  CHECK_THROWS_AS(ProposalSet<double>({good, off}), DomainError);
  CHECK_THROWS_AS(ProposalSet<double>({Fn({0.0, 1.0, 2.0}, {0.5, 0.5}), negative}), DomainError);
  CHECK_THROWS_AS(ProposalSet<double>({good}), ArgumentError);
}

TEST_CASE("integrand must be covered by some proposal", "[functions]") {
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const std::vector<Fn> qs{Fn(grid, {1.0, 0.0}), Fn(grid, {1.0, 0.0})};
  CHECK_THROWS_AS(make_problem(qs, Fn(grid, {1.0, 1.0})), InfiniteIntegralError);
  CHECK_NOTHROW(make_problem(qs, Fn(grid, {1.0, 0.0})));

  // an integrand on a finer grid refines the proposals too
  const auto p = make_problem(std::vector<Fn>{Fn(grid, {0.5, 0.5}), Fn(grid, {0.25, 0.75})},
                              Fn({0.0, 0.5, 2.0}, {1.0, 2.0}));
  CHECK(p.proposals.cells() == 3);
  CHECK(integrate(p.integrand.function()) == 3.5);
}

TEST_CASE("long double instantiation", "[functions]") {
  using L = StepFunction<long double>;
  const L u(std::vector<long double>{0, 1, 2}, std::vector<long double>{1, 2});
  const L psi(std::vector<long double>{0, 1, 2}, std::vector<long double>{0.5L, 0.5L});
  CHECK(integrate_ratio(square(u), psi) == 10.0L);
}
