#pragma once

// Exact variances of the six estimators.
//
// Each closed form is a handful of ratio integrals over the shared grid
// (u^2/q_n, u^2/psi, u q_n/psi, u^2/xi_a, ...), so with step functions the
// values below are exact up to floating rounding. I enters every formula
// through a single exact_I() evaluation.

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mislab/errors.hpp"
#include "mislab/proposal_set.hpp"
#include "mislab/selection.hpp"
#include "mislab/variance_breakdown.hpp"

namespace mislab {

/// xi_a: equal-weight mixture of the proposals whose indices are in `subset`.
template <typename Scalar = double>
struct SubsetMixture {
  std::vector<int> subset;
  StepFunction<Scalar> xi;
};

inline constexpr int kMaxSubsetN = 20;

namespace detail {

template <typename Scalar>
void require_shared_grid(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  if (!q.on_grid(u.function())) throw DomainError("integrand is not on the proposal grid");
}

template <typename Scalar>
VectorX<Scalar> squared(const Integrand<Scalar>& u) {
  return u.values().array().square().matrix();
}

/// int (u q_m / d): u times column m over the denominator values d.
template <typename Scalar>
Scalar weighted_ratio(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u, Eigen::Index m,
                      const VectorX<Scalar>& den) {
  return ratio_sum(u.values().cwiseProduct(q.matrix().col(m)), den, q.widths());
}

template <typename Scalar>
Scalar sum_u2_over_each_proposal(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  const VectorX<Scalar> u2 = squared(u);
  Scalar sum(0);
  for (Eigen::Index n = 0; n < q.size(); ++n) sum += ratio_sum(u2, q.matrix().col(n), q.widths());
  return sum;
}

template <typename Scalar>
void require_pair(const ProposalSet<Scalar>& q, const char* what) {
  if (q.size() != 2)
    throw ArgumentError(std::string(what) + " is the two-proposal closed form; N = " +
                        std::to_string(q.size()));
}

}  // namespace detail

template <typename Scalar>
Scalar exact_I(const Integrand<Scalar>& u) {
  return integrate(u.function());
}

/// (1/N^2) sum_n int u^2/q_n - I^2/N.
template <typename Scalar>
Scalar var_n1(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  const auto n = static_cast<Scalar>(q.size());
  const Scalar i = exact_I(u);
  return detail::sum_u2_over_each_proposal(q, u) / (n * n) - i * i / n;
}

/// Same expression as var_n1: with replacement, own-proposal weighting has the
/// same variance as without.
template <typename Scalar>
Scalar var_r1(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  return var_n1(q, u);
}

/// (1/N) int u^2/psi - (1/N^2) sum_n [int (u/psi) q_n]^2.
template <typename Scalar>
Scalar var_n3(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  const auto n = static_cast<Scalar>(q.size());
  const VectorX<Scalar> psi = q.balance_values();
  const Scalar first = detail::ratio_sum(detail::squared(u), psi, q.widths()) / n;
  Scalar second(0);
  for (Eigen::Index m = 0; m < q.size(); ++m) {
    const Scalar t = detail::weighted_ratio(q, u, m, psi);
    second += t * t;
  }
  return first - second / (n * n);
}

/// (1/N) int u^2/psi - I^2/N.
template <typename Scalar>
Scalar var_r3(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  const auto n = static_cast<Scalar>(q.size());
  const Scalar i = exact_I(u);
  return detail::ratio_sum(detail::squared(u), q.balance_values(), q.widths()) / n - i * i / n;
}

/// Equal-weight mixtures over every subset of the given cardinality, subsets
/// in lexicographic order.
template <typename Scalar>
std::vector<SubsetMixture<Scalar>> subset_mixtures(const ProposalSet<Scalar>& q,
                                                   int cardinality) {
  const int n = static_cast<int>(q.size());
  if (cardinality < 1 || cardinality > n)
    throw ArgumentError("subset cardinality must lie in [1, N]");
  if (n > kMaxSubsetN) throw SizeError("subset enumeration is capped at N <= 20");
  std::vector<SubsetMixture<Scalar>> out;
  std::vector<int> subset(static_cast<std::size_t>(cardinality));
  for (int i = 0; i < cardinality; ++i) subset[static_cast<std::size_t>(i)] = i;
  while (true) {
    VectorX<Scalar> w = VectorX<Scalar>::Zero(q.size());
    for (int g : subset) w[g] = Scalar(1) / static_cast<Scalar>(cardinality);
    out.push_back({subset, StepFunction<Scalar>(q.breakpoints(), q.combine(w))});
    int pos = cardinality - 1;
    while (pos >= 0 && subset[static_cast<std::size_t>(pos)] == n - cardinality + pos) --pos;
    if (pos < 0) break;
    ++subset[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < cardinality; ++i)
      subset[static_cast<std::size_t>(i)] = subset[static_cast<std::size_t>(i - 1)] + 1;
  }
  return out;
}

/// Equal-weight average of xi_a over all subsets of one cardinality. For every
/// cardinality this is psi.
template <typename Scalar>
StepFunction<Scalar> subset_layer_mean(const ProposalSet<Scalar>& q, int cardinality) {
  const auto layer = subset_mixtures(q, cardinality);
  VectorX<Scalar> sum = VectorX<Scalar>::Zero(q.cells());
  for (const auto& s : layer) sum += s.xi.values();
  return StepFunction<Scalar>(q.breakpoints(), sum / static_cast<Scalar>(layer.size()));
}

/// Random selection without replacement, shrinking-tail weighting:
///
///   (1/N^2) sum_{n=1..N} C(N, n-1)^{-1} sum_{|a| = N-n+1} int u^2/xi_a  -  I^2/N
///
/// Enumerates all 2^N - 1 nonempty subsets; layer sums are combined in
/// cardinality order so the result is independent of mask order.
template <typename Scalar>
Scalar var_n2(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  const int n = static_cast<int>(q.size());
  if (n > kMaxSubsetN) {
    std::ostringstream os;
    os << "var_n2 enumerates 2^N subsets; N = " << n << " exceeds the cap " << kMaxSubsetN;
    throw SizeError(os.str());
  }
  const VectorX<Scalar> u2 = detail::squared(u);
  std::vector<Scalar> layer(static_cast<std::size_t>(n + 1), Scalar(0));
  VectorX<Scalar> w(q.size());
  const std::uint32_t masks = std::uint32_t{1} << n;
  for (std::uint32_t mask = 1; mask < masks; ++mask) {
    const int c = std::popcount(mask);
    const Scalar share = Scalar(1) / static_cast<Scalar>(c);
    for (int g = 0; g < n; ++g) w[g] = (mask >> g) & 1u ? share : Scalar(0);
    layer[static_cast<std::size_t>(c)] += detail::ratio_sum(u2, q.combine(w), q.widths());
  }
  Scalar sum(0);
  for (int c = n; c >= 1; --c)
    sum += layer[static_cast<std::size_t>(c)] / static_cast<Scalar>(binomial(n, c));
  const auto nn = static_cast<Scalar>(n);
  const Scalar i = exact_I(u);
  return sum / (nn * nn) - i * i / nn;
}

/// Two-proposal closed form, written out independently of the subset sum:
/// (1/4) int u^2/psi + (1/8) sum_n int u^2/q_n - I^2/2.
template <typename Scalar>
Scalar var_n2_pair(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  detail::require_pair(q, "var_n2_pair");
  const Scalar i = exact_I(u);
  const Scalar to_psi = detail::ratio_sum(detail::squared(u), q.balance_values(), q.widths());
  return to_psi / Scalar(4) + detail::sum_u2_over_each_proposal(q, u) / Scalar(8) - i * i / Scalar(2);
}

/// Both terms of the total-variance split for N = 2:
///   E{var|j} = (1/4) int u^2/psi + (1/8) sum int u^2/q_n - (1/8) sum [int (u/psi) q_n]^2 - I^2/4
///   var{E|j} = (1/8) sum [int (u/psi) q_n]^2 - I^2/4
template <typename Scalar>
VarianceBreakdown<Scalar> var_n2_decomposition_pair(const ProposalSet<Scalar>& q,
                                                    const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  detail::require_pair(q, "var_n2_decomposition_pair");
  const Scalar i = exact_I(u);
  const VectorX<Scalar> psi = q.balance_values();
  const Scalar to_psi = detail::ratio_sum(detail::squared(u), psi, q.widths());
  Scalar cross(0);
  for (Eigen::Index m = 0; m < 2; ++m) {
    const Scalar t = detail::weighted_ratio(q, u, m, psi);
    cross += t * t;
  }
  VarianceBreakdown<Scalar> out;
  out.expected_conditional_variance = to_psi / Scalar(4) +
                                      detail::sum_u2_over_each_proposal(q, u) / Scalar(8) -
                                      cross / Scalar(8) - i * i / Scalar(4);
  out.variance_of_conditional_expectation = cross / Scalar(8) - i * i / Scalar(4);
  out.total = out.expected_conditional_variance + out.variance_of_conditional_expectation;
  return out;
}

/// Conditional variance of the realized-mixture estimator for the index
/// multiset with counts[m] copies of proposal m:
///   W = (1/N) int u^2/qbar - (1/N^2) sum_n [int (u/qbar) q_{j_n}]^2.
template <typename Scalar>
Scalar W_of_counts(const std::vector<int>& counts, const ProposalSet<Scalar>& q,
                   const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  if (static_cast<Eigen::Index>(counts.size()) != q.size())
    throw ArgumentError("multiset counts must have one entry per proposal");
  const auto n = static_cast<Scalar>(q.size());
  VectorX<Scalar> w(q.size());
  int total = 0;
  for (Eigen::Index m = 0; m < q.size(); ++m) {
    const int c = counts[static_cast<std::size_t>(m)];
    if (c < 0) throw ArgumentError("negative multiset count");
    total += c;
    w[m] = static_cast<Scalar>(c) / n;
  }
  if (total != static_cast<int>(q.size())) throw ArgumentError("multiset size must equal N");
  const VectorX<Scalar> qbar = q.combine(w);
  const Scalar first = detail::ratio_sum(detail::squared(u), qbar, q.widths()) / n;
  Scalar second(0);
  for (Eigen::Index m = 0; m < q.size(); ++m) {
    const int c = counts[static_cast<std::size_t>(m)];
    if (c == 0) continue;
    const Scalar t = detail::weighted_ratio(q, u, m, qbar);
    second += static_cast<Scalar>(c) * t * t;
  }
  return first - second / (n * n);
}

/// W(j); depends on j only through its multiset.
template <typename Scalar>
Scalar W_of_j(std::span<const int> j, const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  if (static_cast<Eigen::Index>(j.size()) != q.size())
    throw ArgumentError("index vector length differs from N");
  std::vector<int> counts(j.size(), 0);
  for (int m : j) {
    if (m < 0 || m >= static_cast<int>(j.size())) throw ArgumentError("index out of range");
    ++counts[static_cast<std::size_t>(m)];
  }
  return W_of_counts(counts, q, u);
}

template <typename Scalar>
Scalar W_of_j(const IndexVector& j, const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  return W_of_j(std::span<const int>(j.indices()), q, u);
}

/// N^{-N} sum_j W(j), collapsed onto the C(2N-1, N) index multisets.
template <typename Scalar>
Scalar var_r2(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  const int n = static_cast<int>(q.size());
  const auto multisets = enumerate_index_multisets(n);
  Scalar sum(0);
  for (const auto& ms : multisets)
    sum += static_cast<Scalar>(ms.multiplicity) * W_of_counts(ms.counts, q, u);
  return sum / std::pow(static_cast<Scalar>(n), static_cast<Scalar>(n));
}

/// Direct N^N enumeration of var_r2, kept as a cross-check (N <= 7).
template <typename Scalar>
Scalar var_r2_direct(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  const int n = static_cast<int>(q.size());
  Scalar sum(0);
  std::uint64_t count = 0;
  for_each_index_vector(n, [&](std::span<const int> j) {
    sum += W_of_j(j, q, u);
    ++count;
  });
  return sum / static_cast<Scalar>(count);
}

/// Mean of the shrinking-tail estimator when j is fixed to the identity:
/// (1/N) sum_n int {u / lambda_n} q_n with lambda_n the mean of q_n..q_N.
/// Differs from I in general.
template <typename Scalar>
Scalar expected_n2_dswor(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_shared_grid(q, u);
  const Eigen::Index n = q.size();
  Scalar sum(0);
  VectorX<Scalar> w(n);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    w.setZero();
    w.tail(n - pos).setConstant(Scalar(1) / static_cast<Scalar>(n - pos));
    sum += detail::weighted_ratio(q, u, pos, q.combine(w));
  }
  return sum / static_cast<Scalar>(n);
}

template <typename Scalar = double>
struct AnalyticVariances {
  Scalar I;
  Scalar n1, n2, n3, r1, r2, r3;
};

template <typename Scalar>
AnalyticVariances<Scalar> analytic_variances(const ProposalSet<Scalar>& q,
                                             const Integrand<Scalar>& u) {
  return {exact_I(u), var_n1(q, u), var_n2(q, u), var_n3(q, u),
          var_r1(q, u), var_r2(q, u), var_r3(q, u)};
}

enum class CheckStatus { proven_pass, proven_fail, conjecture_pass, conjecture_fail };

inline std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::proven_pass: return "proven-pass";
    case CheckStatus::proven_fail: return "proven-fail";
    case CheckStatus::conjecture_pass: return "conjecture-pass";
    case CheckStatus::conjecture_fail: return "conjecture-fail";
  }
  return "?";
}

enum class Relation { equal, greater_equal };

template <typename Scalar = double>
struct InequalityCheck {
  std::string name;    // e.g. "var_n1 >= var_n2"
  std::string source;  // the argument that establishes it, or "open conjecture"
  Scalar lhs;
  Scalar rhs;
  Scalar margin;  // lhs - rhs
  CheckStatus status;
};

/// Proven relations may be violated by rounding only; slack is 1e-12 on the
/// scale of the compared variances (max(1, |lhs|, |rhs|)).
inline constexpr double kInequalitySlack = 1e-12;

template <typename Scalar>
InequalityCheck<Scalar> make_check(std::string name, std::string source, Scalar lhs, Scalar rhs,
                                   Relation relation, bool proven) {
  using std::abs;
  const Scalar scale = std::max({Scalar(1), abs(lhs), abs(rhs)});
  const Scalar slack = Scalar(kInequalitySlack) * scale;
  const Scalar margin = lhs - rhs;
  const bool holds = relation == Relation::equal ? abs(margin) <= slack : margin >= -slack;
  CheckStatus status;
  if (proven)
    status = holds ? CheckStatus::proven_pass : CheckStatus::proven_fail;
  else
    status = holds ? CheckStatus::conjecture_pass : CheckStatus::conjecture_fail;
  return {std::move(name), std::move(source), lhs, rhs, margin, status};
}

template <typename Scalar = double>
struct InequalityReport {
  AnalyticVariances<Scalar> variances;
  std::vector<InequalityCheck<Scalar>> checks;  // proven relations, then the conjecture

  bool proven_ok() const {
    for (const auto& c : checks)
      if (c.status == CheckStatus::proven_fail) return false;
    return true;
  }
  const InequalityCheck<Scalar>& conjecture() const { return checks.back(); }
};

/// Evaluates the ordering
///   var_r1 = var_n1 >= var_n2 >= var_r3 >= var_n3,   var_r1 >= var_r2
/// (all proven) and the open relation var_r2 >= var_n3, which is reported but
/// never treated as a failure of the library.
template <typename Scalar>
InequalityReport<Scalar> inequality_report(const ProposalSet<Scalar>& q,
                                           const Integrand<Scalar>& u) {
  InequalityReport<Scalar> r{analytic_variances(q, u), {}};
  const auto& v = r.variances;
  auto& c = r.checks;
  c.push_back(make_check<Scalar>("var_r1 == var_n1", "identical closed forms", v.r1, v.n1,
                                 Relation::equal, true));
  c.push_back(make_check<Scalar>("var_n1 >= var_n2", "AM-HM bound on each subset mixture", v.n1,
                                 v.n2, Relation::greater_equal, true));
  c.push_back(make_check<Scalar>("var_n2 >= var_r3", "AM-HM over subset layers (layer mean is psi)",
                                 v.n2, v.r3, Relation::greater_equal, true));
  c.push_back(make_check<Scalar>("var_r3 >= var_n3", "Cauchy-Schwarz on the psi cross terms", v.r3,
                                 v.n3, Relation::greater_equal, true));
  c.push_back(make_check<Scalar>("var_n2 >= var_n3", "chain of the two preceding bounds", v.n2,
                                 v.n3, Relation::greater_equal, true));
  c.push_back(make_check<Scalar>("var_r1 >= var_r2", "AM-HM bound on each realized mixture", v.r1,
                                 v.r2, Relation::greater_equal, true));
  c.push_back(make_check<Scalar>("var_r2 >= var_n3", "open conjecture", v.r2, v.n3,
                                 Relation::greater_equal, false));
  return r;
}

}  // namespace mislab
