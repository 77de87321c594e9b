#pragma once

// Brute-force variances from first principles.
//
// For a fixed index vector j the draws are independent, so the estimator's
// conditional mean and variance are (1/N) sum mu_n(j) and (1/N^2) sum V_n(j),
// with mu_n, V_n the mean and variance of u(X)/d_n(X) under X ~ q_{j_n}. The
// unconditional variance then follows from the law of total variance by
// averaging over every j the strategy can produce. Nothing here uses a
// closed-form variance; the only code shared with the analytic engine is the
// ratio-integral kernel.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <span>
#include <vector>

#include "mislab/errors.hpp"
#include "mislab/estimators.hpp"
#include "mislab/proposal_set.hpp"
#include "mislab/selection.hpp"
#include "mislab/variance_breakdown.hpp"

namespace mislab {

inline constexpr int kMaxOraclePermutationN = 8;
inline constexpr int kMaxOracleIndexVectorN = 7;

template <typename Scalar = double>
struct ConditionalMoments {
  IndexVector j;
  VectorX<Scalar> mu;  // mu_n(j) = E[u(X)/d_n(X)],   X ~ q_{j_n}
  VectorX<Scalar> V;   // V_n(j)  = var[u(X)/d_n(X)], X ~ q_{j_n}

  Scalar mean() const { return mu.mean(); }
  Scalar variance() const {
    const auto n = static_cast<Scalar>(V.size());
    return V.sum() / (n * n);
  }
};

template <typename Scalar>
ConditionalMoments<Scalar> conditional_moments(const SchemeId& scheme, const IndexVector& j,
                                               const ProposalSet<Scalar>& q,
                                               const Integrand<Scalar>& u) {
  if (static_cast<Eigen::Index>(j.size()) != q.size())
    throw ArgumentError("index vector length differs from N");
  if (!q.on_grid(u.function())) throw DomainError("integrand is not on the proposal grid");
  const Eigen::Index n = q.size();
  const VectorX<Scalar>& values = u.values();
  const VectorX<Scalar> u2 = values.array().square().matrix();
  ConditionalMoments<Scalar> out{j, VectorX<Scalar>(n), VectorX<Scalar>(n)};
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const auto own = q.matrix().col(j[static_cast<std::size_t>(pos)]);
    const VectorX<Scalar> d =
        q.combine(weighting_weights<Scalar>(scheme.tag(), static_cast<std::size_t>(pos), j.indices()));
    try {
      const Scalar mu = detail::ratio_sum(values.cwiseProduct(own), d, q.widths());
      const Scalar second =
          detail::ratio_sum(u2.cwiseProduct(own), d.cwiseProduct(d), q.widths());
      out.mu[pos] = mu;
      out.V[pos] = second - mu * mu;
    } catch (const InfiniteIntegralError& e) {
      std::ostringstream os;
      os << scheme.name() << " position " << pos + 1 << ", j = " << j.to_string() << ": "
         << e.what();
      throw InfiniteIntegralError(os.str(), e.cell());
    }
  }
  return out;
}

template <typename Scalar = double>
struct OracleResult {
  Scalar expectation;  // E{ E(I_hat | j) }
  VarianceBreakdown<Scalar> variance;
  std::size_t index_vectors;
};

/// Every j the scheme's strategy can produce, each equally likely: all N!
/// permutations (rswor, N <= 8), all N^N vectors (rswr, N <= 7), or the
/// identity (dswor).
template <typename Scalar>
OracleResult<Scalar> brute_variance(const SchemeId& scheme, const ProposalSet<Scalar>& q,
                                    const Integrand<Scalar>& u) {
  const int n = static_cast<int>(q.size());
  std::vector<Scalar> means;
  std::vector<Scalar> variances;
  auto visit = [&](std::span<const int> j) {
    const auto m = conditional_moments(
        scheme, IndexVector(std::vector<int>(j.begin(), j.end()), scheme.strategy()), q, u);
    means.push_back(m.mean());
    variances.push_back(m.variance());
  };
  switch (scheme.strategy()) {
    case SelectionStrategy::rswor:
      if (n > kMaxOraclePermutationN)
        throw SizeError("oracle permutation enumeration is capped at N <= 8");
      for_each_permutation(n, visit);
      break;
    case SelectionStrategy::rswr:
      if (n > kMaxOracleIndexVectorN)
        throw SizeError("oracle index-vector enumeration is capped at N <= 7");
      for_each_index_vector(n, visit);
      break;
    case SelectionStrategy::dswor: {
      std::vector<int> identity(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) identity[static_cast<std::size_t>(i)] = i;
      visit(identity);
      break;
    }
  }

  const auto count = static_cast<Scalar>(means.size());
  Scalar mean(0), expected_variance(0);
  for (std::size_t i = 0; i < means.size(); ++i) {
    mean += means[i];
    expected_variance += variances[i];
  }
  mean /= count;
  expected_variance /= count;
  Scalar spread(0);
  for (const Scalar m : means) spread += (m - mean) * (m - mean);
  spread /= count;

  OracleResult<Scalar> out;
  out.expectation = mean;
  out.variance.expected_conditional_variance = expected_variance;
  out.variance.variance_of_conditional_expectation = spread;
  out.variance.total = expected_variance + spread;
  out.index_vectors = means.size();
  return out;
}

namespace detail {

template <typename Scalar>
void require_oracle_permutations(const ProposalSet<Scalar>& q) {
  if (q.size() > kMaxOraclePermutationN)
    throw SizeError("exhaustive permutation checks are capped at N <= 8");
}

}  // namespace detail

/// Largest |cov(mu_m(j), mu_n(j))|, m != n, for the shrinking-tail scheme
/// under a uniformly random permutation j. Zero in exact arithmetic.
template <typename Scalar>
Scalar check_vanishing_covariances(const ProposalSet<Scalar>& q, const Integrand<Scalar>& u) {
  detail::require_oracle_permutations(q);
  const SchemeId scheme(Scheme::n2);
  const Eigen::Index n = q.size();
  std::vector<VectorX<Scalar>> rows;
  for_each_permutation(static_cast<int>(n), [&](std::span<const int> j) {
    rows.push_back(conditional_moments(
                       scheme, IndexVector(std::vector<int>(j.begin(), j.end()), scheme.strategy()),
                       q, u)
                       .mu);
  });
  MatrixX<Scalar> mu(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) mu.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  const MatrixX<Scalar> centered = mu.rowwise() - mu.colwise().mean();
  const MatrixX<Scalar> cov =
      (centered.transpose() * centered) / static_cast<Scalar>(mu.rows());
  Scalar worst(0);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b) worst = std::max<Scalar>(worst, std::abs(cov(a, b)));
  return worst;
}

template <typename Scalar = double>
struct PrefixConstancy {
  bool pass;
  Scalar max_mean_gap;     // max over prefixes of |avg mu_n over completions - I|
  Scalar max_mixture_gap;  // max relative gap of sum q_{j_n} vs (N-n+1)! xi_{a(j*)}
  std::size_t prefixes;    // prefixes checked, all n >= 2
};

inline constexpr double kPrefixTolerance = 1e-12;

/// For every n >= 2 and every ordered prefix j* = (j_1..j_{n-1}) of distinct
/// indices: averaging mu_n(j) over the (N-n+1)! completions of j* gives I, and
/// summing q_{j_n} over those completions gives (N-n+1)! times the mean of
/// the proposals left out of j*.
template <typename Scalar>
PrefixConstancy<Scalar> check_prefix_constancy(const ProposalSet<Scalar>& q,
                                               const Integrand<Scalar>& u) {
  detail::require_oracle_permutations(q);
  const SchemeId scheme(Scheme::n2);
  const int n = static_cast<int>(q.size());
  const Scalar target = integrate(u.function());
  using std::abs;
  const Scalar mean_scale = std::max(Scalar(1), abs(target));

  // Permutations come in lexicographic order, so all completions of a prefix
  // of length p form one contiguous block of (n - p)! permutations.
  struct Block {
    std::uint64_t size;
    std::uint64_t seen = 0;
    Scalar mu_sum = Scalar(0);
    VectorX<Scalar> column_sum;
    std::vector<int> prefix;
  };
  std::vector<Block> blocks;
  for (int p = 1; p < n; ++p)
    blocks.push_back({factorial(n - p), 0, Scalar(0), VectorX<Scalar>::Zero(q.cells()), {}});

  PrefixConstancy<Scalar> out{true, Scalar(0), Scalar(0), 0};
  for_each_permutation(n, [&](std::span<const int> j) {
    const auto m = conditional_moments(
        scheme, IndexVector(std::vector<int>(j.begin(), j.end()), scheme.strategy()), q, u);
    for (int p = 1; p < n; ++p) {
      auto& b = blocks[static_cast<std::size_t>(p - 1)];
      if (b.seen == 0) b.prefix.assign(j.begin(), j.begin() + p);
      b.mu_sum += m.mu[p];
      b.column_sum += q.matrix().col(j[static_cast<std::size_t>(p)]);
      if (++b.seen < b.size) continue;

      const Scalar gap = abs(b.mu_sum / static_cast<Scalar>(b.size) - target);
      out.max_mean_gap = std::max(out.max_mean_gap, gap);

      VectorX<Scalar> rest = VectorX<Scalar>::Zero(q.cells());
      int left_out = 0;
      for (int g = 0; g < n; ++g) {
        if (std::find(b.prefix.begin(), b.prefix.end(), g) != b.prefix.end()) continue;
        rest += q.matrix().col(g);
        ++left_out;
      }
      const VectorX<Scalar> expected =
          static_cast<Scalar>(b.size) * rest / static_cast<Scalar>(left_out);
      for (Eigen::Index k = 0; k < expected.size(); ++k) {
        const Scalar rel =
            abs(b.column_sum[k] - expected[k]) / std::max(Scalar(1), abs(expected[k]));
        out.max_mixture_gap = std::max(out.max_mixture_gap, rel);
      }
      ++out.prefixes;
      b.seen = 0;
      b.mu_sum = Scalar(0);
      b.column_sum.setZero();
    }
  });
  out.pass = out.max_mean_gap <= Scalar(kPrefixTolerance) * mean_scale &&
             out.max_mixture_gap <= Scalar(kPrefixTolerance);
  return out;
}

}  // namespace mislab
