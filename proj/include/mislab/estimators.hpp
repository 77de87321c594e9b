#pragma once

// The six estimators. Each replication selects j, draws X_n ~ q_{j_n}
// independently given j, and averages u(X_n) / d_n(X_n), where the scheme
// fixes the weighting denominator d_n:
//
//   n1, r1   q_{j_n}
//   n2       lambda_{nj} = mean of q_{j_n}, ..., q_{j_N}     (shrinking tail)
//   n3, r3   psi = mean of all q_m                           (balance heuristic)
//   r2       qbar_j = mean of q_{j_1}, ..., q_{j_N}          (realized mixture)
//
// Every denominator is a mixture of the proposals, so it is represented by its
// weight vector over q_1..q_N and evaluated as a dot product with one row of
// the proposal matrix.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mislab/errors.hpp"
#include "mislab/proposal_set.hpp"
#include "mislab/rng.hpp"
#include "mislab/selection.hpp"

namespace mislab {

enum class Scheme { n1, n2, n3, r1, r2, r3 };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::n1: return "n1";
    case Scheme::n2: return "n2";
    case Scheme::n3: return "n3";
    case Scheme::r1: return "r1";
    case Scheme::r2: return "r2";
    case Scheme::r3: return "r3";
  }
  return "?";
}

inline Scheme parse_scheme_tag(std::string_view name) {
  for (Scheme s : {Scheme::n1, Scheme::n2, Scheme::n3, Scheme::r1, Scheme::r2, Scheme::r3})
    if (to_string(s) == name) return s;
  throw ArgumentError("unknown scheme '" + std::string(name) + "' (expected n1..n3 or r1..r3)");
}

inline bool is_with_replacement(Scheme s) {
  return s == Scheme::r1 || s == Scheme::r2 || s == Scheme::r3;
}

/// A weighting rule bound to a selection strategy. R-schemes only run under
/// rswr; N-schemes default to rswor and also accept dswor.
class SchemeId {
 public:
  explicit SchemeId(Scheme tag, std::optional<SelectionStrategy> strategy = std::nullopt)
      : tag_(tag) {
    if (is_with_replacement(tag)) {
      if (strategy && *strategy != SelectionStrategy::rswr)
        throw ArgumentError(std::string(to_string(tag)) +
                            " selects with replacement; strategy " +
                            std::string(to_string(*strategy)) + " is not allowed");
      strategy_ = SelectionStrategy::rswr;
    } else {
      if (strategy && *strategy == SelectionStrategy::rswr)
        throw ArgumentError(std::string(to_string(tag)) +
                            " selects without replacement; strategy rswr is not allowed");
      strategy_ = strategy.value_or(SelectionStrategy::rswor);
    }
  }

  Scheme tag() const { return tag_; }
  SelectionStrategy strategy() const { return strategy_; }

  /// n2 under deterministic selection does not estimate I in general.
  bool biased() const { return tag_ == Scheme::n2 && strategy_ == SelectionStrategy::dswor; }

  /// "n2", or "n2+dswor" when the strategy is not the default.
  std::string name() const {
    std::string s(to_string(tag_));
    if (!is_with_replacement(tag_) && strategy_ != SelectionStrategy::rswor)
      s += "+" + std::string(to_string(strategy_));
    return s;
  }

  friend bool operator==(const SchemeId&, const SchemeId&) = default;

 private:
  Scheme tag_;
  SelectionStrategy strategy_ = SelectionStrategy::rswor;
};

/// Accepts "n2" or "n2+dswor".
inline SchemeId parse_scheme(std::string_view text) {
  const auto plus = text.find('+');
  if (plus == std::string_view::npos) return SchemeId(parse_scheme_tag(text));
  return SchemeId(parse_scheme_tag(text.substr(0, plus)), parse_strategy(text.substr(plus + 1)));
}

/// Mixture weights over q_1..q_N of the position-n denominator (n 0-based).
template <typename Scalar = double>
VectorX<Scalar> weighting_weights(Scheme scheme, std::size_t n, std::span<const int> j) {
  const auto size = static_cast<Eigen::Index>(j.size());
  VectorX<Scalar> w = VectorX<Scalar>::Zero(size);
  switch (scheme) {
    case Scheme::n1:
    case Scheme::r1:
      w[j[n]] = Scalar(1);
      break;
    case Scheme::n2: {
      const Scalar share = Scalar(1) / static_cast<Scalar>(j.size() - n);
      for (std::size_t k = n; k < j.size(); ++k) w[j[k]] += share;
      break;
    }
    case Scheme::n3:
    case Scheme::r3:
      w.setConstant(Scalar(1) / static_cast<Scalar>(size));
      break;
    case Scheme::r2: {
      const Scalar share = Scalar(1) / static_cast<Scalar>(size);
      for (int m : j) w[m] += share;
      break;
    }
  }
  return w;
}

/// The denominator d_n as a step function on the proposal grid.
template <typename Scalar>
StepFunction<Scalar> weighting_function(const SchemeId& scheme, std::size_t n,
                                        const IndexVector& j,
                                        const ProposalSet<Scalar>& proposals) {
  return StepFunction<Scalar>(
      proposals.breakpoints(),
      proposals.combine(weighting_weights<Scalar>(scheme.tag(), n, j.indices())));
}

/// d_n(x); zero outside the domain.
template <typename Scalar>
Scalar denominator(const SchemeId& scheme, std::size_t n, const IndexVector& j, Scalar x,
                   const ProposalSet<Scalar>& proposals) {
  if (static_cast<Eigen::Index>(j.size()) != proposals.size())
    throw ArgumentError("index vector length differs from N");
  if (n >= j.size()) throw ArgumentError("position out of range");
  const auto cell = locate_cell(proposals.breakpoints(), x);
  if (cell < 0) return Scalar(0);
  return proposals.matrix().row(cell).dot(
      weighting_weights<Scalar>(scheme.tag(), n, j.indices()));
}

/// A point together with the grid cell it was drawn in.
template <typename Scalar>
struct Draw {
  Scalar x;
  Eigen::Index cell;
};

/// Inverse-CDF sampling from a step density with a single uniform: the
/// uniform picks the cell by cumulative mass and its remainder places the
/// point uniformly inside that cell.
template <typename Scalar = double>
class InverseCdfSampler {
 public:
  explicit InverseCdfSampler(const StepFunction<Scalar>& density)
      : breakpoints_(density.breakpoints()), widths_(density.widths()) {
    if (!density.is_nonnegative()) throw DomainError("sampling needs a nonnegative density");
    const VectorX<Scalar> mass = density.values().cwiseProduct(widths_);
    cumulative_.resize(mass.size() + 1);
    cumulative_[0] = Scalar(0);
    for (Eigen::Index k = 0; k < mass.size(); ++k) cumulative_[k + 1] = cumulative_[k] + mass[k];
    total_ = cumulative_[mass.size()];
    if (!(total_ > Scalar(0))) throw DomainError("sampling needs a density with positive mass");
    last_ = mass.size() - 1;
    while (last_ > 0 && !(mass[last_] > Scalar(0))) --last_;
  }

  Draw<Scalar> operator()(SplitMix64& gen) const {
    const Scalar target = static_cast<Scalar>(gen.uniform()) * total_;
    const Scalar* first = cumulative_.data() + 1;
    const Scalar* last = cumulative_.data() + cumulative_.size();
    auto cell = static_cast<Eigen::Index>(std::upper_bound(first, last, target) - first);
    if (cell > last_) cell = last_;
    const Scalar mass = cumulative_[cell + 1] - cumulative_[cell];
    Scalar t = (target - cumulative_[cell]) / mass;
    t = std::clamp(t, Scalar(0), Scalar(1));
    return {breakpoints_[cell] + t * widths_[cell], cell};
  }

 private:
  VectorX<Scalar> breakpoints_;
  VectorX<Scalar> widths_;
  VectorX<Scalar> cumulative_;
  Scalar total_;
  Eigen::Index last_;
};

template <typename Scalar>
Scalar sample_from_density(const StepFunction<Scalar>& q, SplitMix64& gen) {
  return InverseCdfSampler<Scalar>(q)(gen).x;
}

template <typename Scalar>
struct DrawRecord {
  Scalar x;
  int proposal;  // j_n, 0-based
  Eigen::Index cell;
  Scalar u;
  Scalar denominator;
};

template <typename Scalar>
struct ReplicationResult {
  Scalar estimate;
  IndexVector indices;
  std::vector<DrawRecord<Scalar>> draws;
};

/// Shared per-problem state for repeated replications: one sampler per proposal.
template <typename Scalar = double>
class Simulator {
 public:
  Simulator(const ProposalSet<Scalar>& proposals, const Integrand<Scalar>& integrand)
      : proposals_(&proposals), integrand_(&integrand) {
    if (!proposals.on_grid(integrand.function()))
      throw DomainError("integrand is not on the proposal grid");
    samplers_.reserve(static_cast<std::size_t>(proposals.size()));
    for (Eigen::Index n = 0; n < proposals.size(); ++n)
      samplers_.emplace_back(proposals.density(n));
  }

  Eigen::Index size() const { return proposals_->size(); }

  /// Indices from slot 0, X_n from slot n + 1.
  ReplicationResult<Scalar> replicate(const SchemeId& scheme, const RngStream& rng) const {
    auto j = select_indices(scheme.strategy(), static_cast<int>(size()), rng);
    std::vector<DrawRecord<Scalar>> draws;
    draws.reserve(j.size());
    const Scalar estimate = run(scheme, j, rng, &draws);
    return {estimate, std::move(j), std::move(draws)};
  }

  Scalar estimate(const SchemeId& scheme, const RngStream& rng) const {
    const auto j = select_indices(scheme.strategy(), static_cast<int>(size()), rng);
    return run(scheme, j, rng, nullptr);
  }

 private:
  Scalar run(const SchemeId& scheme, const IndexVector& j, const RngStream& rng,
             std::vector<DrawRecord<Scalar>>* draws) const {
    const auto& q = proposals_->matrix();
    const auto& u = integrand_->values();
    Scalar sum(0);
    for (std::size_t n = 0; n < j.size(); ++n) {
      auto gen = rng.slot(n + 1);
      const auto draw = samplers_[static_cast<std::size_t>(j[n])](gen);
      const Scalar den =
          q.row(draw.cell).dot(weighting_weights<Scalar>(scheme.tag(), n, j.indices()));
      const Scalar value = u[draw.cell];
      if (value != Scalar(0)) {
        if (!(den > Scalar(0))) {
          std::ostringstream os;
          os.precision(17);
          os << scheme.name() << ": zero denominator at position " << n + 1 << ", x = "
             << static_cast<double>(draw.x) << ", j = " << j.to_string()
             << " while u(x) = " << static_cast<double>(value);
          throw InfiniteWeightError(os.str());
        }
        sum += value / den;
      }
      if (draws) draws->push_back({draw.x, j[n], draw.cell, value, den});
    }
    return sum / static_cast<Scalar>(j.size());
  }

  const ProposalSet<Scalar>* proposals_;
  const Integrand<Scalar>* integrand_;
  std::vector<InverseCdfSampler<Scalar>> samplers_;
};

template <typename Scalar>
ReplicationResult<Scalar> run_replication(const SchemeId& scheme,
                                          const ProposalSet<Scalar>& proposals,
                                          const Integrand<Scalar>& integrand,
                                          const RngStream& rng) {
  return Simulator<Scalar>(proposals, integrand).replicate(scheme, rng);
}

/// Batches used for the standard error of the sample variance.
inline constexpr std::size_t kVarianceBatches = 50;

template <typename Scalar>
struct BatchResult {
  std::size_t replications;
  Scalar mean;
  Scalar variance;  // unbiased sample variance of the estimator
  Scalar mean_se;
  Scalar variance_se;  // batch means; NaN when fewer than two batches fit
};

/// Running mean and sum of squared deviations (Welford).
template <typename Scalar>
struct RunningMoments {
  std::size_t count = 0;
  Scalar mean = Scalar(0);
  Scalar m2 = Scalar(0);

  void add(Scalar x) {
    ++count;
    const Scalar delta = x - mean;
    mean += delta / static_cast<Scalar>(count);
    m2 += delta * (x - mean);
  }
  Scalar sample_variance() const {
    return count > 1 ? m2 / static_cast<Scalar>(count - 1) : Scalar(0);
  }
};

/// M replications; replication r uses substream key (seed, r).
template <typename Scalar>
BatchResult<Scalar> run_batch(const SchemeId& scheme, const Simulator<Scalar>& sim,
                              std::size_t replications, std::uint64_t seed) {
  if (replications < 2) throw ArgumentError("a batch needs at least two replications");
  const std::size_t batches = std::min(kVarianceBatches, replications / 2);
  const std::size_t batch_size = replications / std::max<std::size_t>(batches, 1);

  RunningMoments<Scalar> all;
  RunningMoments<Scalar> batch;
  RunningMoments<Scalar> batch_variances;
  for (std::size_t r = 0; r < replications; ++r) {
    Scalar value;
    try {
      value = sim.estimate(scheme, RngStream(seed, r));
    } catch (const InfiniteWeightError& e) {
      throw InfiniteWeightError("replication " + std::to_string(r) + ": " + e.what());
    }
    all.add(value);
    batch.add(value);
    // the final batch absorbs the remainder
    if (batch.count == batch_size && batch_variances.count + 1 < batches) {
      batch_variances.add(batch.sample_variance());
      batch = {};
    }
  }
  if (batches >= 2) batch_variances.add(batch.sample_variance());

  BatchResult<Scalar> out;
  out.replications = replications;
  out.mean = all.mean;
  out.variance = all.sample_variance();
  using std::sqrt;
  out.mean_se = sqrt(out.variance / static_cast<Scalar>(replications));
  out.variance_se = batches >= 2 ? sqrt(batch_variances.sample_variance() /
                                        static_cast<Scalar>(batch_variances.count))
                                 : std::numeric_limits<Scalar>::quiet_NaN();
  return out;
}

template <typename Scalar>
BatchResult<Scalar> run_batch(const SchemeId& scheme, const ProposalSet<Scalar>& proposals,
                              const Integrand<Scalar>& integrand, std::size_t replications,
                              std::uint64_t seed) {
  return run_batch(scheme, Simulator<Scalar>(proposals, integrand), replications, seed);
}

}  // namespace mislab
