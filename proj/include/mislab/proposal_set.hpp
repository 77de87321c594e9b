#pragma once

#include <Eigen/Core>

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "mislab/errors.hpp"
#include "mislab/step_function.hpp"

namespace mislab {

/// Densities accepted within this distance of unit mass are rescaled to it;
/// anything further off is rejected.
inline constexpr double kNormalizationTolerance = 1e-9;

/// N >= 2 proposal densities on one shared grid, stored column-wise as a
/// cells x N matrix so that any mixture is a matrix-vector product.
template <typename Scalar = double>
class ProposalSet {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  explicit ProposalSet(std::vector<StepFunction<Scalar>> densities) {
    if (densities.size() < 2) throw ArgumentError("a proposal set needs at least two densities");
    auto refined = refine_to_common_grid(std::span<const StepFunction<Scalar>>(densities));
    breakpoints_ = refined.front().breakpoints();
    widths_ = refined.front().widths();
    densities_.resize(refined.front().cells(), static_cast<Eigen::Index>(refined.size()));
    for (std::size_t n = 0; n < refined.size(); ++n) {
      const auto& q = refined[n];
      if (!q.is_nonnegative()) {
        std::ostringstream os;
        os << "proposal " << n << " has negative values";
        throw DomainError(os.str());
      }
      const Scalar mass = integrate(q);
      using std::abs;
      if (!(abs(mass - Scalar(1)) <= Scalar(kNormalizationTolerance))) {
        std::ostringstream os;
        os.precision(17);
        os << "proposal " << n << " integrates to " << static_cast<double>(mass)
           << ", not 1 (tolerance " << kNormalizationTolerance << ")";
        throw DomainError(os.str());
      }
      densities_.col(static_cast<Eigen::Index>(n)) = q.values() / mass;
    }
  }

  Eigen::Index size() const { return densities_.cols(); }
  Eigen::Index cells() const { return densities_.rows(); }
  const Vector& breakpoints() const { return breakpoints_; }
  const Vector& widths() const { return widths_; }

  /// cells x N; column n holds the cell values of q_n.
  const Matrix& matrix() const { return densities_; }

  StepFunction<Scalar> density(Eigen::Index n) const {
    return StepFunction<Scalar>(breakpoints_, densities_.col(n));
  }

  /// Cell values of sum_n w_n q_n. No convexity check; callers that take
  /// user weights go through mixture().
  Vector combine(const Vector& weights) const { return densities_ * weights; }

  StepFunction<Scalar> mixture(const Vector& weights) const {
    if (weights.size() != size()) throw ArgumentError("mixture: weight count differs from N");
    check_convex_weights(std::span<const Scalar>(weights.data(), weights.size()));
    return StepFunction<Scalar>(breakpoints_, combine(weights));
  }

  /// Cell values of psi = (1/N) sum_n q_n.
  Vector balance_values() const { return densities_.rowwise().mean(); }

  StepFunction<Scalar> balance_mixture() const {
    return StepFunction<Scalar>(breakpoints_, balance_values());
  }

  bool on_grid(const StepFunction<Scalar>& f) const {
    return f.breakpoints().size() == breakpoints_.size() && f.breakpoints() == breakpoints_;
  }

 private:
  Vector breakpoints_;
  Vector widths_;
  Matrix densities_;
};

/// The integrand u on a proposal set's grid. Construction checks that every
/// cell where u != 0 is covered by at least one proposal.
template <typename Scalar = double>
class Integrand {
 public:
  Integrand(StepFunction<Scalar> u, const ProposalSet<Scalar>& proposals) : u_(std::move(u)) {
    if (!proposals.on_grid(u_))
      throw DomainError("integrand is not on the proposal grid; build both with make_problem");
    const auto& q = proposals.matrix();
    for (Eigen::Index k = 0; k < u_.cells(); ++k) {
      if (u_.values()[k] != Scalar(0) && !(q.row(k).maxCoeff() > Scalar(0))) {
        std::ostringstream os;
        os << "integrand is nonzero on cell " << k << " where every proposal vanishes";
        throw InfiniteIntegralError(os.str(), k);
      }
    }
  }

  const StepFunction<Scalar>& function() const { return u_; }
  const VectorX<Scalar>& values() const { return u_.values(); }

 private:
  StepFunction<Scalar> u_;
};

template <typename Scalar = double>
struct Problem {
  ProposalSet<Scalar> proposals;
  Integrand<Scalar> integrand;
};

/// Refine densities and integrand onto one grid and validate both.
template <typename Scalar>
Problem<Scalar> make_problem(const std::vector<StepFunction<Scalar>>& densities,
                             const StepFunction<Scalar>& u) {
  std::vector<StepFunction<Scalar>> all = densities;
  all.push_back(u);
  auto refined = refine_to_common_grid(std::span<const StepFunction<Scalar>>(all));
  StepFunction<Scalar> u_refined = refined.back();
  refined.pop_back();
  ProposalSet<Scalar> proposals(std::move(refined));
  Integrand<Scalar> integrand(std::move(u_refined), proposals);
  return Problem<Scalar>{std::move(proposals), std::move(integrand)};
}

}  // namespace mislab
