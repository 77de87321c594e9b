#pragma once

// Piecewise-constant functions on a finite interval.
//
// Every density and integrand in the library is a step function, so the
// integrals the variance formulas need (u^2/q, u q/d, ...) evaluate exactly as
// finite sums over cells. Functions that are combined must live on the same
// grid; refine_to_common_grid() puts an arbitrary family onto the union of
// their breakpoints.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mislab/errors.hpp"

namespace mislab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Cell of a grid containing x under the (b_{k-1}, b_k] convention, with
/// b_0 belonging to the first cell; -1 outside [b_0, b_K].
template <typename Scalar>
Eigen::Index locate_cell(const VectorX<Scalar>& breakpoints, Scalar x) {
  const Eigen::Index last_index = breakpoints.size() - 1;
  if (x < breakpoints[0] || x > breakpoints[last_index]) return -1;
  if (x == breakpoints[0]) return 0;
  const Scalar* first = breakpoints.data();
  const Scalar* last = first + breakpoints.size();
  const Scalar* it = std::lower_bound(first, last, x);
  return static_cast<Eigen::Index>(it - first) - 1;
}

/// Step function with value v_k on the cell (b_{k-1}, b_k]. The first cell
/// also owns its left endpoint, so the function is defined on all of [b_0, b_K].
template <typename Scalar = double>
class StepFunction {
 public:
  using Vector = VectorX<Scalar>;

  StepFunction(Vector breakpoints, Vector values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() < 1)
      throw DomainError("step function needs at least one cell");
    if (breakpoints_.size() != values_.size() + 1) {
      std::ostringstream os;
      os << "step function has " << breakpoints_.size() << " breakpoints for "
         << values_.size() << " values (expected values + 1)";
      throw DomainError(os.str());
    }
    for (Eigen::Index k = 0; k < breakpoints_.size(); ++k) {
      if (!std::isfinite(static_cast<double>(breakpoints_[k])))
        throw DomainError("breakpoints must be finite");
      if (k > 0 && !(breakpoints_[k - 1] < breakpoints_[k]))
        throw DomainError("breakpoints must be strictly increasing");
    }
    for (Eigen::Index k = 0; k < values_.size(); ++k)
      if (!std::isfinite(static_cast<double>(values_[k])))
        throw DomainError("step function values must be finite");
  }

  StepFunction(const std::vector<Scalar>& breakpoints, const std::vector<Scalar>& values)
      : StepFunction(to_vector(breakpoints), to_vector(values)) {}

  StepFunction(std::initializer_list<Scalar> breakpoints, std::initializer_list<Scalar> values)
      : StepFunction(std::vector<Scalar>(breakpoints), std::vector<Scalar>(values)) {}

  static StepFunction constant(Scalar lower, Scalar upper, Scalar value) {
    Vector b(2), v(1);
    b << lower, upper;
    v << value;
    return StepFunction(std::move(b), std::move(v));
  }

  Eigen::Index cells() const { return values_.size(); }
  const Vector& breakpoints() const { return breakpoints_; }
  const Vector& values() const { return values_; }
  Scalar lower() const { return breakpoints_[0]; }
  Scalar upper() const { return breakpoints_[breakpoints_.size() - 1]; }

  Vector widths() const {
    const Eigen::Index k = cells();
    return breakpoints_.tail(k) - breakpoints_.head(k);
  }

  /// Index of the cell containing x, or -1 outside [lower, upper].
  Eigen::Index cell_of(Scalar x) const { return locate_cell(breakpoints_, x); }

  /// Zero outside the domain.
  Scalar operator()(Scalar x) const {
    const Eigen::Index k = cell_of(x);
    return k < 0 ? Scalar(0) : values_[k];
  }

  bool same_grid(const StepFunction& other) const {
    return breakpoints_.size() == other.breakpoints_.size() &&
           breakpoints_ == other.breakpoints_;
  }

  bool is_nonnegative() const { return (values_.array() >= Scalar(0)).all(); }

 private:
  static Vector to_vector(const std::vector<Scalar>& xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
    return v;
  }

  Vector breakpoints_;
  Vector values_;
};

namespace detail {

/// Sum_k (num_k / den_k) * width_k over cells with num_k != 0. The integrand
/// vanishes where the numerator does, so a zero denominator there is not an
/// error. Fixed left-to-right summation keeps results bit-stable.
template <typename NumDerived, typename DenDerived, typename WidthDerived>
typename NumDerived::Scalar ratio_sum(const Eigen::MatrixBase<NumDerived>& num,
                                      const Eigen::MatrixBase<DenDerived>& den,
                                      const Eigen::MatrixBase<WidthDerived>& widths) {
  using Scalar = typename NumDerived::Scalar;
  Scalar sum(0);
  for (Eigen::Index k = 0; k < num.size(); ++k) {
    const Scalar n = num[k];
    if (n == Scalar(0)) continue;
    const Scalar d = den[k];
    if (!(d > Scalar(0))) {
      std::ostringstream os;
      os << "ratio integral diverges on cell " << k << ": numerator " << static_cast<double>(n)
         << " over denominator " << static_cast<double>(d);
      throw InfiniteIntegralError(os.str(), k);
    }
    sum += n / d * widths[k];
  }
  return sum;
}

template <typename Scalar>
void require_same_grid(const StepFunction<Scalar>& a, const StepFunction<Scalar>& b,
                       const char* op) {
  if (!a.same_grid(b))
    throw DomainError(std::string(op) + ": functions are not on a shared grid");
}

}  // namespace detail

template <typename Scalar>
Scalar integrate(const StepFunction<Scalar>& f) {
  return f.values().dot(f.widths());
}

/// Integral of num/den. Cells where num is zero contribute nothing whatever
/// den is there; num != 0 over den <= 0 throws InfiniteIntegralError.
template <typename Scalar>
Scalar integrate_ratio(const StepFunction<Scalar>& num, const StepFunction<Scalar>& den) {
  detail::require_same_grid(num, den, "integrate_ratio");
  return detail::ratio_sum(num.values(), den.values(), num.widths());
}

template <typename Scalar>
StepFunction<Scalar> product(const StepFunction<Scalar>& f, const StepFunction<Scalar>& g) {
  detail::require_same_grid(f, g, "product");
  return StepFunction<Scalar>(f.breakpoints(),
                              (f.values().array() * g.values().array()).matrix());
}

template <typename Scalar>
StepFunction<Scalar> square(const StepFunction<Scalar>& f) {
  return StepFunction<Scalar>(f.breakpoints(), f.values().array().square().matrix());
}

template <typename Scalar>
StepFunction<Scalar> scale(const StepFunction<Scalar>& f, Scalar c) {
  return StepFunction<Scalar>(f.breakpoints(), (c * f.values()).eval());
}

/// Weights must be nonnegative and sum to 1 within 1e-12.
template <typename Scalar>
void check_convex_weights(std::span<const Scalar> weights) {
  Scalar total(0);
  for (const Scalar w : weights) {
    if (!(w >= Scalar(0))) throw ArgumentError("mixture weights must be nonnegative");
    total += w;
  }
  using std::abs;
  if (abs(total - Scalar(1)) > Scalar(1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "mixture weights sum to " << static_cast<double>(total) << ", not 1";
    throw ArgumentError(os.str());
  }
}

/// Pointwise convex combination sum_i w_i parts_i on the parts' shared grid.
template <typename Scalar>
StepFunction<Scalar> mixture(std::span<const Scalar> weights,
                             std::span<const StepFunction<Scalar>> parts) {
  if (parts.empty()) throw ArgumentError("mixture of zero parts");
  if (weights.size() != parts.size())
    throw ArgumentError("mixture: weight count differs from part count");
  check_convex_weights(weights);
  VectorX<Scalar> values = VectorX<Scalar>::Zero(parts.front().cells());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    detail::require_same_grid(parts.front(), parts[i], "mixture");
    values += weights[i] * parts[i].values();
  }
  return StepFunction<Scalar>(parts.front().breakpoints(), std::move(values));
}

template <typename Scalar>
StepFunction<Scalar> mixture(const std::vector<Scalar>& weights,
                             const std::vector<StepFunction<Scalar>>& parts) {
  return mixture(std::span<const Scalar>(weights), std::span<const StepFunction<Scalar>>(parts));
}

/// Re-express every function on the union of all breakpoints. Pointwise values
/// (and therefore integrals) are unchanged.
template <typename Scalar>
std::vector<StepFunction<Scalar>> refine_to_common_grid(
    std::span<const StepFunction<Scalar>> fns) {
  if (fns.empty()) return {};
  for (const auto& f : fns)
    if (f.lower() != fns.front().lower() || f.upper() != fns.front().upper())
      throw DomainError("refine_to_common_grid: functions have different domain endpoints");

  std::vector<Scalar> grid;
  for (const auto& f : fns)
    grid.insert(grid.end(), f.breakpoints().data(),
                f.breakpoints().data() + f.breakpoints().size());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const auto cells = static_cast<Eigen::Index>(grid.size()) - 1;
  VectorX<Scalar> breakpoints = Eigen::Map<const VectorX<Scalar>>(grid.data(), cells + 1);

  std::vector<StepFunction<Scalar>> out;
  out.reserve(fns.size());
  for (const auto& f : fns) {
    if (f.cells() == cells) {
      out.push_back(f);
      continue;
    }
    VectorX<Scalar> values(cells);
    for (Eigen::Index k = 0; k < cells; ++k)
      values[k] = f((breakpoints[k] + breakpoints[k + 1]) / Scalar(2));
    out.emplace_back(breakpoints, std::move(values));
  }
  return out;
}

template <typename Scalar>
std::vector<StepFunction<Scalar>> refine_to_common_grid(
    const std::vector<StepFunction<Scalar>>& fns) {
  return refine_to_common_grid(std::span<const StepFunction<Scalar>>(fns));
}

}  // namespace mislab
