#pragma once

namespace mislab {

/// Law of total variance over the random index vector j.
template <typename Scalar = double>
struct VarianceBreakdown {
  Scalar total;
  Scalar expected_conditional_variance;        // E{ var(I_hat | j) }
  Scalar variance_of_conditional_expectation;  // var{ E(I_hat | j) }
};

}  // namespace mislab
