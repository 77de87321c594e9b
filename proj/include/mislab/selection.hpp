#pragma once

// Index-selection strategies and the exhaustive enumerators behind the exact
// variance computations. Indices are 0-based throughout; reports print them
// 1-based.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mislab/rng.hpp"

namespace mislab {

enum class SelectionStrategy { rswr, rswor, dswor };

/// "rswr", "rswor", "dswor".
std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_strategy(std::string_view name);

/// j = (j_1, ..., j_N) together with the strategy that produced it. Without
/// replacement it is a permutation; deterministic selection is the identity.
class IndexVector {
 public:
  IndexVector(std::vector<int> indices, SelectionStrategy strategy);

  const std::vector<int>& indices() const { return indices_; }
  SelectionStrategy strategy() const { return strategy_; }
  std::size_t size() const { return indices_.size(); }
  int operator[](std::size_t n) const { return indices_[n]; }

  /// "(1,2,3)".
  std::string to_string() const;

  friend bool operator==(const IndexVector&, const IndexVector&) = default;

 private:
  std::vector<int> indices_;
  SelectionStrategy strategy_;
};

/// Draws from slot 0 of the stream; deterministic selection draws nothing.
IndexVector select_indices(SelectionStrategy strategy, int n, const RngStream& rng);

inline constexpr int kMaxPermutationN = 10;
inline constexpr int kMaxMultisetN = 12;
inline constexpr int kMaxIndexVectorN = 7;

/// All N! permutations in lexicographic order.
void for_each_permutation(int n, const std::function<void(std::span<const int>)>& visit);
std::vector<IndexVector> enumerate_permutations(int n);

/// All N^N vectors over {0..N-1} in lexicographic order.
void for_each_index_vector(int n, const std::function<void(std::span<const int>)>& visit);

/// A size-N multiset over {0..N-1}: counts[m] copies of m. `multiplicity` is
/// the number of index vectors that sort to it.
struct IndexMultiset {
  std::vector<int> counts;
  std::uint64_t multiplicity;
};

/// Multisets in lexicographic order of their sorted element lists;
/// multiplicities sum to N^N.
std::vector<IndexMultiset> enumerate_index_multisets(int n);

std::uint64_t factorial(int n);
std::uint64_t binomial(int n, int k);

}  // namespace mislab
