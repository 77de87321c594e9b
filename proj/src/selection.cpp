#include "mislab/selection.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mislab/errors.hpp"

namespace mislab {

std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::rswr: return "rswr";
    case SelectionStrategy::rswor: return "rswor";
    case SelectionStrategy::dswor: return "dswor";
  }
  return "?";
}

SelectionStrategy parse_strategy(std::string_view name) {
  if (name == "rswr") return SelectionStrategy::rswr;
  if (name == "rswor") return SelectionStrategy::rswor;
  if (name == "dswor") return SelectionStrategy::dswor;
  throw ArgumentError("unknown selection strategy '" + std::string(name) +
                      "' (expected rswr, rswor or dswor)");
}

IndexVector::IndexVector(std::vector<int> indices, SelectionStrategy strategy)
    : indices_(std::move(indices)), strategy_(strategy) {
  const int n = static_cast<int>(indices_.size());
  if (n < 1) throw ArgumentError("empty index vector");
  for (int j : indices_)
    if (j < 0 || j >= n) throw ArgumentError("index out of range in " + to_string());
  if (strategy_ == SelectionStrategy::rswr) return;
  std::vector<int> sorted = indices_;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i)
    if (sorted[static_cast<std::size_t>(i)] != i)
      throw ArgumentError("selection without replacement needs a permutation, got " + to_string());
  if (strategy_ == SelectionStrategy::dswor && indices_ != sorted)
    throw ArgumentError("deterministic selection is the identity, got " + to_string());
}

std::string IndexVector::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < indices_.size(); ++i) os << (i ? "," : "") << indices_[i] + 1;
  os << ')';
  return os.str();
}

IndexVector select_indices(SelectionStrategy strategy, int n, const RngStream& rng) {
  if (n < 2) throw ArgumentError("index selection needs N >= 2");
  std::vector<int> j(static_cast<std::size_t>(n));
  std::iota(j.begin(), j.end(), 0);
  auto gen = rng.slot(0);
  switch (strategy) {
    case SelectionStrategy::rswr:
      for (auto& v : j) v = static_cast<int>(gen.uniform_index(static_cast<std::uint64_t>(n)));
      break;
    case SelectionStrategy::rswor:
      // Fisher-Yates: position i exchanges with a uniform position in [i, n).
      for (int i = 0; i < n - 1; ++i) {
        const auto pick = i + static_cast<int>(gen.uniform_index(static_cast<std::uint64_t>(n - i)));
        std::swap(j[static_cast<std::size_t>(i)], j[static_cast<std::size_t>(pick)]);
      }
      break;
    case SelectionStrategy::dswor:
      break;
  }
  return IndexVector(std::move(j), strategy);
}

void for_each_permutation(int n, const std::function<void(std::span<const int>)>& visit) {
  if (n < 1) throw ArgumentError("permutation enumeration needs N >= 1");
  if (n > kMaxPermutationN) {
    std::ostringstream os;
    os << "enumerating " << n << "! permutations exceeds the cap N <= " << kMaxPermutationN
       << "; use sampled (empirical) verification instead";
    throw SizeError(os.str());
  }
  std::vector<int> j(static_cast<std::size_t>(n));
  std::iota(j.begin(), j.end(), 0);
  do {
    visit(j);
  } while (std::next_permutation(j.begin(), j.end()));
}

std::vector<IndexVector> enumerate_permutations(int n) {
  std::vector<IndexVector> out;
  for_each_permutation(n, [&](std::span<const int> j) {
    out.emplace_back(std::vector<int>(j.begin(), j.end()), SelectionStrategy::rswor);
  });
  return out;
}

void for_each_index_vector(int n, const std::function<void(std::span<const int>)>& visit) {
  if (n < 1) throw ArgumentError("index-vector enumeration needs N >= 1");
  if (n > kMaxIndexVectorN) {
    std::ostringstream os;
    os << "enumerating " << n << "^" << n << " index vectors exceeds the cap N <= "
       << kMaxIndexVectorN << "; use the multiset enumeration";
    throw SizeError(os.str());
  }
  std::vector<int> j(static_cast<std::size_t>(n), 0);
  while (true) {
    visit(j);
    int pos = n - 1;
    while (pos >= 0 && j[static_cast<std::size_t>(pos)] == n - 1) j[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++j[static_cast<std::size_t>(pos)];
  }
}

std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return c;
}

namespace {

void multisets_from(int n, int next_value, int remaining, std::vector<int>& counts,
                    std::vector<IndexMultiset>& out, std::uint64_t n_factorial) {
  if (remaining == 0) {
    std::uint64_t m = n_factorial;
    for (int c : counts) m /= factorial(c);
    out.push_back({counts, m});
    return;
  }
  if (next_value == n) return;
  // Larger counts of the smallest value come first in lexicographic order.
  for (int c = remaining; c >= 0; --c) {
    counts[static_cast<std::size_t>(next_value)] = c;
    multisets_from(n, next_value + 1, remaining - c, counts, out, n_factorial);
  }
  counts[static_cast<std::size_t>(next_value)] = 0;
}

}  // namespace

std::vector<IndexMultiset> enumerate_index_multisets(int n) {
  if (n < 1) throw ArgumentError("multiset enumeration needs N >= 1");
  if (n > kMaxMultisetN) {
    std::ostringstream os;
    os << "multiset enumeration for N = " << n << " exceeds the cap N <= " << kMaxMultisetN;
    throw SizeError(os.str());
  }
  std::vector<IndexMultiset> out;
  out.reserve(binomial(2 * n - 1, n));
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  multisets_from(n, 0, n, counts, out, factorial(n));
  return out;
}

}  // namespace mislab
