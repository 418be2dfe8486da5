#include "ddl/knn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ddl/parallel.hpp"

namespace ddl {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

double mean_pairwise_distance(const Matrix& descriptors) {
  const std::size_t n = descriptors.rows();
  if (n < 2)
    throw InsufficientDataError("mean pairwise distance needs at least 2 descriptors, got " +
                                std::to_string(n));
  std::vector<double> row_sums(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    const auto a = descriptors.row(i);
    for (std::size_t j = i + 1; j < n; ++j) s += euclidean_distance(a, descriptors.row(j));
    row_sums[i] = s;
  });
  double total = 0.0;
  for (double s : row_sums) total += s;
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return total / pairs;
}

std::vector<std::size_t> knn(const NeighborQuery& q) {
  if (q.corpus == nullptr) throw ParameterError("knn: no corpus");
  const Matrix& corpus = *q.corpus;
  if (q.query.size() != corpus.cols())
    throw ParameterError("knn: query dimension " + std::to_string(q.query.size()) +
                         " does not match corpus dimension " + std::to_string(corpus.cols()));
  if (q.exclude_index && *q.exclude_index >= corpus.rows())
    throw ParameterError("knn: excluded index out of range");
  const std::size_t available = corpus.rows() - (q.exclude_index ? 1 : 0);
  if (q.count == 0 || q.count > available)
    throw ParameterError("knn: requested " + std::to_string(q.count) + " neighbors but only " +
                         std::to_string(available) + " available");

  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(available);
  for (std::size_t i = 0; i < corpus.rows(); ++i) {
    if (q.exclude_index && i == *q.exclude_index) continue;
    cand.emplace_back(squared_distance(q.query, corpus.row(i)), i);
  }
  // pair ordering is (distance, index): exactly the tie-break rule.
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(q.count), cand.end());
  std::vector<std::size_t> out(q.count);
  for (std::size_t i = 0; i < q.count; ++i) out[i] = cand[i].second;
  return out;
}

}  // namespace ddl
