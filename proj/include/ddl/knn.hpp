#ifndef DDL_KNN_HPP
#define DDL_KNN_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ddl/core.hpp"

namespace ddl {

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Mean Euclidean distance over all unordered pairs of rows. O(n^2 d), rows
/// split across the worker pool and summed in fixed order.
/// Throws InsufficientDataError for fewer than 2 rows.
double mean_pairwise_distance(const Matrix& descriptors);

struct NeighborQuery {
  std::span<const double> query;
  const Matrix* corpus = nullptr;
  std::size_t count = 1;                    // T
  std::optional<std::size_t> exclude_index;  // the query's own corpus index
};

/// Exact T nearest neighbors by Euclidean distance, ascending, ties by
/// ascending corpus index. Throws ParameterError when T is 0 or exceeds the
/// available corpus after self-exclusion.
std::vector<std::size_t> knn(const NeighborQuery& q);

inline std::vector<std::size_t> knn(std::span<const double> query, const Matrix& corpus,
                                    std::size_t count,
                                    std::optional<std::size_t> exclude_index = std::nullopt) {
  return knn(NeighborQuery{query, &corpus, count, exclude_index});
}

}  // namespace ddl

#endif  // DDL_KNN_HPP
