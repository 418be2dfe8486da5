#ifndef DDL_LABELPROP_HPP
#define DDL_LABELPROP_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ddl/core.hpp"
#include "ddl/encoding.hpp"
#include "ddl/forest.hpp"

namespace ddl::labelprop {

struct AffinityConfig {
  std::optional<double> sigma;  // default: median squared pairwise distance
  double confident_fraction = 0.2;
  int max_iter = 1000;
  double tol = 1e-6;
};

/// exp(-|xi - xj|^2 / sigma).
double affinity(std::span<const double> xi, std::span<const double> xj, double sigma);

/// Column-normalized affinities: T_ij = w_ij / sum_k w_kj, diagonal included.
/// Parallel over columns. Throws InsufficientDataError for fewer than 2 rows.
Matrix transition_matrix(const Matrix& samples, double sigma);

/// Median of the squared pairwise distances (mean of the two middle values
/// for an even pair count).
double median_squared_distance(const Matrix& samples);

struct LabelMatrix {
  Matrix y;                          // n x L
  std::vector<std::size_t> labeled;  // rows clamped to their one-hot value
};

struct PropagationResult {
  LabelMatrix labels;
  int iterations = 0;
  bool converged = false;
};

/// Y <- T Y, row-normalize rows with positive mass, reset labeled rows; stop
/// when the largest absolute change is below tol or after max_iter.
PropagationResult propagate(const Matrix& transition, const LabelMatrix& initial,
                            const AffinityConfig& cfg);

struct RefinedPrediction {
  int forest_label = 0;
  double confidence = 0.0;
  int refined_label = 0;
  bool confident = false;
};

struct Refinement {
  std::vector<RefinedPrediction> predictions;
  double sigma = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Number of clamped rows: ceil(fraction * n).
std::size_t confident_count(std::size_t n, double fraction);

/// Orders instances by confidence, descending, ties by ascending index.
std::vector<std::size_t> confidence_order(std::span<const forest::Prediction> preds);

/// Clamps the top confident_fraction forest labels, initializes the rest
/// uniformly, propagates over the encoded test features and takes row argmax
/// (ties to the smaller class). Confident instances keep their forest label.
Refinement refine_predictions(std::span<const encoding::EncodedSample> encoded,
                              std::span<const forest::Prediction> preds, int n_classes,
                              const AffinityConfig& cfg);

}  // namespace ddl::labelprop

#endif  // DDL_LABELPROP_HPP
