#ifndef DDL_FOREST_HPP
#define DDL_FOREST_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ddl/core.hpp"
#include "ddl/encoding.hpp"

namespace ddl::forest {

enum class Criterion { entropy, gini };

struct ForestParams {
  std::size_t n_trees = 1000;
  std::size_t min_leaf = 1;
  std::optional<std::size_t> max_depth;
  std::uint64_t seed = 0;
  Criterion criterion = Criterion::entropy;
};

/// Preorder node. Internal nodes route x[feature] <= threshold to `left`.
struct Node {
  bool leaf = false;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::vector<std::uint32_t> counts;  // leaf class histogram

  friend bool operator==(const Node&, const Node&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& leaf_for(std::span<const double> x) const;
  /// Majority class of the reached leaf, ties to the smallest class index.
  int vote(std::span<const double> x) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<Node> nodes_;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::size_t dim = 0;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

struct Prediction {
  int label = 0;
  std::vector<std::uint32_t> votes;
  double confidence = 0.0;  // votes[label] / n_trees
};

/// Dense training view: one row per sample.
struct TrainingSet {
  Matrix features;
  std::vector<int> labels;
  int n_classes = 0;
};

TrainingSet make_training_set(std::span<const encoding::EncodedSample> samples, int n_classes);

/// Impurity of a class histogram in the chosen criterion (bits for entropy).
double impurity(std::span<const std::size_t> counts, std::size_t total, Criterion criterion);

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Exhaustive search over the candidate features: thresholds are midpoints of
/// consecutive distinct values; both children must hold at least min_leaf
/// rows. Ties keep the smaller feature index, then the smaller threshold.
/// `rows` may repeat indices (bootstrap multiplicity).
SplitChoice best_split(const TrainingSet& data, std::span<const std::size_t> rows,
                       std::span<const std::size_t> candidate_features, std::size_t min_leaf,
                       Criterion criterion);

/// Information gain of a fixed threshold on one feature.
double split_gain(const TrainingSet& data, std::span<const std::size_t> rows, std::size_t feature,
                  double threshold, Criterion criterion);

/// Grows one tree on the given (bootstrap) rows. `rng_seed` drives feature
/// subsampling.
DecisionTree grow_tree(const TrainingSet& data, std::span<const std::size_t> rows,
                       const ForestParams& params, std::uint64_t rng_seed);

/// Bootstrap row indices of tree t: N draws with replacement from the
/// canonical sample order, stream seeded by seed ^ t.
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t tree);

/// Seed of tree t's feature-sampling stream, distinct from its bootstrap
/// stream.
std::uint64_t feature_stream_seed(std::uint64_t seed, std::size_t tree);

/// Trees train in parallel, each from its own stream; output is independent
/// of thread count. Throws ValidationError with fewer than 2 classes present.
ForestModel train_forest(const TrainingSet& data, const ForestParams& params);
/// Samples are first put in ascending entity-id order (stable), which makes
/// the forest independent of the order they arrive in.
ForestModel train_forest(std::span<const encoding::EncodedSample> samples, int n_classes,
                         const ForestParams& params);

Prediction predict(const ForestModel& model, std::span<const double> x);
std::vector<Prediction> predict_dataset(const ForestModel& model,
                                        std::span<const encoding::EncodedSample> samples);

/// Fraction of out-of-bag votes that are wrong; informational only.
double out_of_bag_error(const ForestModel& model, const TrainingSet& data, std::uint64_t seed);

// Forest file: magic "DFOR", u32 version, u32 classes, u32 dim, u32 trees;
// per tree u32 node count then preorder nodes: u8 kind (0 internal, 1 leaf);
// internal: u32 feature, f64 threshold, u32 left, u32 right; leaf: classes x u32.
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace ddl::forest

#endif  // DDL_FOREST_HPP
