#ifndef DDL_DICTIONARY_HPP
#define DDL_DICTIONARY_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ddl/codebook.hpp"
#include "ddl/core.hpp"

namespace ddl::dictionary {

struct RankingParams {
  std::size_t neighbors = 10;  // T
  double w1 = 0.5;
  double h_floor = 0.1;
};

/// The union of all temporary codebooks as one searchable corpus. Global
/// positions follow codebook order, then codeword order.
class CodewordIndex {
 public:
  explicit CodewordIndex(std::span<const CategoryCodebook> codebooks);

  const Matrix& vectors() const { return vectors_; }
  std::span<const int> labels() const { return labels_; }
  std::size_t size() const { return vectors_.rows(); }
  int num_labels() const { return num_labels_; }

  /// Global position of codeword k of the given codebook (by position in the
  /// span passed at construction).
  std::size_t position(std::size_t codebook, std::size_t k) const;

 private:
  Matrix vectors_;
  std::vector<int> labels_;
  std::vector<std::size_t> offsets_;
  int num_labels_ = 0;
};

struct NeighborhoodScore {
  double entropy = 0.0;  // H in bits
  double tfidf = 0.0;    // TI
};

/// Scores the codeword at `position` from its T nearest other codewords; H
/// and TI share one neighbor retrieval.
NeighborhoodScore score_codeword(const CodewordIndex& index, std::size_t position,
                                 std::size_t neighbors);

double conditional_entropy(const CodewordIndex& index, std::size_t position,
                           std::size_t neighbors);
double tfidf_score(const CodewordIndex& index, std::size_t position, std::size_t neighbors);

/// w1 / max(h, h_floor) + (1 - w1) ti.
double rank_score(double h, double ti, double w1, double h_floor);

/// Scores every codeword of all codebooks, parallel over codewords.
std::vector<NeighborhoodScore> score_all(const CodewordIndex& index, std::size_t neighbors);

/// Fills H/TI/rank of codebook `which` (position in `all`) and returns it
/// sorted by descending rank, ties by ascending source index.
CategoryCodebook rank_codebook(std::span<const CategoryCodebook> all, std::size_t which,
                               const RankingParams& params);

/// Ranks every codebook with a single shared index.
std::vector<CategoryCodebook> rank_codebooks(std::span<const CategoryCodebook> all,
                                             const RankingParams& params);

/// Nodes are the ranked codewords in order; edge i joins nodes i and i+1.
struct ChainGraph {
  Matrix nodes;
  std::vector<double> edge_weights;
};

ChainGraph build_chain(const CategoryCodebook& ranked);

struct DominantSetParams {
  std::optional<double> sigma;  // default: mean chain edge weight
  double support_threshold = 1e-4;
  double tol = 1e-8;
  int max_iter = 10000;
  bool full_graph = false;  // affinities over all node pairs, not only chain edges
};

struct Bipartition {
  std::vector<std::size_t> first;   // dominant set support
  std::vector<std::size_t> second;  // complement
  bool used_fallback = false;       // split at the largest chain edge instead
};

/// Affinity matrix of the chain (or of all pairs in full-graph mode):
/// exp(-distance / sigma), zero diagonal.
Matrix chain_affinity(const ChainGraph& g, double sigma, bool full_graph);

/// Replicator dynamics from the barycenter; returns the converged state.
Vector replicator_dynamics(const Matrix& affinity, double tol, int max_iter);

/// Two-way split of the chain into a dominant set and its complement. Throws
/// ParameterError for fewer than 2 nodes.
Bipartition dominant_set_bipartition(const ChainGraph& g, const DominantSetParams& params = {});

/// The side with the larger mean rank (ties go to the side holding the
/// top-ranked node), in descending-rank order.
CategoryCodebook select_codewords(const CategoryCodebook& ranked, const Bipartition& partition);

/// Ablation baseline: the first min(B, size) codewords of a ranked codebook.
CategoryCodebook select_top(const CategoryCodebook& ranked, std::size_t b);

/// Chain + dominant set + selection; a single-codeword codebook is kept whole.
CategoryCodebook select_adaptive(const CategoryCodebook& ranked, const DominantSetParams& params);

/// Concatenates one selected codebook per class in ascending class order.
/// Throws ValidationError naming a missing, duplicated or empty class.
GlobalDictionary build_global_dictionary(std::span<const CategoryCodebook> selected,
                                         int num_classes);

}  // namespace ddl::dictionary

#endif  // DDL_DICTIONARY_HPP
