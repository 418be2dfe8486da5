#ifndef DDL_ENCODING_HPP
#define DDL_ENCODING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddl/codebook.hpp"
#include "ddl/core.hpp"

namespace ddl::encoding {

// ---- Locality-constrained linear coding ----

struct LlcParams {
  std::size_t neighbors = 100;  // k
  double ridge = 1e-4;          // lambda
};

/// Non-zero coefficients over the dictionary, indices ascending by distance
/// (the knn order).
struct SparseCode {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

/// Solves min_c |x - B_x^T c|^2 + lambda |c|^2 s.t. sum(c) = 1 over the k
/// nearest codewords B_x, through the shifted local covariance
/// (B_x - 1 x^T)(B_x - 1 x^T)^T + lambda I. Throws NumericError when that
/// system is not positive definite.
SparseCode llc_encode(std::span<const double> x, const Matrix& dictionary, const LlcParams& params);

/// Component-wise max of |code| over an entity's codes, then L2-normalized
/// (an all-zero pool is returned as is). Throws on an empty code list.
Vector llc_pool(std::span<const SparseCode> codes, std::size_t dictionary_size);

/// Codes every descriptor of an entity and pools them.
Vector llc_encode_entity(const Matrix& descriptors, const Matrix& dictionary,
                         const LlcParams& params);

// ---- Diagonal GMM ----

struct GmmModel {
  Vector weights;    // K, on the simplex
  Matrix means;      // K x d
  Matrix variances;  // K x d, floored

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.cols(); }
  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

struct GmmParams {
  std::size_t components = 100;      // K
  int max_iter = 200;
  double tol = 1e-6;                 // mean log-likelihood gain per point
  int kmeans_iter = 10;
  std::size_t kmeans_subsample = 0;  // 0: min(n, 100 K)
  double variance_floor = 1e-6;      // relative to the global per-dim variance
  std::uint64_t seed = 0;
};

struct GmmFit {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per point; [0] is the initial model
  int iterations = 0;
  bool converged = false;
};

/// EM with diagonal covariances, initialized by seeded k-means on a
/// subsample. Throws ParameterError when there are fewer rows than K.
GmmFit fit_gmm(const Matrix& descriptors, const GmmParams& params);

/// Per-point log density of the mixture, and the posterior responsibilities
/// (n x K) computed by log-sum-exp. Parallel over points.
struct Posteriors {
  Matrix responsibilities;
  std::vector<double> log_density;
};
Posteriors posteriors(const GmmModel& gmm, const Matrix& x);

/// Mean log-likelihood per point.
double mean_log_likelihood(const GmmModel& gmm, const Matrix& x);

// GMM blob: magic "DGMM", u32 version, u32 K, u32 d, then weights, means and
// variances as little-endian float64.
void save_gmm(const GmmModel& gmm, const std::filesystem::path& path);
GmmModel load_gmm(const std::filesystem::path& path);

// ---- Fisher vectors ----

/// Unnormalized per-component accumulators. Additive over descriptor sets:
/// stats(A ∪ B) = stats(A) + stats(B).
struct FisherStatistics {
  double count = 0.0;    // number of descriptors
  Matrix first_order;    // K x d: sum_i g_ik (x_i - mu_k) / sigma_k
  Matrix second_order;   // K x d: sum_i g_ik ((x_i - mu_k)^2 / sigma_k^2 - 1)

  FisherStatistics& operator+=(const FisherStatistics& other);
};

FisherStatistics fisher_statistics(const Matrix& descriptors, const GmmModel& gmm);

/// Normalizes accumulators into the improved Fisher vector: mean block
/// 1/(N sqrt(w_k)) S1, variance block 1/(N sqrt(2 w_k)) S2, then signed
/// square root and L2 normalization. Layout: [means K*d | variances K*d].
Vector fisher_from_statistics(const FisherStatistics& stats, const GmmModel& gmm);

Vector fisher_vector(const Matrix& descriptors, const GmmModel& gmm);

// ---- Dataset encoding ----

enum class Kind { llc, fisher };

const char* to_string(Kind kind);
Kind parse_kind(const std::string& s);

struct EncodedSample {
  Vector features;
  int label = 0;
  std::string entity_id;
  Kind kind = Kind::llc;

  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

struct EncoderModel {
  Kind kind = Kind::llc;
  std::optional<Matrix> dictionary;  // required for llc
  std::optional<GmmModel> gmm;       // required for fisher
  LlcParams llc;
};

/// One sample per entity, order and labels preserved; parallel over entities.
/// Throws ConfigError when the model for the requested kind is missing.
std::vector<EncodedSample> encode_dataset(const DescriptorDataset& ds, const EncoderModel& model);

/// Encoded datasets: `<stem>.bin` in the descriptor format (one row per
/// entity) and `<stem>.manifest` in the manifest format whose path column
/// names the shared .bin file; line i describes row i.
void save_encoded(std::span<const EncodedSample> samples, int num_classes,
                  const std::filesystem::path& stem);

struct EncodedSet {
  std::vector<EncodedSample> samples;
  int num_classes = 0;
};
EncodedSet load_encoded(const std::filesystem::path& stem, Kind kind);

}  // namespace ddl::encoding

#endif  // DDL_ENCODING_HPP
