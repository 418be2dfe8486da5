#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "ddl/encoding.hpp"
#include "ddl/knn.hpp"

namespace ddl::encoding {

SparseCode llc_encode(std::span<const double> x, const Matrix& dictionary,
                      const LlcParams& params) {
  if (x.size() != dictionary.cols())
    throw ParameterError("llc: descriptor dimension " + std::to_string(x.size()) +
                         " does not match dictionary dimension " +
                         std::to_string(dictionary.cols()));
  if (params.neighbors < 1 || params.neighbors > dictionary.rows())
    throw ParameterError("llc: k=" + std::to_string(params.neighbors) + " must lie in [1, " +
                         std::to_string(dictionary.rows()) + "]");
  if (!(params.ridge >= 0.0)) throw ParameterError("llc: ridge must be non-negative");

  SparseCode code;
  code.indices = knn(x, dictionary, params.neighbors);
  const auto k = static_cast<Eigen::Index>(code.indices.size());
  const auto d = static_cast<Eigen::Index>(x.size());

  Eigen::MatrixXd z(k, d);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto b = dictionary.row(code.indices[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = b[j] - x[j];
  }
  Eigen::MatrixXd cov = z * z.transpose();
  cov.diagonal().array() += params.ridge;

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("llc: local covariance is singular; increase the ridge term");
  const Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(k));
  const double total = w.sum();
  if (!std::isfinite(total) || total == 0.0)
    throw NumericError("llc: degenerate constrained solution");

  code.weights.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) code.weights[static_cast<std::size_t>(i)] = w[i] / total;
  return code;
}

Vector llc_pool(std::span<const SparseCode> codes, std::size_t dictionary_size) {
  if (codes.empty()) throw InsufficientDataError("llc pooling over no codes");
  Vector pooled(dictionary_size, 0.0);
  for (const auto& c : codes)
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
      if (c.indices[i] >= dictionary_size) throw ParameterError("llc code index out of range");
      pooled[c.indices[i]] = std::max(pooled[c.indices[i]], std::abs(c.weights[i]));
    }
  double norm2 = 0.0;
  for (double v : pooled) norm2 += v * v;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : pooled) v *= inv;
  }
  return pooled;
}

Vector llc_encode_entity(const Matrix& descriptors, const Matrix& dictionary,
                         const LlcParams& params) {
  std::vector<SparseCode> codes;
  codes.reserve(descriptors.rows());
  for (std::size_t r = 0; r < descriptors.rows(); ++r)
    codes.push_back(llc_encode(descriptors.row(r), dictionary, params));
  return llc_pool(codes, dictionary.rows());
}

}  // namespace ddl::encoding
