#include <cmath>

#include "ddl/encoding.hpp"

namespace ddl::encoding {

FisherStatistics& FisherStatistics::operator+=(const FisherStatistics& other) {
  if (first_order.rows() != other.first_order.rows() ||
      first_order.cols() != other.first_order.cols())
    throw ValidationError("fisher statistics shapes disagree");
  count += other.count;
  for (std::size_t i = 0; i < first_order.data().size(); ++i) {
    first_order.data()[i] += other.first_order.data()[i];
    second_order.data()[i] += other.second_order.data()[i];
  }
  return *this;
}

FisherStatistics fisher_statistics(const Matrix& descriptors, const GmmModel& gmm) {
  if (descriptors.empty()) throw InsufficientDataError("fisher vector of an empty descriptor set");
  const std::size_t K = gmm.components(), d = gmm.dim();
  const auto post = posteriors(gmm, descriptors);
  FisherStatistics st{static_cast<double>(descriptors.rows()), Matrix(K, d, 0.0),
                      Matrix(K, d, 0.0)};
  for (std::size_t k = 0; k < K; ++k) {
    const auto mu = gmm.means.row(k);
    const auto var = gmm.variances.row(k);
    auto s1 = st.first_order.row(k);
    auto s2 = st.second_order.row(k);
    for (std::size_t i = 0; i < descriptors.rows(); ++i) {
      const double r = post.responsibilities(i, k);
      if (r == 0.0) continue;
      const auto xi = descriptors.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        const double z = (xi[j] - mu[j]) / std::sqrt(var[j]);
        s1[j] += r * z;
        s2[j] += r * (z * z - 1.0);
      }
    }
  }
  return st;
}

Vector fisher_from_statistics(const FisherStatistics& stats, const GmmModel& gmm) {
  const std::size_t K = gmm.components(), d = gmm.dim();
  if (stats.first_order.rows() != K || stats.first_order.cols() != d)
    throw ValidationError("fisher statistics do not match the gmm");
  if (!(stats.count > 0.0)) throw InsufficientDataError("fisher statistics over no descriptors");
  Vector fv(2 * K * d);
  for (std::size_t k = 0; k < K; ++k) {
    const double a = 1.0 / (stats.count * std::sqrt(gmm.weights[k]));
    const double b = 1.0 / (stats.count * std::sqrt(2.0 * gmm.weights[k]));
    for (std::size_t j = 0; j < d; ++j) {
      fv[k * d + j] = a * stats.first_order(k, j);
      fv[K * d + k * d + j] = b * stats.second_order(k, j);
    }
  }
  double norm2 = 0.0;
  for (double& v : fv) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm2 += v * v;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : fv) v *= inv;
  }
  return fv;
}

Vector fisher_vector(const Matrix& descriptors, const GmmModel& gmm) {
  return fisher_from_statistics(fisher_statistics(descriptors, gmm), gmm);
}

}  // namespace ddl::encoding
