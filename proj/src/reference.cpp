#include "ddl/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ddl/knn.hpp"
#include "ddl/rng.hpp"

namespace ddl::reference {

double mean_pairwise_distance(const Matrix& descriptors) {
  const std::size_t n = descriptors.rows();
  if (n < 2) throw InsufficientDataError("mean pairwise distance needs at least 2 descriptors");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) row += euclidean_distance(descriptors.row(i), descriptors.row(j));
    total += row;
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

Matrix converge_points(const Matrix& samples, const meanshift::ShiftParams& params) {
  Matrix out = samples;
  const double tol2 = params.tol * params.tol;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    Vector x(samples.row(i).begin(), samples.row(i).end());
    for (int it = 0; it < params.max_iter; ++it) {
      Vector next = meanshift::shift_step(x, samples, params.h);
      const double step2 = squared_distance(x, next);
      x = std::move(next);
      if (step2 < tol2) break;
    }
    std::copy(x.begin(), x.end(), out.row(i).begin());
  }
  return out;
}

std::vector<dictionary::NeighborhoodScore> score_all(const dictionary::CodewordIndex& index,
                                                     std::size_t neighbors) {
  const std::size_t n = index.size();
  std::vector<dictionary::NeighborhoodScore> out(n);
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j)
      if (j != q) all.emplace_back(squared_distance(index.vectors().row(q), index.vectors().row(j)), j);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> hist(static_cast<std::size_t>(index.num_labels()), 0);
    for (std::size_t k = 0; k < neighbors; ++k) ++hist[static_cast<std::size_t>(index.labels()[all[k].second])];
    const double t = static_cast<double>(neighbors);
    double h = 0.0;
    for (std::size_t c : hist)
      if (c) h -= (static_cast<double>(c) / t) * std::log2(static_cast<double>(c) / t);
    out[q].entropy = h <= 0.0 ? 0.0 : h;
    out[q].tfidf = static_cast<double>(hist[static_cast<std::size_t>(index.labels()[q])]) / t;
  }
  return out;
}

Matrix transition_matrix(const Matrix& samples, double sigma) {
  const std::size_t n = samples.rows();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w(i, j) = i == j ? 1.0 : std::exp(-squared_distance(samples.row(i), samples.row(j)) / sigma);
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += w(i, j);
    for (std::size_t i = 0; i < n; ++i) w(i, j) /= col;
  }
  return w;
}

encoding::Posteriors posteriors(const encoding::GmmModel& gmm, const Matrix& x) {
  const std::size_t n = x.rows(), K = gmm.components(), d = gmm.dim();
  encoding::Posteriors out{Matrix(n, K), std::vector<double>(n)};
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> norm(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += log2pi + std::log(gmm.variances(k, j));
    norm[k] = std::log(gmm.weights[k]) - 0.5 * s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - gmm.means(k, j);
        q += diff * diff / gmm.variances(k, j);
      }
      out.responsibilities(i, k) = norm[k] - 0.5 * q;
      peak = std::max(peak, out.responsibilities(i, k));
    }
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      out.responsibilities(i, k) = std::exp(out.responsibilities(i, k) - peak);
      s += out.responsibilities(i, k);
    }
    for (std::size_t k = 0; k < K; ++k) out.responsibilities(i, k) /= s;
    out.log_density[i] = peak + std::log(s);
  }
  return out;
}

forest::ForestModel train_forest(const forest::TrainingSet& data, const forest::ForestParams& params) {
  forest::ForestModel model;
  model.n_classes = data.n_classes;
  model.dim = data.features.cols();
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    const auto rows = forest::bootstrap_rows(data.features.rows(), params.seed, t);
    model.trees.push_back(
        forest::grow_tree(data, rows, params, forest::feature_stream_seed(params.seed, t)));
  }
  return model;
}

}  // namespace ddl::reference
