#include "ddl/labelprop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ddl/knn.hpp"
#include "ddl/parallel.hpp"

namespace ddl::labelprop {

double affinity(std::span<const double> xi, std::span<const double> xj, double sigma) {
  if (xi.size() != xj.size()) throw ParameterError("affinity: dimension mismatch");
  if (!(sigma > 0.0)) throw ParameterError("affinity: sigma must be positive");
  return std::exp(-squared_distance(xi, xj) / sigma);
}

Matrix transition_matrix(const Matrix& samples, double sigma) {
  const std::size_t n = samples.rows();
  if (n < 2) throw InsufficientDataError("transition matrix needs at least 2 samples");
  if (!(sigma > 0.0)) throw ParameterError("transition matrix: sigma must be positive");
  Matrix t(n, n);
  parallel_for(n, [&](std::size_t j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = i == j ? 1.0 : std::exp(-squared_distance(samples.row(i), samples.row(j)) / sigma);
      t(i, j) = w;
      col += w;
    }
    for (std::size_t i = 0; i < n; ++i) t(i, j) /= col;
  });
  return t;
}

double median_squared_distance(const Matrix& samples) {
  const std::size_t n = samples.rows();
  if (n < 2) throw InsufficientDataError("median distance needs at least 2 samples");
  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d2.push_back(squared_distance(samples.row(i), samples.row(j)));
  std::sort(d2.begin(), d2.end());
  const std::size_t m = d2.size();
  return m % 2 ? d2[m / 2] : 0.5 * (d2[m / 2 - 1] + d2[m / 2]);
}

PropagationResult propagate(const Matrix& transition, const LabelMatrix& initial,
                            const AffinityConfig& cfg) {
  const std::size_t n = transition.rows(), L = initial.y.cols();
  if (transition.cols() != n || initial.y.rows() != n)
    throw ValidationError("propagate: transition and label matrix shapes disagree");
  for (std::size_t r : initial.labeled)
    if (r >= n) throw ValidationError("propagate: labeled row out of range");

  PropagationResult res;
  res.labels = initial;
  Matrix& y = res.labels.y;
  Matrix next(n, L);
  for (int it = 0; it < cfg.max_iter; ++it) {
    parallel_for(n, [&](std::size_t i) {
      auto out = next.row(i);
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double t = transition(i, j);
        if (t == 0.0) continue;
        const auto yj = y.row(j);
        for (std::size_t c = 0; c < L; ++c) out[c] += t * yj[c];
      }
      double s = 0.0;
      for (double v : out) s += v;
      if (s > 0.0)
        for (double& v : out) v /= s;
    });
    for (std::size_t r : initial.labeled) {
      const auto src = initial.y.row(r);
      std::copy(src.begin(), src.end(), next.row(r).begin());
    }
    double change = 0.0;
    for (std::size_t k = 0; k < y.data().size(); ++k)
      change = std::max(change, std::abs(next.data()[k] - y.data()[k]));
    std::swap(y, next);
    res.iterations = it + 1;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::size_t confident_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ParameterError("confident fraction must lie in (0, 1]");
  // Guard against fraction * n landing a hair above an integer.
  const double raw = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> confidence_order(std::span<const forest::Prediction> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  return order;
}

Refinement refine_predictions(std::span<const encoding::EncodedSample> encoded,
                              std::span<const forest::Prediction> preds, int n_classes,
                              const AffinityConfig& cfg) {
  const std::size_t n = encoded.size();
  if (n == 0) throw InsufficientDataError("refinement over an empty test set");
  if (preds.size() != n) throw ValidationError("predictions and encodings are not aligned");
  if (n_classes < 1) throw ParameterError("refinement needs at least one class");
  const auto L = static_cast<std::size_t>(n_classes);

  Refinement out;
  out.predictions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (preds[i].label < 0 || preds[i].label >= n_classes)
      throw ValidationError("prediction label out of range");
    out.predictions[i] = {preds[i].label, preds[i].confidence, preds[i].label, false};
  }

  const std::size_t k = confident_count(n, cfg.confident_fraction);
  const auto order = confidence_order(preds);
  LabelMatrix init{Matrix(n, L, 1.0 / static_cast<double>(L)), {}};
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    auto row = init.y.row(i);
    std::fill(row.begin(), row.end(), 0.0);
    row[static_cast<std::size_t>(preds[i].label)] = 1.0;
    init.labeled.push_back(i);
    out.predictions[i].confident = true;
  }
  std::sort(init.labeled.begin(), init.labeled.end());
  if (k == n || n < 2) {
    out.converged = true;
    return out;
  }

  Matrix features;
  for (const auto& s : encoded) features.append_row(s.features);
  out.sigma = cfg.sigma ? *cfg.sigma : median_squared_distance(features);
  if (!(out.sigma > 0.0)) out.sigma = 1.0;  // every test point coincides

  const auto res = propagate(transition_matrix(features, out.sigma), init, cfg);
  out.iterations = res.iterations;
  out.converged = res.converged;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.predictions[i].confident) continue;
    const auto row = res.labels.y.row(i);
    out.predictions[i].refined_label =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace ddl::labelprop
