#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "ddl/encoding.hpp"
#include "ddl/knn.hpp"
#include "ddl/parallel.hpp"
#include "ddl/rng.hpp"

namespace ddl::encoding {

namespace {

constexpr char kGmmMagic[4] = {'D', 'G', 'M', 'M'};
constexpr std::uint32_t kGmmVersion = 1;
// Components whose responsibility mass falls below this keep their previous
// parameters for the step.
constexpr double kDeadComponentMass = 1e-10;

// Per-component log(w_k) - 0.5 sum_j log(2 pi var_kj).
std::vector<double> log_normalizers(const GmmModel& g) {
  std::vector<double> c(g.components());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < c.size(); ++k) {
    double s = 0.0;
    for (double v : g.variances.row(k)) s += log2pi + std::log(v);
    c[k] = std::log(g.weights[k]) - 0.5 * s;
  }
  return c;
}

void check_model(const GmmModel& g) {
  if (g.components() == 0) throw ValidationError("gmm has no components");
  if (g.means.rows() != g.components() || g.variances.rows() != g.components() ||
      g.variances.cols() != g.means.cols())
    throw ValidationError("gmm parameter shapes disagree");
}

}  // namespace

Posteriors posteriors(const GmmModel& gmm, const Matrix& x) {
  check_model(gmm);
  if (x.cols() != gmm.dim()) throw ParameterError("gmm: descriptor dimension mismatch");
  const std::size_t n = x.rows(), K = gmm.components(), d = gmm.dim();
  const auto norm = log_normalizers(gmm);
  Posteriors out{Matrix(n, K), std::vector<double>(n)};
  parallel_for(n, [&](std::size_t i) {
    const auto xi = x.row(i);
    auto resp = out.responsibilities.row(i);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const auto mu = gmm.means.row(k);
      const auto var = gmm.variances.row(k);
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = xi[j] - mu[j];
        q += diff * diff / var[j];
      }
      resp[k] = norm[k] - 0.5 * q;
      peak = std::max(peak, resp[k]);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      resp[k] = std::exp(resp[k] - peak);
      s += resp[k];
    }
    for (std::size_t k = 0; k < K; ++k) resp[k] /= s;
    out.log_density[i] = peak + std::log(s);
  });
  return out;
}

double mean_log_likelihood(const GmmModel& gmm, const Matrix& x) {
  const auto p = posteriors(gmm, x);
  double s = 0.0;
  for (double v : p.log_density) s += v;
  return s / static_cast<double>(x.rows());
}

namespace {

// Seeded k-means++ followed by Lloyd iterations. Returns K x d centers and
// the final assignment of the subsample rows.
struct KMeansResult {
  Matrix centers;
  std::vector<std::size_t> assignment;
};

KMeansResult kmeans(const Matrix& x, std::size_t K, int iterations, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  KMeansResult r{Matrix(K, d), std::vector<std::size_t>(n, 0)};

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < K; ++c) {
    std::copy_n(x.row(pick).begin(), d, r.centers.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x.row(i), r.centers.row(c)));
      total += nearest[i];
    }
    if (c + 1 == K) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    double target = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= nearest[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
  }

  for (int it = 0; it < iterations; ++it) {
    parallel_for(n, [&](std::size_t i) {
      std::size_t best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < K; ++c) {
        const double d2 = squared_distance(x.row(i), r.centers.row(c));
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      r.assignment[i] = best;
    });
    Matrix sums(K, d, 0.0);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(r.assignment[i]);
      const auto xi = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
      ++counts[r.assignment[i]];
    }
    for (std::size_t c = 0; c < K; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      auto ctr = r.centers.row(c);
      const auto s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) ctr[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

}  // namespace

GmmFit fit_gmm(const Matrix& descriptors, const GmmParams& params) {
  const std::size_t n = descriptors.rows(), d = descriptors.cols(), K = params.components;
  if (K == 0) throw ParameterError("gmm: component count must be positive");
  if (n < K)
    throw ParameterError("gmm: " + std::to_string(n) + " descriptors cannot support " +
                         std::to_string(K) + " components");
  if (!(params.variance_floor > 0.0)) throw ParameterError("gmm: variance floor must be positive");

  // Global per-dimension variance sets the floor.
  Vector mean(d, 0.0), floor(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += descriptors(i, j);
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = descriptors(i, j) - mean[j];
      floor[j] += diff * diff;
    }
  for (double& v : floor) {
    v /= static_cast<double>(n);
    v = v > 0.0 ? params.variance_floor * v : params.variance_floor;
  }

  // k-means on a seeded subsample.
  Rng rng(params.seed);
  const std::size_t sub_n =
      std::min(n, params.kmeans_subsample ? std::max(params.kmeans_subsample, K) : 100 * K);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < sub_n; ++i)
    std::swap(order[i], order[i + static_cast<std::size_t>(rng.below(n - i))]);
  order.resize(sub_n);
  std::sort(order.begin(), order.end());
  const Matrix sub = gather_rows(descriptors, order);
  const auto km = kmeans(sub, K, params.kmeans_iter, rng);

  GmmModel g{Vector(K), km.centers, Matrix(K, d, 0.0)};
  {
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < sub_n; ++i) {
      const std::size_t c = km.assignment[i];
      ++counts[c];
      auto var = g.variances.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = sub(i, j) - g.means(c, j);
        var[j] += diff * diff;
      }
    }
    for (std::size_t c = 0; c < K; ++c) {
      g.weights[c] = static_cast<double>(std::max<std::size_t>(counts[c], 1));
      auto var = g.variances.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        var[j] = counts[c] > 1 ? var[j] / static_cast<double>(counts[c]) : floor[j] / params.variance_floor;
        var[j] = std::max(var[j], floor[j]);
      }
    }
    double total = 0.0;
    for (double w : g.weights) total += w;
    for (double& w : g.weights) w /= total;
  }

  GmmFit fit;
  auto post = posteriors(g, descriptors);
  auto mean_ll = [&](const Posteriors& p) {
    double s = 0.0;
    for (double v : p.log_density) s += v;
    return s / static_cast<double>(n);
  };
  fit.log_likelihood.push_back(mean_ll(post));

  for (int it = 0; it < params.max_iter; ++it) {
    // M-step, parallel over components with fixed-order sums over points.
    GmmModel next = g;
    std::vector<double> mass(K, 0.0);
    parallel_for(K, [&](std::size_t k) {
      double nk = 0.0;
      Vector s1(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = post.responsibilities(i, k);
        nk += r;
        const auto xi = descriptors.row(i);
        for (std::size_t j = 0; j < d; ++j) s1[j] += r * xi[j];
      }
      mass[k] = nk;
      if (nk < kDeadComponentMass) return;
      auto mu = next.means.row(k);
      for (std::size_t j = 0; j < d; ++j) mu[j] = s1[j] / nk;
      Vector s2(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = post.responsibilities(i, k);
        const auto xi = descriptors.row(i);
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = xi[j] - mu[j];
          s2[j] += r * diff * diff;
        }
      }
      auto var = next.variances.row(k);
      for (std::size_t j = 0; j < d; ++j) var[j] = std::max(s2[j] / nk, floor[j]);
    });
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      next.weights[k] = std::max(mass[k], kDeadComponentMass) / static_cast<double>(n);
      total += next.weights[k];
    }
    for (double& w : next.weights) w /= total;

    g = std::move(next);
    post = posteriors(g, descriptors);
    const double ll = mean_ll(post);
    const double gain = ll - fit.log_likelihood.back();
    fit.log_likelihood.push_back(ll);
    fit.iterations = it + 1;
    if (gain < params.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.model = std::move(g);
  return fit;
}

void save_gmm(const GmmModel& gmm, const std::filesystem::path& path) {
  check_model(gmm);
  detail::BinaryWriter out(path);
  out.bytes(kGmmMagic, 4);
  out.put<std::uint32_t>(kGmmVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(gmm.components()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(gmm.dim()));
  out.bytes(gmm.weights.data(), gmm.weights.size() * sizeof(double));
  out.bytes(gmm.means.data().data(), gmm.means.data().size() * sizeof(double));
  out.bytes(gmm.variances.data().data(), gmm.variances.data().size() * sizeof(double));
}

GmmModel load_gmm(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kGmmMagic);
  if (in.get<std::uint32_t>() != kGmmVersion)
    throw FormatError("unsupported gmm version in " + path.string());
  const std::size_t K = in.get<std::uint32_t>();
  const std::size_t d = in.get<std::uint32_t>();
  GmmModel g{Vector(K), Matrix(K, d), Matrix(K, d)};
  in.bytes(g.weights.data(), K * sizeof(double));
  in.bytes(g.means.data().data(), K * d * sizeof(double));
  in.bytes(g.variances.data().data(), K * d * sizeof(double));
  if (!in.at_end()) throw FormatError("trailing bytes in " + path.string());
  check_model(g);
  return g;
}

}  // namespace ddl::encoding
