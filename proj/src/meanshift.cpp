#include "ddl/meanshift.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ddl/knn.hpp"
#include "ddl/parallel.hpp"

namespace ddl::meanshift {

BandwidthSpec BandwidthSpec::resolve(const Matrix& samples, double divisor) {
  if (!(divisor >= 1.0 && divisor <= 10.0))
    throw ParameterError("bandwidth divisor m must lie in [1, 10], got " + std::to_string(divisor));
  BandwidthSpec bw;
  bw.divisor = divisor;
  bw.resolved_h = mean_pairwise_distance(samples) / divisor;
  return bw;
}

ShiftParams ShiftParams::for_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw ParameterError("bandwidth must be positive and finite");
  return ShiftParams{h, 1e-4 * h, 300, 0.5 * h};
}

double kde_at(std::span<const double> x, const Matrix& samples, double h) {
  if (samples.empty()) throw InsufficientDataError("kernel density estimate over no samples");
  if (x.size() != samples.cols()) throw ParameterError("kde_at: dimension mismatch");
  if (!(h > 0.0)) throw ParameterError("kde_at: bandwidth must be positive");
  const double scale = -0.5 / (h * h);
  double s = 0.0;
  for (std::size_t m = 0; m < samples.rows(); ++m)
    s += std::exp(scale * squared_distance(x, samples.row(m)));
  return s;
}

namespace {

// Weighted mean of the samples seen from x, written into out. Returns false
// when all weights underflow (out untouched).
bool weighted_mean(std::span<const double> x, const Matrix& samples, double scale,
                   std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  double wsum = 0.0;
  for (std::size_t m = 0; m < samples.rows(); ++m) {
    const auto s = samples.row(m);
    const double w = std::exp(scale * squared_distance(x, s));
    if (w == 0.0) continue;
    wsum += w;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * s[j];
  }
  if (wsum == 0.0) return false;
  for (double& v : out) v /= wsum;
  return true;
}

void iterate_point(std::span<double> x, const Matrix& samples, const ShiftParams& p,
                   std::vector<double>& scratch) {
  const double scale = -0.5 / (p.h * p.h);
  const double tol2 = p.tol * p.tol;
  scratch.resize(x.size());
  for (int it = 0; it < p.max_iter; ++it) {
    if (!weighted_mean(x, samples, scale, scratch)) return;
    const double step2 = squared_distance(x, scratch);
    std::copy(scratch.begin(), scratch.end(), x.begin());
    if (step2 < tol2) return;
  }
}

}  // namespace

Vector shift_step(std::span<const double> x, const Matrix& samples, double h) {
  if (samples.empty()) throw InsufficientDataError("mean-shift step over no samples");
  if (x.size() != samples.cols()) throw ParameterError("shift_step: dimension mismatch");
  if (!(h > 0.0)) throw ParameterError("shift_step: bandwidth must be positive");
  Vector out(x.size());
  if (!weighted_mean(x, samples, -0.5 / (h * h), out)) return Vector(x.begin(), x.end());
  return out;
}

Matrix converge_points(const Matrix& samples, const ShiftParams& params) {
  Matrix points = samples;
  parallel_for(samples.rows(), [&](std::size_t i) {
    std::vector<double> scratch;
    iterate_point(points.row(i), samples, params, scratch);
  });
  return points;
}

ModeSet merge_modes(const Matrix& converged, double merge_radius) {
  const std::size_t n = converged.rows(), d = converged.cols();
  const double r2 = merge_radius * merge_radius;

  struct Group {
    Vector sum;
    Vector mean;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;

  for (std::size_t i = 0; i < n; ++i) {
    const auto p = converged.row(i);
    std::size_t best = groups.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double d2 = squared_distance(p, groups[g].mean);
      if (d2 <= r2 && d2 < best_d2) {
        best = g;
        best_d2 = d2;
      }
    }
    if (best == groups.size()) groups.push_back({Vector(d, 0.0), Vector(d, 0.0), {}});
    Group& g = groups[best];
    for (std::size_t j = 0; j < d; ++j) g.sum[j] += p[j];
    g.members.push_back(i);
    for (std::size_t j = 0; j < d; ++j) g.mean[j] = g.sum[j] / static_cast<double>(g.members.size());
  }

  // Fuse groups whose means drifted within the radius of each other.
  for (bool fused = true; fused;) {
    fused = false;
    for (std::size_t a = 0; a < groups.size() && !fused; ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        if (squared_distance(groups[a].mean, groups[b].mean) > r2) continue;
        Group& ga = groups[a];
        for (std::size_t j = 0; j < d; ++j) ga.sum[j] += groups[b].sum[j];
        ga.members.insert(ga.members.end(), groups[b].members.begin(), groups[b].members.end());
        for (std::size_t j = 0; j < d; ++j)
          ga.mean[j] = ga.sum[j] / static_cast<double>(ga.members.size());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
        fused = true;
        break;
      }
    }
  }

  ModeSet out;
  out.modes = Matrix(groups.size(), d);
  out.assignment.assign(n, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::copy(groups[g].mean.begin(), groups[g].mean.end(), out.modes.row(g).begin());
    for (std::size_t m : groups[g].members) out.assignment[m] = g;
  }
  return out;
}

ModeSet cluster(const Matrix& samples, const ShiftParams& params) {
  if (samples.empty()) throw InsufficientDataError("mean-shift clustering over no samples");
  return merge_modes(converge_points(samples, params), params.merge_radius);
}

namespace {

// Clusters a sample set whose bandwidth is derived from its own spread.
// Degenerate sets (one row, or zero spread) collapse to their distinct rows.
Matrix self_bandwidth_modes(const Matrix& samples, double divisor) {
  if (samples.rows() < 2) return samples;
  const auto bw = BandwidthSpec::resolve(samples, divisor);
  if (!(bw.resolved_h > 0.0)) return gather_rows(samples, std::vector<std::size_t>{0});
  return cluster(samples, ShiftParams::for_bandwidth(bw.resolved_h)).modes;
}

}  // namespace

Entity reduce_entity(const Entity& e, double divisor) {
  if (e.descriptors.rows() < 2) return e;
  return Entity{e.id, e.label, self_bandwidth_modes(e.descriptors, divisor)};
}

std::vector<Entity> reduce_entities(std::span<const Entity> entities, double divisor) {
  std::vector<Entity> out(entities.size());
  // Nested regions run single-threaded, so each entity is clustered serially
  // inside its own worker.
  parallel_for(entities.size(),
               [&](std::size_t i) { out[i] = reduce_entity(entities[i], divisor); });
  return out;
}

CategoryCodebook build_category_codebook(std::span<const Entity> reduced, int label,
                                         double divisor) {
  if (reduced.empty())
    throw InsufficientDataError("class " + std::to_string(label) + " has no training entities");
  Matrix pool;
  for (const auto& e : reduced) {
    if (e.label != label)
      throw ValidationError("entity '" + e.id + "' has label " + std::to_string(e.label) +
                            ", expected " + std::to_string(label));
    for (std::size_t r = 0; r < e.descriptors.rows(); ++r) pool.append_row(e.descriptors.row(r));
  }
  if (pool.empty())
    throw InsufficientDataError("class " + std::to_string(label) + " has no descriptors");
  const Matrix modes = self_bandwidth_modes(pool, divisor);
  CategoryCodebook cb;
  cb.label = label;
  for (std::size_t k = 0; k < modes.rows(); ++k) {
    const auto row = modes.row(k);
    Codeword c;
    c.vector.assign(row.begin(), row.end());
    c.label = label;
    c.source_index = k;
    cb.codewords.push_back(std::move(c));
  }
  return cb;
}

}  // namespace ddl::meanshift
