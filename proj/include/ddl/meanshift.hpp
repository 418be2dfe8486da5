#ifndef DDL_MEANSHIFT_HPP
#define DDL_MEANSHIFT_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ddl/codebook.hpp"
#include "ddl/core.hpp"

namespace ddl::meanshift {

/// Bandwidth h = D / m, D the mean pairwise distance of the samples it is
/// resolved against.
struct BandwidthSpec {
  double divisor = 5.0;  // m, 1 <= m <= 10
  double resolved_h = 0.0;

  static BandwidthSpec resolve(const Matrix& samples, double divisor);
};

struct ShiftParams {
  double h = 1.0;
  double tol = 1e-4;      // step length that counts as converged
  int max_iter = 300;     // per sample
  double merge_radius = 0.5;

  /// tol = 1e-4 h, merge radius h/2.
  static ShiftParams for_bandwidth(double h);
};

struct ModeSet {
  Matrix modes;
  std::vector<std::size_t> assignment;  // sample -> mode index
};

/// Unnormalized Gaussian kernel sum: sum_m exp(-|x - s_m|^2 / (2 h^2)).
double kde_at(std::span<const double> x, const Matrix& samples, double h);

/// One mean-shift update: the Gaussian-weighted mean of the samples seen from
/// x. Returns x unchanged when every weight underflows to zero.
Vector shift_step(std::span<const double> x, const Matrix& samples, double h);

/// Iterates every sample to its mode. Parallel over samples; each row is an
/// independent trajectory so the result does not depend on the thread count.
Matrix converge_points(const Matrix& samples, const ShiftParams& params);

/// Greedy merge of converged points in input order: a point joins the nearest
/// existing group whose running mean is within the merge radius, otherwise
/// opens a new group. Groups whose means end up within the radius are then
/// fused until none remain. Modes are group means.
ModeSet merge_modes(const Matrix& converged, double merge_radius);

ModeSet cluster(const Matrix& samples, const ShiftParams& params);

/// Replaces an entity's descriptors by the modes of its own descriptor set,
/// with h = D_entity / m. Entities with a single descriptor, or whose
/// descriptors are all identical, pass through unchanged.
Entity reduce_entity(const Entity& e, double divisor);

/// Reduces every entity of a dataset; parallel over entities.
std::vector<Entity> reduce_entities(std::span<const Entity> entities, double divisor);

/// Pools the reduced descriptors of one class and clusters them with
/// h = D_pool / m. Codewords carry the class label; rank fields are zero.
/// Throws InsufficientDataError when no entity of the class is supplied.
CategoryCodebook build_category_codebook(std::span<const Entity> reduced, int label,
                                         double divisor);

}  // namespace ddl::meanshift

#endif  // DDL_MEANSHIFT_HPP
