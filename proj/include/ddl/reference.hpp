#ifndef DDL_REFERENCE_HPP
#define DDL_REFERENCE_HPP

// Straight serial versions of the parallel kernels. They share no loop
// structure with the OpenMP paths and exist so tests can demand bitwise
// agreement and the benchmarks have a baseline.

#include <vector>

#include "ddl/core.hpp"
#include "ddl/dictionary.hpp"
#include "ddl/encoding.hpp"
#include "ddl/forest.hpp"
#include "ddl/meanshift.hpp"

namespace ddl::reference {

double mean_pairwise_distance(const Matrix& descriptors);

/// Mean-shift trajectories via repeated shift_step calls.
Matrix converge_points(const Matrix& samples, const meanshift::ShiftParams& params);

/// H and TI from a full sort of all distances.
std::vector<dictionary::NeighborhoodScore> score_all(const dictionary::CodewordIndex& index,
                                                     std::size_t neighbors);

Matrix transition_matrix(const Matrix& samples, double sigma);

encoding::Posteriors posteriors(const encoding::GmmModel& gmm, const Matrix& x);

/// Trees grown one after another.
forest::ForestModel train_forest(const forest::TrainingSet& data, const forest::ForestParams& params);

}  // namespace ddl::reference

#endif  // DDL_REFERENCE_HPP
