#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ddl/labelprop.hpp"
#include "ddl/reference.hpp"
#include "support.hpp"

using namespace ddl;
using namespace ddl::labelprop;
using encoding::EncodedSample;

namespace {

// Harmonic solution Y_U = (I - P_UU)^-1 P_UL Y_L with P the row-normalized T.
Matrix harmonic_oracle(const Matrix& t, const LabelMatrix& init) {
  const std::size_t n = t.rows(), L = init.y.cols();
  std::vector<bool> is_labeled(n, false);
  for (auto r : init.labeled) is_labeled[r] = true;
  std::vector<std::size_t> u, l;
  for (std::size_t i = 0; i < n; ++i) (is_labeled[i] ? l : u).push_back(i);
  Eigen::MatrixXd p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += t(i, j);
    for (std::size_t j = 0; j < n; ++j)
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j) / s;
  }
  const auto nu = static_cast<Eigen::Index>(u.size()), nl = static_cast<Eigen::Index>(l.size());
  Eigen::MatrixXd puu(nu, nu), pul(nu, nl), yl(nl, static_cast<Eigen::Index>(L));
  for (Eigen::Index a = 0; a < nu; ++a) {
    for (Eigen::Index b = 0; b < nu; ++b)
      puu(a, b) = p(static_cast<Eigen::Index>(u[static_cast<std::size_t>(a)]), static_cast<Eigen::Index>(u[static_cast<std::size_t>(b)]));
    for (Eigen::Index b = 0; b < nl; ++b)
      pul(a, b) = p(static_cast<Eigen::Index>(u[static_cast<std::size_t>(a)]), static_cast<Eigen::Index>(l[static_cast<std::size_t>(b)]));
  }
  for (Eigen::Index b = 0; b < nl; ++b)
    for (std::size_t c = 0; c < L; ++c) yl(b, static_cast<Eigen::Index>(c)) = init.y(l[static_cast<std::size_t>(b)], c);
  const Eigen::MatrixXd yu =
      (Eigen::MatrixXd::Identity(nu, nu) - puu).fullPivLu().solve(pul * yl);
  Matrix out = init.y;
  for (Eigen::Index a = 0; a < nu; ++a)
    for (std::size_t c = 0; c < L; ++c) out(u[static_cast<std::size_t>(a)], c) = yu(a, static_cast<Eigen::Index>(c));
  return out;
}

forest::Prediction pred(int label, double confidence) { return {label, {}, confidence}; }

}  // namespace

TEST_CASE("affinity examples") {
  CHECK(affinity(Vector{1, 2}, Vector{1, 2}, 0.3) == 1.0);
  CHECK(affinity(Vector{0, 0}, Vector{1, 1}, 2.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(affinity(Vector{3, -1}, Vector{0, 2}, 1.7) == affinity(Vector{0, 2}, Vector{3, -1}, 1.7));
  CHECK_THROWS_AS(affinity(Vector{0}, Vector{1}, 0.0), ParameterError);
}

TEST_CASE("transition matrix columns are stochastic") {
  const auto same = transition_matrix(Matrix(2, 3, 0.25), 1.0);
  for (double v : same.data()) CHECK(v == 0.5);

  Rng rng(21);
  const auto x = test::gaussian_matrix(rng, 30, 4);
  const auto t = transition_matrix(x, 2.0);
  for (std::size_t j = 0; j < 30; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 30; ++i) s += t(i, j);
    CHECK(std::abs(s - 1.0) <= 1e-10);
  }
  CHECK(t == reference::transition_matrix(x, 2.0));
  CHECK_THROWS_AS(transition_matrix(Matrix(1, 2, 0.0), 1.0), InsufficientDataError);
}

TEST_CASE("median squared distance") {
  CHECK(median_squared_distance(Matrix(2, 1, Vector{0, 3})) == 9.0);
  // Pairs: 1, 4, 9, 1, 4, 1 -> sorted 1 1 1 4 4 9, median 2.5.
  CHECK(median_squared_distance(Matrix(4, 1, Vector{0, 1, 2, 3})) == 2.5);
}

TEST_CASE("propagation converges to the harmonic solution") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8 + rng.below(20), L = 2 + rng.below(3);
    const auto x = test::gaussian_matrix(rng, n, 3);
    const auto t = transition_matrix(x, 2.0 + rng.uniform() * 3.0);
    LabelMatrix init{Matrix(n, L, 1.0 / static_cast<double>(L)), {}};
    for (std::size_t r = 0; r < n; r += 3) {
      auto row = init.y.row(r);
      std::fill(row.begin(), row.end(), 0.0);
      row[rng.below(L)] = 1.0;
      init.labeled.push_back(r);
    }
    AffinityConfig cfg;
    cfg.tol = 1e-13;
    cfg.max_iter = 20000;
    const auto res = propagate(t, init, cfg);
    REQUIRE(res.converged);
    const auto want = harmonic_oracle(t, init);
    for (std::size_t k = 0; k < want.data().size(); ++k)
      CHECK(std::abs(res.labels.y.data()[k] - want.data()[k]) <= 1e-8);
    for (auto r : init.labeled) CHECK(std::ranges::equal(res.labels.y.row(r), init.y.row(r)));
  }
}

TEST_CASE("fully labeled input is a fixed point") {
  Rng rng(23);
  const auto t = transition_matrix(test::gaussian_matrix(rng, 6, 2), 1.0);
  LabelMatrix init{Matrix(6, 2, 0.0), {0, 1, 2, 3, 4, 5}};
  for (std::size_t i = 0; i < 6; ++i) init.y(i, i % 2) = 1.0;
  const auto res = propagate(t, init, {});
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.labels.y == init.y);
}

TEST_CASE("confident count and order") {
  CHECK(confident_count(10, 0.2) == 2);
  CHECK(confident_count(50, 0.2) == 10);
  CHECK(confident_count(3, 0.2) == 1);
  CHECK(confident_count(7, 1.0) == 7);
  CHECK_THROWS_AS(confident_count(5, 0.0), ParameterError);
  const std::vector<forest::Prediction> p{pred(0, 0.5), pred(1, 0.9), pred(0, 0.5), pred(1, 0.7)};
  CHECK(confidence_order(p) == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("refinement relabels uncertain points from confident neighbors") {
  // Two tight groups; one point per group is confidently labeled.
  std::vector<EncodedSample> enc;
  std::vector<forest::Prediction> p;
  const double xs[] = {0.0, 0.1, 0.2, 10.0, 10.1, 10.2};
  const int forest_labels[] = {0, 1, 1, 1, 0, 0};
  const double conf[] = {0.9, 0.4, 0.4, 0.95, 0.4, 0.4};
  for (int i = 0; i < 6; ++i) {
    enc.push_back({{xs[i]}, 0, "t" + std::to_string(i), encoding::Kind::llc});
    p.push_back(pred(forest_labels[i], conf[i]));
  }
  AffinityConfig cfg;
  cfg.confident_fraction = 2.0 / 6.0;
  cfg.sigma = 1.0;
  const auto r = refine_predictions(enc, p, 2, cfg);
  REQUIRE(r.predictions.size() == 6);
  CHECK(r.predictions[0].confident);
  CHECK(r.predictions[3].confident);
  const int want[] = {0, 0, 0, 1, 1, 1};
  for (int i = 0; i < 6; ++i) {
    CHECK(r.predictions[static_cast<std::size_t>(i)].refined_label == want[i]);
    CHECK(r.predictions[static_cast<std::size_t>(i)].forest_label == forest_labels[i]);
  }
  CHECK(r.sigma == 1.0);
  CHECK(r.converged);
}

TEST_CASE("refinement errors and degenerate inputs") {
  CHECK_THROWS_AS(refine_predictions({}, {}, 2, {}), InsufficientDataError);
  std::vector<EncodedSample> one{{{1.0}, 0, "x", encoding::Kind::llc}};
  std::vector<forest::Prediction> none;
  CHECK_THROWS_AS(refine_predictions(one, none, 2, {}), ValidationError);
  const std::vector<forest::Prediction> p1{pred(1, 0.3)};
  const auto r = refine_predictions(one, p1, 2, {});
  CHECK(r.predictions[0].refined_label == 1);
  CHECK(r.predictions[0].confident);

  // Coincident points: sigma falls back to 1 and confident labels spread.
  std::vector<EncodedSample> same(4, EncodedSample{{2.0, 2.0}, 0, "s", encoding::Kind::llc});
  const std::vector<forest::Prediction> p{pred(1, 0.9), pred(0, 0.2), pred(0, 0.2), pred(0, 0.2)};
  AffinityConfig cfg;
  cfg.confident_fraction = 0.25;
  const auto s = refine_predictions(same, p, 2, cfg);
  CHECK(s.sigma == 1.0);
  for (const auto& rp : s.predictions) CHECK(rp.refined_label == 1);
}
