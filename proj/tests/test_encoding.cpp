#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "ddl/encoding.hpp"
#include "ddl/knn.hpp"
#include "ddl/reference.hpp"
#include "support.hpp"

using namespace ddl;
using namespace ddl::encoding;

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Equality-constrained QP min |x - B^T c|^2 + lambda |c|^2, 1^T c = 1, via the
// unshifted KKT system [2(B B^T + lambda I) 1; 1^T 0] [c; nu] = [2 B x; 1].
Vector kkt_oracle(std::span<const double> x, const Matrix& dict, std::span<const std::size_t> idx,
                  double lambda) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd b(k, d);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < d; ++j) b(i, j) = dict(idx[static_cast<std::size_t>(i)], static_cast<std::size_t>(j));
  const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = 2.0 * (b * b.transpose() + lambda * Eigen::MatrixXd::Identity(k, k));
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Eigen::VectorXd rhs(k + 1);
  rhs.head(k) = 2.0 * b * xv;
  rhs(k) = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return Vector(sol.data(), sol.data() + k);
}

GmmModel two_component_1d() {
  GmmModel g;
  g.weights = {0.3, 0.7};
  g.means = Matrix(2, 1, Vector{-5.0, 5.0});
  g.variances = Matrix(2, 1, Vector{1.0, 0.25});
  return g;
}

}  // namespace

TEST_CASE("llc: x at a codeword with k=1") {
  const Matrix dict(3, 2, Vector{0, 0, 1, 1, 4, -2});
  const auto code = llc_encode(Vector{1, 1}, dict, {1, 1e-4});
  REQUIRE(code.indices == std::vector<std::size_t>{1});
  CHECK(code.weights[0] == 1.0);
  const auto pooled = llc_pool(std::vector{code}, 3);
  CHECK(pooled == Vector{0, 1, 0});
}

TEST_CASE("llc matches the KKT oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const auto dict = test::gaussian_matrix(rng, 20, 5);
    Vector x(5);
    for (double& v : x) v = rng.normal();
    const LlcParams p{3, 1e-4};
    const auto code = llc_encode(x, dict, p);
    CHECK(code.indices == knn(x, dict, 3));
    const auto want = kkt_oracle(x, dict, code.indices, p.ridge);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(code.weights[i] - want[i]) <= 1e-6);
    CHECK(std::abs(std::accumulate(code.weights.begin(), code.weights.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("llc parameter and numeric errors") {
  const Matrix dict(3, 2, Vector{0, 0, 1, 1, 4, -2});
  CHECK_THROWS_AS(llc_encode(Vector{1}, dict, {}), ParameterError);
  CHECK_THROWS_AS(llc_encode(Vector{1, 1}, dict, {0, 1e-4}), ParameterError);
  CHECK_THROWS_AS(llc_encode(Vector{1, 1}, dict, {2, 0.0}), Error);
}

TEST_CASE("llc pooling") {
  const SparseCode a{{0, 2}, {0.6, -0.8}};
  const SparseCode b{{1}, {2.0}};
  SUBCASE("single code") {
    const auto v = llc_pool(std::vector{a}, 3);
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[2] == doctest::Approx(0.8));
  }
  SUBCASE("disjoint supports") {
    const auto v = llc_pool(std::vector{a, b}, 3);
    const double n = std::sqrt(0.36 + 0.64 + 4.0);
    CHECK(v[0] == doctest::Approx(0.6 / n));
    CHECK(v[1] == doctest::Approx(2.0 / n));
    CHECK(v[2] == doctest::Approx(0.8 / n));
    CHECK(norm2(v) == doctest::Approx(1.0));
  }
  SUBCASE("empty") { CHECK_THROWS_AS(llc_pool(std::vector<SparseCode>{}, 3), Error); }
}

TEST_CASE("gmm: two separated 1-D Gaussians") {
  Rng rng(202);
  Matrix x;
  const std::size_t n = 2000;
  for (std::size_t i = 0; i < n; ++i) x.append_row(Vector{i % 10 < 3 ? rng.normal(-4, 1) : rng.normal(6, 0.5)});
  GmmParams p;
  p.components = 2;
  p.seed = 1;
  const auto fit = fit_gmm(x, p);
  auto m = fit.model;
  const std::size_t lo = m.means(0, 0) < m.means(1, 0) ? 0 : 1, hi = 1 - lo;
  CHECK(std::abs(m.means(lo, 0) + 4) < 3 * 1.0 / std::sqrt(0.3 * n));
  CHECK(std::abs(m.means(hi, 0) - 6) < 3 * 0.5 / std::sqrt(0.7 * n));
  CHECK(std::abs(m.weights[lo] - 0.3) < 0.1);
  CHECK(std::abs(m.weights[hi] - 0.7) < 0.1);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
}

TEST_CASE("gmm: K=1 is the sample mean and variance") {
  Rng rng(203);
  const auto x = test::gaussian_matrix(rng, 500, 3, 2.0);
  GmmParams p;
  p.components = 1;
  const auto m = fit_gmm(x, p).model;
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.rows());
    CHECK(m.means(0, j) == doctest::Approx(mean).epsilon(1e-9));
    CHECK(m.variances(0, j) == doctest::Approx(var).epsilon(1e-9));
  }
  CHECK(m.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("gmm errors, posteriors and serialization") {
  Rng rng(204);
  const auto x = test::gaussian_matrix(rng, 300, 4);
  GmmParams p;
  p.components = 400;
  CHECK_THROWS_AS(fit_gmm(x, p), ParameterError);
  p.components = 5;
  p.seed = 9;
  const auto m = fit_gmm(x, p).model;
  const auto post = posteriors(m, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) s += post.responsibilities(i, k);
    CHECK(std::abs(s - 1.0) <= 1e-10);
  }
  const auto ref = reference::posteriors(m, x);
  CHECK(ref.responsibilities == post.responsibilities);
  CHECK(ref.log_density == post.log_density);

  test::TempDir dir("gmm");
  save_gmm(m, dir / "g.bin");
  CHECK(load_gmm(dir / "g.bin") == m);
  CHECK(fit_gmm(x, p).model == m);
}

TEST_CASE("fisher vector length and normalization") {
  Rng rng(205);
  GmmModel g;
  g.weights.assign(100, 0.01);
  g.means = test::gaussian_matrix(rng, 100, 162);
  g.variances = Matrix(100, 162, 1.0);
  const auto fv = fisher_vector(test::gaussian_matrix(rng, 20, 162), g);
  CHECK(fv.size() == 32400);
  CHECK(norm2(fv) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fisher mean block vanishes at the component means") {
  const auto g = two_component_1d();
  Matrix x;
  for (int i = 0; i < 3; ++i) x.append_row(Vector{-5.0});
  for (int i = 0; i < 7; ++i) x.append_row(Vector{5.0});
  const auto s = fisher_statistics(x, g);
  CHECK(std::abs(s.first_order(0, 0)) < 1e-12);
  CHECK(std::abs(s.first_order(1, 0)) < 1e-12);
  const auto fv = fisher_from_statistics(s, g);
  CHECK(std::abs(fv[0]) < 1e-6);
  CHECK(std::abs(fv[1]) < 1e-6);
}

TEST_CASE("fisher statistics are additive") {
  Rng rng(206);
  GmmModel g;
  g.weights = {0.2, 0.5, 0.3};
  g.means = test::gaussian_matrix(rng, 3, 4);
  g.variances = test::random_matrix(rng, 3, 4, 0.5, 2.0);
  const auto a = test::gaussian_matrix(rng, 13, 4);
  const auto b = test::gaussian_matrix(rng, 8, 4);
  Matrix both = a;
  for (std::size_t i = 0; i < b.rows(); ++i) both.append_row(b.row(i));
  auto sum = fisher_statistics(a, g);
  sum += fisher_statistics(b, g);
  const auto whole = fisher_statistics(both, g);
  CHECK(sum.count == whole.count);
  for (std::size_t i = 0; i < whole.first_order.data().size(); ++i) {
    CHECK(sum.first_order.data()[i] == doctest::Approx(whole.first_order.data()[i]).epsilon(1e-10));
    CHECK(sum.second_order.data()[i] == doctest::Approx(whole.second_order.data()[i]).epsilon(1e-10));
  }
}

TEST_CASE("encode_dataset preserves order, labels and bytes") {
  Rng rng(207);
  DescriptorDataset ds;
  ds.num_classes = 2;
  ds.dim = 3;
  for (int i = 0; i < 6; ++i) ds.entities.push_back({"e" + std::to_string(i), i % 2, test::gaussian_matrix(rng, 4 + i, 3)});
  EncoderModel llc;
  llc.dictionary = test::gaussian_matrix(rng, 8, 3);
  llc.llc = {4, 1e-4};
  const auto a = encode_dataset(ds, llc);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a[i].label == ds.entities[i].label);
    CHECK(a[i].entity_id == ds.entities[i].id);
    CHECK(a[i].features.size() == 8);
  }
  CHECK(encode_dataset(ds, llc) == a);

  EncoderModel fisher;
  fisher.kind = Kind::fisher;
  CHECK_THROWS_AS(encode_dataset(ds, fisher), ConfigError);
  fisher.gmm = GmmModel{{0.5, 0.5}, test::gaussian_matrix(rng, 2, 3), Matrix(2, 3, 1.0)};
  const auto f = encode_dataset(ds, fisher);
  CHECK(f[0].features.size() == 12);
  CHECK(f[0].kind == Kind::fisher);

  test::TempDir dir("enc");
  save_encoded(a, 2, dir / "train");
  const auto back = load_encoded(dir / "train", Kind::llc);
  CHECK(back.num_classes == 2);
  REQUIRE(back.samples.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(back.samples[i].entity_id == a[i].entity_id);
    for (std::size_t j = 0; j < a[i].features.size(); ++j)
      CHECK(back.samples[i].features[j] == static_cast<double>(static_cast<float>(a[i].features[j])));
  }
}
