#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "ddl/io.hpp"
#include "ddl/knn.hpp"
#include "support.hpp"

using namespace ddl;
using ddl::test::TempDir;

namespace {

Entity make_entity(std::string id, int label, std::size_t rows, std::size_t dim, double base) {
  Entity e{std::move(id), label, Matrix(rows, dim)};
  for (std::size_t i = 0; i < e.descriptors.data().size(); ++i)
    e.descriptors.data()[i] = base + 0.25 * static_cast<double>(i);
  return e;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::size_t> oracle_knn(std::span<const double> q, const Matrix& corpus, std::size_t t,
                                    std::optional<std::size_t> exclude) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < corpus.rows(); ++i)
    if (!exclude || *exclude != i) all.emplace_back(squared_distance(q, corpus.row(i)), i);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < t; ++k) out.push_back(all[k].second);
  return out;
}

}  // namespace

TEST_CASE("matrix append fixes width on first row") {
  Matrix m;
  const Vector a{1, 2, 3};
  m.append_row(a);
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 3);
  CHECK_THROWS_AS(m.append_row(Vector{1, 2}), ValidationError);
  CHECK_THROWS_AS(Matrix(2, 2, Vector{1, 2, 3}), ValidationError);
}

TEST_CASE("gather_rows keeps requested order") {
  Matrix m(3, 1, Vector{10, 20, 30});
  const std::vector<std::size_t> rows{2, 0, 2};
  const auto g = gather_rows(m, rows);
  CHECK(g.data() == Vector{30, 10, 30});
}

TEST_CASE("descriptor file round-trips at float32 precision") {
  TempDir dir("core_desc");
  Matrix m(2, 3, Vector{0.1, -2.5, 3.0, 1e-3, 7.25, -0.0});
  write_descriptor_file(dir / "a.ddlc", m);
  const auto back = read_descriptor_file(dir / "a.ddlc");
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 3);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(back.data()[i] == static_cast<double>(static_cast<float>(m.data()[i])));
  CHECK(std::filesystem::file_size(dir / "a.ddlc") == 16 + 6 * 4);
}

TEST_CASE("descriptor file rejects bad magic and truncation") {
  TempDir dir("core_bad");
  write_text(dir / "bad.ddlc", "NOPE\x01\x00\x00\x00");
  CHECK_THROWS_AS(read_descriptor_file(dir / "bad.ddlc"), FormatError);

  write_descriptor_file(dir / "ok.ddlc", Matrix(4, 2, 1.0));
  std::filesystem::resize_file(dir / "ok.ddlc", 16 + 5 * 4);
  CHECK_THROWS_AS(read_descriptor_file(dir / "ok.ddlc"), FormatError);
  CHECK_THROWS_AS(read_descriptor_file(dir / "missing.ddlc"), Error);
}

TEST_CASE("load_dataset: two entities of class 0 and one of class 1") {
  TempDir dir("core_load");
  DescriptorDataset ds;
  ds.num_classes = 2;
  ds.dim = 4;
  ds.entities = {make_entity("a", 0, 3, 4, 0.0), make_entity("b", 0, 1, 4, 1.0),
                 make_entity("c", 1, 2, 4, -1.0)};
  save_dataset(ds, dir / "train.manifest", dir / "data");
  const auto back = load_dataset(dir / "train.manifest");
  CHECK(back.size() == 3);
  CHECK(back.num_classes == 2);
  CHECK(back.dim == 4);
  CHECK(back.entities[0].id == "a");
  CHECK(back.entities[2].label == 1);

  // Re-serialization is a fixed point.
  save_dataset(back, dir / "again.manifest", dir / "data2");
  CHECK(load_dataset(dir / "again.manifest") == back);
}

TEST_CASE("load_dataset errors") {
  TempDir dir("core_err");
  write_descriptor_file(dir / "d4.ddlc", Matrix(2, 4, 0.5));
  write_descriptor_file(dir / "d5.ddlc", Matrix(2, 5, 0.5));

  SUBCASE("dimension mismatch names the entity") {
    write_text(dir / "m", "#dim=4 classes=2\nfirst\t0\td4.ddlc\nsecond\t1\td5.ddlc\n");
    try {
      load_dataset(dir / "m");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("second") != std::string::npos);
    }
  }
  SUBCASE("label equal to L is out of range") {
    write_text(dir / "m", "#dim=4 classes=2\nfirst\t0\td4.ddlc\nsecond\t2\td4.ddlc\n");
    CHECK_THROWS_AS(load_dataset(dir / "m"), ValidationError);
  }
  SUBCASE("malformed line reports its number") {
    write_text(dir / "m", "#dim=4 classes=2\nfirst\t0\td4.ddlc\n\nbroken line\n");
    try {
      load_dataset(dir / "m");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("missing header") {
    write_text(dir / "m", "first\t0\td4.ddlc\n");
    try {
      read_manifest(dir / "m");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("empty entity") {
    write_descriptor_file(dir / "empty.ddlc", Matrix(0, 4));
    write_text(dir / "m", "#dim=4 classes=2\nfirst\t0\td4.ddlc\nnone\t1\tempty.ddlc\n");
    CHECK_THROWS_AS(load_dataset(dir / "m"), ValidationError);
  }
  SUBCASE("fewer than two classes") {
    write_text(dir / "m", "#dim=4 classes=1\nfirst\t0\td4.ddlc\n");
    CHECK_THROWS_AS(load_dataset(dir / "m"), Error);
  }
}

TEST_CASE("validate rejects non-finite values") {
  DescriptorDataset ds;
  ds.num_classes = 2;
  ds.dim = 2;
  ds.entities = {make_entity("x", 0, 1, 2, 0.0), make_entity("y", 1, 1, 2, 0.0)};
  CHECK_NOTHROW(validate(ds));
  ds.entities[1].descriptors(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(ds), ValidationError);
}

TEST_CASE("mean_pairwise_distance examples") {
  CHECK(mean_pairwise_distance(Matrix(2, 1, Vector{0, 6})) == doctest::Approx(6.0));
  CHECK(mean_pairwise_distance(Matrix(3, 1, Vector{0, 1, 2})) == doctest::Approx(4.0 / 3.0));
  CHECK(mean_pairwise_distance(Matrix(5, 3, 2.5)) == 0.0);
  CHECK_THROWS_AS(mean_pairwise_distance(Matrix(1, 3, 0.0)), InsufficientDataError);
}

TEST_CASE("mean_pairwise_distance is permutation and translation invariant") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = test::random_matrix(rng, 30, 5);
    const double d = mean_pairwise_distance(m);
    std::vector<std::size_t> perm(m.rows());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    CHECK(mean_pairwise_distance(gather_rows(m, perm)) == doctest::Approx(d).epsilon(1e-12));
    for (double& v : m.data()) v += 3.0;
    CHECK(mean_pairwise_distance(m) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("knn examples") {
  const Matrix corpus(3, 1, Vector{0, 10, 20});
  CHECK(knn(Vector{1}, corpus, 2) == std::vector<std::size_t>{0, 1});

  // Query equal to item 1 with self-exclusion returns the nearest other item.
  CHECK(knn(Vector{10}, Matrix(3, 1, Vector{0, 10, 13}), 1, 1) == std::vector<std::size_t>{2});

  Matrix ties(8, 1, 100.0);
  ties(3, 0) = 1.0;
  ties(7, 0) = -1.0;
  CHECK(knn(Vector{0}, ties, 1) == std::vector<std::size_t>{3});

  // Duplicates at other indices remain legitimate neighbors.
  CHECK(knn(Vector{5}, Matrix(3, 1, Vector{5, 5, 9}), 1, 0) == std::vector<std::size_t>{1});
}

TEST_CASE("knn parameter errors") {
  const Matrix corpus(3, 2, 0.0);
  CHECK_THROWS_AS(knn(Vector{0, 0}, corpus, 0), ParameterError);
  CHECK_THROWS_AS(knn(Vector{0, 0}, corpus, 4), ParameterError);
  CHECK_THROWS_AS(knn(Vector{0, 0}, corpus, 3, 0), ParameterError);
  CHECK_THROWS_AS(knn(Vector{0}, corpus, 1), ParameterError);
}

TEST_CASE("knn matches a full-sort oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(499), d = 1 + rng.below(16);
    // Coarse grid values force many exact distance ties.
    Matrix corpus(n, d);
    for (double& v : corpus.data()) v = static_cast<double>(rng.below(5));
    const bool self = rng.below(2) == 1;
    const std::size_t qi = rng.below(n);
    const std::size_t t = 1 + rng.below(self ? n - 1 : n);
    const std::optional<std::size_t> ex = self ? std::optional(qi) : std::nullopt;
    const auto got = knn(corpus.row(qi), corpus, t, ex);
    REQUIRE(got == oracle_knn(corpus.row(qi), corpus, t, ex));
    for (std::size_t k = 1; k < got.size(); ++k)
      CHECK(squared_distance(corpus.row(qi), corpus.row(got[k - 1])) <=
            squared_distance(corpus.row(qi), corpus.row(got[k])));
  }
}
