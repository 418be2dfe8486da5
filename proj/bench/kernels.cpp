// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "ddl/dictionary.hpp"
#include "ddl/encoding.hpp"
#include "ddl/forest.hpp"
#include "ddl/knn.hpp"
#include "ddl/labelprop.hpp"
#include "ddl/meanshift.hpp"
#include "ddl/parallel.hpp"
#include "ddl/reference.hpp"
#include "ddl/rng.hpp"

using namespace ddl;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, 2.0);
  return m;
}

std::vector<CategoryCodebook> codebooks(int classes, std::size_t per_class, std::size_t dim) {
  Rng rng(5);
  std::vector<CategoryCodebook> out;
  for (int l = 0; l < classes; ++l) {
    CategoryCodebook cb;
    cb.label = l;
    for (std::size_t k = 0; k < per_class; ++k) {
      Codeword w;
      w.vector.resize(dim);
      for (double& v : w.vector) v = rng.normal(l, 2.0);
      w.label = l;
      w.source_index = k;
      cb.codewords.push_back(w);
    }
    out.push_back(cb);
  }
  return out;
}

forest::TrainingSet training_set() {
  Rng rng(9);
  forest::TrainingSet t;
  t.n_classes = 5;
  for (int i = 0; i < 250; ++i) {
    Vector f(40);
    for (double& v : f) v = rng.normal(i % 5, 2.0);
    t.features.append_row(f);
    t.labels.push_back(i % 5);
  }
  return t;
}

void threads_from(benchmark::State& state) { set_num_threads(static_cast<int>(state.range(0))); }

void BM_MeanPairwise_Reference(benchmark::State& state) {
  const auto m = gaussian(800, 16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::mean_pairwise_distance(m));
}
void BM_MeanPairwise_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto m = gaussian(800, 16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mean_pairwise_distance(m));
}

void BM_MeanShift_Reference(benchmark::State& state) {
  const auto m = gaussian(400, 16, 2);
  const auto p = meanshift::ShiftParams::for_bandwidth(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(reference::converge_points(m, p));
}
void BM_MeanShift_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto m = gaussian(400, 16, 2);
  const auto p = meanshift::ShiftParams::for_bandwidth(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(meanshift::converge_points(m, p));
}

void BM_Ranking_Reference(benchmark::State& state) {
  const auto books = codebooks(5, 160, 16);
  const dictionary::CodewordIndex index(books);
  for (auto _ : state) benchmark::DoNotOptimize(reference::score_all(index, 10));
}
void BM_Ranking_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto books = codebooks(5, 160, 16);
  const dictionary::CodewordIndex index(books);
  for (auto _ : state) benchmark::DoNotOptimize(dictionary::score_all(index, 10));
}

void BM_Transition_Reference(benchmark::State& state) {
  const auto m = gaussian(300, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::transition_matrix(m, 50.0));
}
void BM_Transition_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto m = gaussian(300, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(labelprop::transition_matrix(m, 50.0));
}

encoding::GmmModel bench_gmm() {
  encoding::GmmParams p;
  p.components = 16;
  p.max_iter = 5;
  return encoding::fit_gmm(gaussian(2000, 16, 4), p).model;
}

void BM_Posteriors_Reference(benchmark::State& state) {
  const auto g = bench_gmm();
  const auto x = gaussian(2000, 16, 6);
  for (auto _ : state) benchmark::DoNotOptimize(reference::posteriors(g, x));
}
void BM_Posteriors_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto g = bench_gmm();
  const auto x = gaussian(2000, 16, 6);
  for (auto _ : state) benchmark::DoNotOptimize(encoding::posteriors(g, x));
}

void BM_Forest_Reference(benchmark::State& state) {
  const auto t = training_set();
  forest::ForestParams p;
  p.n_trees = 64;
  for (auto _ : state) benchmark::DoNotOptimize(reference::train_forest(t, p));
}
void BM_Forest_Parallel(benchmark::State& state) {
  threads_from(state);
  const auto t = training_set();
  forest::ForestParams p;
  p.n_trees = 64;
  for (auto _ : state) benchmark::DoNotOptimize(forest::train_forest(t, p));
}

}  // namespace

#define DDL_PAIR(name)                                                   \
  BENCHMARK(BM_##name##_Reference)->Unit(benchmark::kMillisecond);       \
  BENCHMARK(BM_##name##_Parallel)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond)

DDL_PAIR(MeanPairwise);
DDL_PAIR(MeanShift);
DDL_PAIR(Ranking);
DDL_PAIR(Transition);
DDL_PAIR(Posteriors);
DDL_PAIR(Forest);

BENCHMARK_MAIN();
