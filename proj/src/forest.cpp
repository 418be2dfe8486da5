#include "ddl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "binary_io.hpp"
#include "ddl/parallel.hpp"
#include "ddl/rng.hpp"

namespace ddl::forest {

namespace {

constexpr char kForestMagic[4] = {'D', 'F', 'O', 'R'};
constexpr std::uint32_t kForestVersion = 1;
// Gains at or below this are treated as zero.
constexpr double kMinGain = 1e-12;
// Separates the feature-sampling stream from the bootstrap stream of a tree.
constexpr std::uint64_t kFeatureStream = 0x6a09e667f3bcc909ULL;

int argmax_smallest(std::span<const std::uint32_t> counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

// ceil(sqrt(n)) without floating-point edge cases.
std::size_t ceil_sqrt(std::size_t n) {
  std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r < n) ++r;
  while (r > 0 && (r - 1) * (r - 1) >= n) --r;
  return r;
}

// Floyd's algorithm: m distinct indices of [0, n), returned ascending.
std::vector<std::size_t> sample_features(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(m);
  for (std::size_t j = n - m; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(out.begin(), out.end(), t) == out.end())
      out.push_back(t);
    else
      out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

const Node& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].leaf) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i];
}

int DecisionTree::vote(std::span<const double> x) const { return argmax_smallest(leaf_for(x).counts); }

TrainingSet make_training_set(std::span<const encoding::EncodedSample> samples, int n_classes) {
  TrainingSet t;
  t.n_classes = n_classes;
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= n_classes)
      throw ValidationError("sample '" + s.entity_id + "' has label out of range");
    t.features.append_row(s.features);
    t.labels.push_back(s.label);
  }
  return t;
}

double impurity(std::span<const std::size_t> counts, std::size_t total, Criterion criterion) {
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  double s = 0.0;
  if (criterion == Criterion::entropy) {
    for (std::size_t c : counts)
      if (c) {
        const double p = static_cast<double>(c) / n;
        s -= p * std::log2(p);
      }
    return s;
  }
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / n;
    s += p * p;
  }
  return 1.0 - s;
}

namespace {

std::vector<std::size_t> histogram(const TrainingSet& data, std::span<const std::size_t> rows) {
  std::vector<std::size_t> h(static_cast<std::size_t>(data.n_classes), 0);
  for (std::size_t r : rows) ++h[static_cast<std::size_t>(data.labels[r])];
  return h;
}

}  // namespace

double split_gain(const TrainingSet& data, std::span<const std::size_t> rows, std::size_t feature,
                  double threshold, Criterion criterion) {
  const auto L = static_cast<std::size_t>(data.n_classes);
  std::vector<std::size_t> left(L, 0), right(L, 0);
  std::size_t nl = 0, nr = 0;
  for (std::size_t r : rows) {
    const auto c = static_cast<std::size_t>(data.labels[r]);
    if (data.features(r, feature) <= threshold) {
      ++left[c];
      ++nl;
    } else {
      ++right[c];
      ++nr;
    }
  }
  const std::size_t n = nl + nr;
  const auto parent = histogram(data, rows);
  return impurity(parent, n, criterion) -
         (static_cast<double>(nl) / static_cast<double>(n)) * impurity(left, nl, criterion) -
         (static_cast<double>(nr) / static_cast<double>(n)) * impurity(right, nr, criterion);
}

SplitChoice best_split(const TrainingSet& data, std::span<const std::size_t> rows,
                       std::span<const std::size_t> candidate_features, std::size_t min_leaf,
                       Criterion criterion) {
  const auto L = static_cast<std::size_t>(data.n_classes);
  const std::size_t n = rows.size();
  const auto parent = histogram(data, rows);
  const double parent_imp = impurity(parent, n, criterion);
  const std::size_t min_side = std::max<std::size_t>(min_leaf, 1);

  SplitChoice best;
  std::vector<std::pair<double, int>> column(n);
  std::vector<std::size_t> left(L), right(L);
  for (std::size_t f : candidate_features) {
    for (std::size_t i = 0; i < n; ++i)
      column[i] = {data.features(rows[i], f), data.labels[rows[i]]};
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0);
    right = parent;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(column[i].second);
      ++left[c];
      --right[c];
      const double a = column[i].first, b = column[i + 1].first;
      if (!(a < b)) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_side || nr < min_side) continue;
      const double gain = parent_imp -
                          (static_cast<double>(nl) / static_cast<double>(n)) *
                              impurity(left, nl, criterion) -
                          (static_cast<double>(nr) / static_cast<double>(n)) *
                              impurity(right, nr, criterion);
      if (!best.found || gain > best.gain) {
        double thr = a + 0.5 * (b - a);
        if (!(thr < b)) thr = a;
        best = {true, f, thr, gain};
      }
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const ForestParams& params, std::uint64_t seed)
      : data_(data),
        params_(params),
        rng_(seed),
        n_features_(std::max<std::size_t>(1, ceil_sqrt(data.features.cols()))) {}

  std::vector<Node> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  std::uint32_t make_leaf(std::span<const std::size_t> rows) {
    Node leaf;
    leaf.leaf = true;
    const auto h = histogram(data_, rows);
    leaf.counts.assign(h.begin(), h.end());
    nodes_.push_back(std::move(leaf));
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  std::uint32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto h = histogram(data_, rows);
    const bool pure = std::count_if(h.begin(), h.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || rows.size() < 2 * std::max<std::size_t>(params_.min_leaf, 1) ||
        (params_.max_depth && depth >= *params_.max_depth))
      return make_leaf(rows);

    const auto features = sample_features(data_.features.cols(), n_features_, rng_);
    const auto split = best_split(data_, rows, features, params_.min_leaf, params_.criterion);
    if (!split.found || split.gain <= kMinGain) return make_leaf(rows);

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (data_.features(r, split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const auto self = static_cast<std::uint32_t>(nodes_.size());
    Node node;
    node.feature = static_cast<std::uint32_t>(split.feature);
    node.threshold = split.threshold;
    nodes_.push_back(std::move(node));
    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  const TrainingSet& data_;
  const ForestParams& params_;
  Rng rng_;
  std::size_t n_features_;
  std::vector<Node> nodes_;
};

void check_training_set(const TrainingSet& data) {
  if (data.features.rows() == 0) throw ValidationError("forest training set is empty");
  if (data.labels.size() != data.features.rows())
    throw ValidationError("forest training labels and features disagree in length");
  std::vector<bool> present(static_cast<std::size_t>(std::max(data.n_classes, 0)), false);
  for (int l : data.labels) {
    if (l < 0 || l >= data.n_classes) throw ValidationError("training label out of range");
    present[static_cast<std::size_t>(l)] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2)
    throw ValidationError("forest training needs at least 2 classes present");
}

}  // namespace

DecisionTree grow_tree(const TrainingSet& data, std::span<const std::size_t> rows,
                       const ForestParams& params, std::uint64_t rng_seed) {
  if (rows.empty()) throw ValidationError("cannot grow a tree on no rows");
  return DecisionTree(
      TreeBuilder(data, params, rng_seed).build(std::vector<std::size_t>(rows.begin(), rows.end())));
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t tree) {
  Rng rng(seed ^ static_cast<std::uint64_t>(tree));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
  return rows;
}

std::uint64_t feature_stream_seed(std::uint64_t seed, std::size_t tree) {
  return (seed ^ static_cast<std::uint64_t>(tree)) ^ kFeatureStream;
}

ForestModel train_forest(const TrainingSet& data, const ForestParams& params) {
  if (params.n_trees < 1) throw ParameterError("forest needs at least one tree");
  check_training_set(data);
  ForestModel model;
  model.n_classes = data.n_classes;
  model.dim = data.features.cols();
  model.trees.resize(params.n_trees);
  const std::size_t n = data.features.rows();
  parallel_for(params.n_trees, [&](std::size_t t) {
    const auto rows = bootstrap_rows(n, params.seed, t);
    model.trees[t] = grow_tree(data, rows, params, feature_stream_seed(params.seed, t));
  });
  return model;
}

ForestModel train_forest(std::span<const encoding::EncodedSample> samples, int n_classes,
                         const ForestParams& params) {
  // Bootstrap indices refer to entity-id order, so input order is irrelevant.
  std::vector<encoding::EncodedSample> canonical(samples.begin(), samples.end());
  std::stable_sort(canonical.begin(), canonical.end(),
                   [](const auto& a, const auto& b) { return a.entity_id < b.entity_id; });
  return train_forest(make_training_set(canonical, n_classes), params);
}

Prediction predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw ParameterError("predict: feature length " + std::to_string(x.size()) +
                         " does not match model dimension " + std::to_string(model.dim));
  if (model.trees.empty()) throw ValidationError("predict: forest has no trees");
  Prediction p;
  p.votes.assign(static_cast<std::size_t>(model.n_classes), 0);
  for (const auto& tree : model.trees) ++p.votes[static_cast<std::size_t>(tree.vote(x))];
  p.label = argmax_smallest(p.votes);
  p.confidence = static_cast<double>(p.votes[static_cast<std::size_t>(p.label)]) /
                 static_cast<double>(model.trees.size());
  return p;
}

std::vector<Prediction> predict_dataset(const ForestModel& model,
                                        std::span<const encoding::EncodedSample> samples) {
  std::vector<Prediction> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = predict(model, samples[i].features); });
  return out;
}

double out_of_bag_error(const ForestModel& model, const TrainingSet& data, std::uint64_t seed) {
  const std::size_t n = data.features.rows();
  const auto L = static_cast<std::size_t>(model.n_classes);
  std::vector<std::uint32_t> votes(n * L, 0);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    std::vector<bool> in_bag(n, false);
    for (std::size_t r : bootstrap_rows(n, seed, t)) in_bag[r] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_bag[i])
        ++votes[i * L + static_cast<std::size_t>(model.trees[t].vote(data.features.row(i)))];
  }
  std::size_t voted = 0, wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const std::uint32_t> v(votes.data() + i * L, L);
    if (std::all_of(v.begin(), v.end(), [](std::uint32_t c) { return c == 0; })) continue;
    ++voted;
    if (argmax_smallest(v) != data.labels[i]) ++wrong;
  }
  return voted ? static_cast<double>(wrong) / static_cast<double>(voted) : 0.0;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.bytes(kForestMagic, 4);
  out.put<std::uint32_t>(kForestVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.n_classes));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.dim));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& tree : model.trees) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      out.put<std::uint8_t>(node.leaf ? 1 : 0);
      if (node.leaf) {
        for (std::uint32_t c : node.counts) out.put<std::uint32_t>(c);
      } else {
        out.put<std::uint32_t>(node.feature);
        out.put<double>(node.threshold);
        out.put<std::uint32_t>(node.left);
        out.put<std::uint32_t>(node.right);
      }
    }
  }
}

ForestModel load_forest(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kForestMagic);
  if (in.get<std::uint32_t>() != kForestVersion)
    throw FormatError("unsupported forest version in " + path.string());
  ForestModel model;
  model.n_classes = static_cast<int>(in.get<std::uint32_t>());
  model.dim = in.get<std::uint32_t>();
  const std::uint32_t n_trees = in.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const std::uint32_t count = in.get<std::uint32_t>();
    std::vector<Node> nodes(count);
    for (auto& node : nodes) {
      const auto kind = in.get<std::uint8_t>();
      if (kind > 1) throw FormatError("bad node kind in " + path.string());
      node.leaf = kind == 1;
      if (node.leaf) {
        node.counts.resize(static_cast<std::size_t>(model.n_classes));
        for (auto& c : node.counts) c = in.get<std::uint32_t>();
      } else {
        node.feature = in.get<std::uint32_t>();
        node.threshold = in.get<double>();
        node.left = in.get<std::uint32_t>();
        node.right = in.get<std::uint32_t>();
        if (node.feature >= model.dim || node.left >= count || node.right >= count)
          throw FormatError("corrupt internal node in " + path.string());
      }
    }
    model.trees.emplace_back(std::move(nodes));
  }
  if (!in.at_end()) throw FormatError("trailing bytes in " + path.string());
  return model;
}

}  // namespace ddl::forest
