#include "ddl/dictionary.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "ddl/io.hpp"
#include "ddl/knn.hpp"
#include "ddl/parallel.hpp"

namespace ddl {

Matrix CategoryCodebook::vectors() const {
  Matrix m;
  for (const auto& c : codewords) m.append_row(c.vector);
  return m;
}

void save_dictionary(const GlobalDictionary& dict, const std::filesystem::path& bin_path,
                     const std::filesystem::path& meta_path) {
  write_descriptor_file(bin_path, dict.codewords);
  std::ofstream out(meta_path, std::ios::trunc);
  if (!out) throw Error("cannot open " + meta_path.string() + " for writing");
  out.precision(17);
  for (std::size_t i = 0; i < dict.size(); ++i)
    out << i << '\t' << dict.labels[i] << '\t' << dict.ranks[i] << '\t' << dict.entropies[i]
        << '\t' << dict.tfidfs[i] << '\n';
  if (!out) throw Error("write failed: " + meta_path.string());
}

GlobalDictionary load_dictionary(const std::filesystem::path& bin_path,
                                 const std::filesystem::path& meta_path, int num_classes) {
  GlobalDictionary dict;
  dict.codewords = read_descriptor_file(bin_path);
  std::ifstream in(meta_path);
  if (!in) throw Error("cannot open " + meta_path.string());
  dict.per_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t index;
    int label;
    double rank, h, ti;
    if (!(ss >> index >> label >> rank >> h >> ti) || index != dict.labels.size())
      throw FormatError("malformed dictionary sidecar " + meta_path.string(), lineno);
    if (label < 0 || label >= num_classes)
      throw ValidationError("dictionary codeword " + std::to_string(index) + " has label " +
                            std::to_string(label) + " out of range");
    dict.labels.push_back(label);
    dict.ranks.push_back(rank);
    dict.entropies.push_back(h);
    dict.tfidfs.push_back(ti);
    ++dict.per_class_counts[static_cast<std::size_t>(label)];
  }
  if (dict.labels.size() != dict.codewords.rows())
    throw ValidationError("dictionary sidecar lists " + std::to_string(dict.labels.size()) +
                          " codewords, binary holds " + std::to_string(dict.codewords.rows()));
  return dict;
}

}  // namespace ddl

namespace ddl::dictionary {

CodewordIndex::CodewordIndex(std::span<const CategoryCodebook> codebooks) {
  offsets_.push_back(0);
  for (const auto& cb : codebooks) {
    for (const auto& c : cb.codewords) {
      vectors_.append_row(c.vector);
      labels_.push_back(c.label);
      num_labels_ = std::max(num_labels_, c.label + 1);
    }
    offsets_.push_back(vectors_.rows());
  }
}

std::size_t CodewordIndex::position(std::size_t codebook, std::size_t k) const {
  if (codebook + 1 >= offsets_.size() || offsets_[codebook] + k >= offsets_[codebook + 1])
    throw ParameterError("codeword reference out of range");
  return offsets_[codebook] + k;
}

NeighborhoodScore score_codeword(const CodewordIndex& index, std::size_t position,
                                 std::size_t neighbors) {
  if (position >= index.size()) throw ParameterError("codeword position out of range");
  if (neighbors == 0 || neighbors >= index.size())
    throw ParameterError("neighbor count T=" + std::to_string(neighbors) +
                         " must satisfy 1 <= T < " + std::to_string(index.size()) +
                         " (total codewords)");
  const auto nn = knn(index.vectors().row(position), index.vectors(), neighbors, position);
  const int own = index.labels()[position];

  std::vector<std::size_t> hist(static_cast<std::size_t>(index.num_labels()), 0);
  std::size_t same = 0;
  for (std::size_t j : nn) {
    const int l = index.labels()[j];
    ++hist[static_cast<std::size_t>(l)];
    if (l == own) ++same;
  }
  const double t = static_cast<double>(neighbors);
  NeighborhoodScore s;
  for (std::size_t count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / t;
    s.entropy -= p * std::log2(p);
  }
  // A unanimous neighborhood yields -1*log2(1) = -0; report +0.
  if (s.entropy <= 0.0) s.entropy = 0.0;
  s.tfidf = static_cast<double>(same) / t;
  return s;
}

double conditional_entropy(const CodewordIndex& index, std::size_t position,
                           std::size_t neighbors) {
  return score_codeword(index, position, neighbors).entropy;
}

double tfidf_score(const CodewordIndex& index, std::size_t position, std::size_t neighbors) {
  return score_codeword(index, position, neighbors).tfidf;
}

double rank_score(double h, double ti, double w1, double h_floor) {
  if (!(h_floor > 0.0)) throw ParameterError("h_floor must be positive");
  return w1 / std::max(h, h_floor) + (1.0 - w1) * ti;
}

std::vector<NeighborhoodScore> score_all(const CodewordIndex& index, std::size_t neighbors) {
  std::vector<NeighborhoodScore> out(index.size());
  parallel_for(index.size(),
               [&](std::size_t i) { out[i] = score_codeword(index, i, neighbors); });
  return out;
}

namespace {

void validate_ranking(const RankingParams& p) {
  if (!(p.w1 >= 0.0 && p.w1 <= 1.0)) throw ParameterError("w1 must lie in [0, 1]");
  if (!(p.h_floor > 0.0)) throw ParameterError("h_floor must be positive");
}

CategoryCodebook apply_scores(const CategoryCodebook& cb, std::span<const NeighborhoodScore> scores,
                              const RankingParams& p) {
  CategoryCodebook out = cb;
  for (std::size_t k = 0; k < out.codewords.size(); ++k) {
    auto& c = out.codewords[k];
    c.entropy = scores[k].entropy;
    c.tfidf = scores[k].tfidf;
    c.rank = rank_score(c.entropy, c.tfidf, p.w1, p.h_floor);
  }
  std::stable_sort(out.codewords.begin(), out.codewords.end(),
                   [](const Codeword& a, const Codeword& b) {
                     if (a.rank != b.rank) return a.rank > b.rank;
                     return a.source_index < b.source_index;
                   });
  return out;
}

}  // namespace

CategoryCodebook rank_codebook(std::span<const CategoryCodebook> all, std::size_t which,
                               const RankingParams& params) {
  validate_ranking(params);
  if (which >= all.size()) throw ParameterError("codebook index out of range");
  const CodewordIndex index(all);
  std::vector<NeighborhoodScore> scores(all[which].size());
  parallel_for(scores.size(), [&](std::size_t k) {
    scores[k] = score_codeword(index, index.position(which, k), params.neighbors);
  });
  return apply_scores(all[which], scores, params);
}

std::vector<CategoryCodebook> rank_codebooks(std::span<const CategoryCodebook> all,
                                             const RankingParams& params) {
  validate_ranking(params);
  const CodewordIndex index(all);
  const auto scores = score_all(index, params.neighbors);
  std::vector<CategoryCodebook> out;
  out.reserve(all.size());
  for (std::size_t b = 0; b < all.size(); ++b) {
    const std::size_t first = all[b].size() ? index.position(b, 0) : 0;
    out.push_back(apply_scores(
        all[b], std::span<const NeighborhoodScore>(scores).subspan(first, all[b].size()), params));
  }
  return out;
}

ChainGraph build_chain(const CategoryCodebook& ranked) {
  ChainGraph g;
  g.nodes = ranked.vectors();
  for (std::size_t i = 0; i + 1 < g.nodes.rows(); ++i)
    g.edge_weights.push_back(euclidean_distance(g.nodes.row(i), g.nodes.row(i + 1)));
  return g;
}

Matrix chain_affinity(const ChainGraph& g, double sigma, bool full_graph) {
  if (!(sigma > 0.0)) throw ParameterError("affinity scale sigma must be positive");
  const std::size_t n = g.nodes.rows();
  Matrix a(n, n, 0.0);
  if (full_graph) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        a(i, j) = a(j, i) = std::exp(-euclidean_distance(g.nodes.row(i), g.nodes.row(j)) / sigma);
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i)
      a(i, i + 1) = a(i + 1, i) = std::exp(-g.edge_weights[i] / sigma);
  }
  return a;
}

Vector replicator_dynamics(const Matrix& affinity, double tol, int max_iter) {
  const std::size_t n = affinity.rows();
  Vector x(n, 1.0 / static_cast<double>(n)), ax(n), next(n);
  for (int it = 0; it < max_iter; ++it) {
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += affinity(i, j) * x[j];
      ax[i] = s;
      quad += x[i] * s;
    }
    if (!(quad > 0.0)) break;  // no positive affinity left to climb
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = x[i] * ax[i] / quad;
      change += std::abs(next[i] - x[i]);
    }
    x.swap(next);
    if (change < tol) break;
  }
  return x;
}

Bipartition dominant_set_bipartition(const ChainGraph& g, const DominantSetParams& params) {
  const std::size_t n = g.nodes.rows();
  if (n < 2) throw ParameterError("dominant-set bipartition needs at least 2 nodes");
  if (!(params.support_threshold > 0.0 && params.support_threshold < 1.0))
    throw ParameterError("support threshold must lie in (0, 1)");

  double sigma;
  if (params.sigma) {
    sigma = *params.sigma;
  } else {
    const double total = std::accumulate(g.edge_weights.begin(), g.edge_weights.end(), 0.0);
    sigma = total / static_cast<double>(g.edge_weights.size());
    if (!(sigma > 0.0)) sigma = 1.0;  // coincident nodes: every affinity is 1
  }

  const Vector x =
      replicator_dynamics(chain_affinity(g, sigma, params.full_graph), params.tol, params.max_iter);
  const double peak = *std::max_element(x.begin(), x.end());

  Bipartition part;
  for (std::size_t i = 0; i < n; ++i)
    (x[i] > params.support_threshold * peak ? part.first : part.second).push_back(i);

  if (part.first.empty() || part.second.empty()) {
    const auto largest = std::max_element(g.edge_weights.begin(), g.edge_weights.end());
    const auto cut = static_cast<std::size_t>(largest - g.edge_weights.begin());
    part.first.clear();
    part.second.clear();
    for (std::size_t i = 0; i < n; ++i) (i <= cut ? part.first : part.second).push_back(i);
    part.used_fallback = true;
  }
  return part;
}

CategoryCodebook select_codewords(const CategoryCodebook& ranked, const Bipartition& partition) {
  auto mean_rank = [&](const std::vector<std::size_t>& side) {
    double s = 0.0;
    for (std::size_t i : side) s += ranked.codewords.at(i).rank;
    return side.empty() ? -std::numeric_limits<double>::infinity()
                        : s / static_cast<double>(side.size());
  };
  const double ma = mean_rank(partition.first), mb = mean_rank(partition.second);
  const std::vector<std::size_t>* pick;
  if (ma != mb) {
    pick = ma > mb ? &partition.first : &partition.second;
  } else {
    const bool first_has_top =
        std::find(partition.first.begin(), partition.first.end(), 0) != partition.first.end();
    pick = first_has_top ? &partition.first : &partition.second;
  }
  std::vector<std::size_t> idx = *pick;
  std::sort(idx.begin(), idx.end());
  CategoryCodebook out;
  out.label = ranked.label;
  for (std::size_t i : idx) out.codewords.push_back(ranked.codewords[i]);
  return out;
}

CategoryCodebook select_top(const CategoryCodebook& ranked, std::size_t b) {
  CategoryCodebook out;
  out.label = ranked.label;
  const std::size_t n = std::min(b, ranked.size());
  out.codewords.assign(ranked.codewords.begin(),
                       ranked.codewords.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

CategoryCodebook select_adaptive(const CategoryCodebook& ranked, const DominantSetParams& params) {
  if (ranked.size() < 2) return ranked;
  return select_codewords(ranked, dominant_set_bipartition(build_chain(ranked), params));
}

GlobalDictionary build_global_dictionary(std::span<const CategoryCodebook> selected,
                                         int num_classes) {
  std::vector<const CategoryCodebook*> by_class(static_cast<std::size_t>(num_classes), nullptr);
  for (const auto& cb : selected) {
    if (cb.label < 0 || cb.label >= num_classes)
      throw ValidationError("codebook label " + std::to_string(cb.label) + " out of range");
    auto& slot = by_class[static_cast<std::size_t>(cb.label)];
    if (slot) throw ValidationError("class " + std::to_string(cb.label) + " supplied twice");
    slot = &cb;
  }
  GlobalDictionary dict;
  for (int l = 0; l < num_classes; ++l) {
    const auto* cb = by_class[static_cast<std::size_t>(l)];
    if (!cb) throw ValidationError("no codebook for class " + std::to_string(l));
    if (cb->codewords.empty())
      throw ValidationError("codebook for class " + std::to_string(l) + " is empty");
    for (const auto& c : cb->codewords) {
      if (!dict.codewords.empty() && c.vector.size() != dict.codewords.cols())
        throw ValidationError("codeword dimension mismatch in class " + std::to_string(l));
      dict.codewords.append_row(c.vector);
      dict.labels.push_back(l);
      dict.ranks.push_back(c.rank);
      dict.entropies.push_back(c.entropy);
      dict.tfidfs.push_back(c.tfidf);
    }
    dict.per_class_counts.push_back(cb->codewords.size());
  }
  return dict;
}

}  // namespace ddl::dictionary
