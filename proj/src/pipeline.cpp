#include "ddl/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ddl/io.hpp"
#include "ddl/meanshift.hpp"
#include "ddl/parallel.hpp"
#include "ddl/rng.hpp"

namespace ddl::pipeline {

namespace fs = std::filesystem;

namespace {

// Salts for the streams derived from the run seed.
constexpr std::uint64_t kGmmStream = 0x474d4d5f73656564ULL;

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

// ---- Metrics ----

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth, int n_classes) {
  if (predicted.size() != truth.size())
    throw ValidationError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(truth.size()) + " ground-truth labels");
  if (truth.empty()) throw ValidationError("evaluate: no predictions");
  if (n_classes < 1) throw ValidationError("evaluate: need at least one class");
  const auto L = static_cast<std::size_t>(n_classes);
  Metrics m;
  m.confusion.assign(L, std::vector<std::size_t>(L, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes)
      throw ValidationError("evaluate: label out of range at position " + std::to_string(i));
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.per_class_accuracy.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    const auto total = std::accumulate(m.confusion[l].begin(), m.confusion[l].end(), std::size_t{0});
    if (total) m.per_class_accuracy[l] = static_cast<double>(m.confusion[l][l]) / static_cast<double>(total);
  }
  return m;
}

std::string to_text(const Metrics& m) {
  std::ostringstream o;
  auto join = [&](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ',';
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(xs[i])>>)
        s += fmt(xs[i]);
      else
        s += std::to_string(xs[i]);
    }
    return s;
  };
  o << "overall_accuracy=" << fmt(m.overall_accuracy) << '\n'
    << "forest_accuracy=" << fmt(m.forest_accuracy) << '\n'
    << "per_class_accuracy=" << join(m.per_class_accuracy) << '\n';
  for (std::size_t l = 0; l < m.confusion.size(); ++l)
    o << "confusion_row_" << l << '=' << join(m.confusion[l]) << '\n';
  o << "dictionary_sizes=" << join(m.dictionary_sizes) << '\n'
    << "dictionary_total="
    << std::accumulate(m.dictionary_sizes.begin(), m.dictionary_sizes.end(), std::size_t{0})
    << '\n';
  return o.str();
}

// ---- Stages ----

Stage parse_stage(const std::string& s) {
  if (s == "dictionary" || s == "build-dict") return Stage::dictionary;
  if (s == "encode") return Stage::encode;
  if (s == "train") return Stage::train;
  if (s == "predict") return Stage::predict;
  if (s == "refine") return Stage::refine;
  throw ConfigError("unknown stage '" + s + "'");
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::dictionary: return "dictionary";
    case Stage::encode: return "encode";
    case Stage::train: return "train";
    case Stage::predict: return "predict";
    case Stage::refine: return "refine";
  }
  return "?";
}

void round_to_storage(std::vector<double>& values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

DictionaryArtifacts build_dictionary(const PipelineConfig& cfg, const DescriptorDataset& train) {
  validate(train);
  const double entity_m = cfg.entity_bandwidth_m.value_or(cfg.bandwidth_m);
  const auto reduced = meanshift::reduce_entities(train.entities, entity_m);

  std::vector<CategoryCodebook> temporary;
  for (int l = 0; l < train.num_classes; ++l) {
    std::vector<Entity> members;
    for (const auto& e : reduced)
      if (e.label == l) members.push_back(e);
    temporary.push_back(meanshift::build_category_codebook(members, l, cfg.bandwidth_m));
  }

  DictionaryArtifacts out;
  for (const auto& cb : temporary) out.unfiltered_size += cb.size();

  std::vector<CategoryCodebook> selected;
  if (cfg.disable_ranking) {
    selected = temporary;
  } else {
    const auto ranked = dictionary::rank_codebooks(temporary, cfg.ranking);
    selected.resize(ranked.size());
    parallel_for(ranked.size(), [&](std::size_t l) {
      selected[l] = cfg.fixed_top_b ? dictionary::select_top(ranked[l], *cfg.fixed_top_b)
                                    : dictionary::select_adaptive(ranked[l], cfg.dominant_set);
    });
  }
  out.dictionary = dictionary::build_global_dictionary(selected, train.num_classes);
  round_to_storage(out.dictionary.codewords.data());

  if (cfg.mode == encoding::Kind::fisher) {
    Matrix pool;
    for (const auto& e : cfg.gmm_raw_descriptors ? train.entities : reduced)
      for (std::size_t r = 0; r < e.descriptors.rows(); ++r) pool.append_row(e.descriptors.row(r));
    encoding::GmmParams gp;
    gp.components = cfg.gmm_components;
    gp.seed = mix_seed(cfg.seed ^ kGmmStream);
    out.gmm = encoding::fit_gmm(pool, gp).model;
  }
  return out;
}

encoding::EncoderModel make_encoder(const PipelineConfig& cfg, const DictionaryArtifacts& dict) {
  encoding::EncoderModel model;
  model.kind = cfg.mode;
  model.llc = cfg.llc;
  if (cfg.mode == encoding::Kind::llc) {
    model.dictionary = dict.dictionary.codewords;
    model.llc.neighbors = std::min(cfg.llc.neighbors, dict.dictionary.size());
  } else {
    if (!dict.gmm) throw ConfigError("fisher encoding requested without a gmm");
    model.gmm = dict.gmm;
  }
  return model;
}

std::pair<DescriptorDataset, DescriptorDataset> load_datasets(const PipelineConfig& cfg) {
  if (!cfg.train_manifest.empty() || !cfg.test_manifest.empty()) {
    if (cfg.train_manifest.empty() || cfg.test_manifest.empty())
      throw ConfigError("both train_manifest and test_manifest are required");
    return {load_dataset(cfg.train_manifest, Split::train),
            load_dataset(cfg.test_manifest, Split::test)};
  }
  if (!cfg.synth_spec.empty()) {
    SynthSpec spec = load_synth_spec(cfg.synth_spec);
    spec.seed = cfg.seed;
    return generate_synthetic(spec);
  }
  throw ConfigError("no data: set train_manifest/test_manifest or synth_spec");
}

// ---- Prediction files ----

void save_forest_predictions(const fs::path& path, std::span<const encoding::EncodedSample> samples,
                             std::span<const forest::Prediction> preds) {
  if (samples.size() != preds.size()) throw ValidationError("predictions and samples disagree");
  std::ostringstream o;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    o << samples[i].entity_id << '\t' << preds[i].label << '\t' << fmt(preds[i].confidence) << '\t';
    for (std::size_t c = 0; c < preds[i].votes.size(); ++c) o << (c ? "," : "") << preds[i].votes[c];
    o << '\n';
  }
  write_text(path, o.str());
}

std::vector<forest::Prediction> load_forest_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<forest::Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw FormatError("expected 4 fields in " + path.string(), lineno);
    forest::Prediction p;
    try {
      p.label = std::stoi(f[1]);
      std::uint64_t total = 0;
      for (const auto& v : split(f[3], ',')) {
        p.votes.push_back(static_cast<std::uint32_t>(std::stoul(v)));
        total += p.votes.back();
      }
      if (p.label < 0 || static_cast<std::size_t>(p.label) >= p.votes.size() || total == 0)
        throw std::invalid_argument("votes");
      p.confidence = static_cast<double>(p.votes[static_cast<std::size_t>(p.label)]) /
                     static_cast<double>(total);
    } catch (const std::logic_error&) {
      throw FormatError("malformed prediction in " + path.string(), lineno);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_refined(const fs::path& path, std::span<const encoding::EncodedSample> samples,
                  std::span<const labelprop::RefinedPrediction> refined) {
  if (samples.size() != refined.size()) throw ValidationError("refined labels and samples disagree");
  std::ostringstream o;
  for (std::size_t i = 0; i < refined.size(); ++i)
    o << samples[i].entity_id << '\t' << refined[i].forest_label << '\t'
      << fmt(refined[i].confidence) << '\t' << refined[i].refined_label << '\n';
  write_text(path, o.str());
}

std::vector<RefinedRow> load_refined(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<RefinedRow> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw FormatError("expected 4 fields in " + path.string(), lineno);
    try {
      out.push_back({f[0], std::stoi(f[1]), std::stod(f[2]), std::stoi(f[3])});
    } catch (const std::logic_error&) {
      throw FormatError("malformed refined prediction in " + path.string(), lineno);
    }
  }
  return out;
}

// ---- Orchestration ----

namespace {

class StageRunner {
 public:
  explicit StageRunner(Metrics& metrics) : metrics_(metrics) {}

  template <typename F>
  auto operator()(Stage stage, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(stage, t0);
      } else {
        auto r = body();
        record(stage, t0);
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void record(Stage stage, std::chrono::steady_clock::time_point t0) {
    metrics_.stage_seconds[to_string(stage)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  Metrics& metrics_;
};

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg, const DescriptorDataset& train,
                       const DescriptorDataset& test, Stage from, Stage until) {
  validate(cfg);
  if (until < from) throw ConfigError("last stage precedes the first");
  if (train.num_classes != test.num_classes || train.dim != test.dim)
    throw ValidationError("train and test datasets disagree on classes or dimension");
  if (cfg.threads > 0) set_num_threads(cfg.threads);

  const bool persist = !cfg.run_dir.empty();
  const fs::path dir = cfg.run_dir;
  if (persist) {
    fs::create_directories(dir);
    write_text(dir / "config.txt", to_text(cfg));
  } else if (from != Stage::dictionary) {
    throw ConfigError("resuming requires a run directory");
  }
  const int L = train.num_classes;

  RunResult res;
  Metrics timing;
  StageRunner stage(timing);

  res.dictionary = stage(Stage::dictionary, [&] {
    DictionaryArtifacts d;
    if (from <= Stage::dictionary) {
      d = build_dictionary(cfg, train);
      if (persist) {
        save_dictionary(d.dictionary, dir / "dictionary.bin", dir / "dictionary.meta");
        write_text(dir / "dictionary.info", "unfiltered_size=" + std::to_string(d.unfiltered_size) + "\n");
        if (d.gmm) encoding::save_gmm(*d.gmm, dir / "gmm.bin");
      }
    } else {
      d.dictionary = load_dictionary(dir / "dictionary.bin", dir / "dictionary.meta", L);
      for (const auto& [k, v] : read_key_values(dir / "dictionary.info"))
        if (k == "unfiltered_size") d.unfiltered_size = std::stoull(v);
      if (cfg.mode == encoding::Kind::fisher) d.gmm = encoding::load_gmm(dir / "gmm.bin");
    }
    return d;
  });
  if (until == Stage::dictionary) return res;

  stage(Stage::encode, [&] {
    if (from <= Stage::encode) {
      const auto model = make_encoder(cfg, res.dictionary);
      res.train_encoded = encoding::encode_dataset(train, model);
      res.test_encoded = encoding::encode_dataset(test, model);
      for (auto& s : res.train_encoded) round_to_storage(s.features);
      for (auto& s : res.test_encoded) round_to_storage(s.features);
      if (persist) {
        encoding::save_encoded(res.train_encoded, L, dir / "encoded_train");
        encoding::save_encoded(res.test_encoded, L, dir / "encoded_test");
      }
    } else {
      res.train_encoded = encoding::load_encoded(dir / "encoded_train", cfg.mode).samples;
      res.test_encoded = encoding::load_encoded(dir / "encoded_test", cfg.mode).samples;
    }
  });
  if (until == Stage::encode) return res;

  res.forest = stage(Stage::train, [&] {
    if (from > Stage::train) return forest::load_forest(dir / "forest.bin");
    auto params = cfg.forest;
    params.seed = cfg.seed;
    auto model = forest::train_forest(res.train_encoded, L, params);
    if (persist) forest::save_forest(model, dir / "forest.bin");
    return model;
  });
  if (until == Stage::train) return res;

  res.forest_predictions = stage(Stage::predict, [&] {
    if (from > Stage::predict) {
      auto p = load_forest_predictions(dir / "forest_predictions.tsv");
      if (p.size() != res.test_encoded.size())
        throw ValidationError("stored forest predictions do not match the test set");
      return p;
    }
    auto p = forest::predict_dataset(res.forest, res.test_encoded);
    if (persist) save_forest_predictions(dir / "forest_predictions.tsv", res.test_encoded, p);
    return p;
  });
  if (until == Stage::predict) return res;

  stage(Stage::refine, [&] {
    if (cfg.disable_labelprop) {
      res.refinement.converged = true;
      for (const auto& p : res.forest_predictions)
        res.refinement.predictions.push_back({p.label, p.confidence, p.label, false});
    } else {
      res.refinement =
          labelprop::refine_predictions(res.test_encoded, res.forest_predictions, L, cfg.labelprop);
    }
    for (const auto& r : res.refinement.predictions) res.refined_labels.push_back(r.refined_label);
    if (persist) save_refined(dir / "predictions.tsv", res.test_encoded, res.refinement.predictions);
  });

  std::vector<int> truth, forest_labels;
  for (const auto& s : res.test_encoded) truth.push_back(s.label);
  for (const auto& p : res.forest_predictions) forest_labels.push_back(p.label);
  res.metrics = evaluate(res.refined_labels, truth, L);
  res.metrics.forest_accuracy = evaluate(forest_labels, truth, L).overall_accuracy;
  res.metrics.dictionary_sizes = res.dictionary.dictionary.per_class_counts;
  res.metrics.stage_seconds = timing.stage_seconds;

  if (persist) {
    write_text(dir / "metrics.txt", to_text(res.metrics));
    std::ostringstream t;
    for (const auto& [name, secs] : res.metrics.stage_seconds) t << name << '=' << fmt(secs) << '\n';
    write_text(dir / "timings.txt", t.str());
  }
  return res;
}

RunResult run_pipeline(const PipelineConfig& cfg, Stage from, Stage until) {
  validate(cfg);
  auto [train, test] = load_datasets(cfg);
  return run_pipeline(cfg, train, test, from, until);
}

}  // namespace ddl::pipeline
