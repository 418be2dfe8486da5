#ifndef DDL_PIPELINE_HPP
#define DDL_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddl/codebook.hpp"
#include "ddl/core.hpp"
#include "ddl/dictionary.hpp"
#include "ddl/encoding.hpp"
#include "ddl/forest.hpp"
#include "ddl/labelprop.hpp"

namespace ddl::pipeline {

// ---- Synthetic data ----

/// Per class, `signal_modes` centers are drawn uniformly in
/// [-center_scale, center_scale]^dim, pairwise at least `separation` apart
/// across all classes. An entity holds `signal_per_entity` descriptors around
/// its class's centers (isotropic noise `signal_noise`) plus
/// `background_per_entity` descriptors from one wide Gaussian N(0,
/// background_scale^2 I) shared by every class.
struct SynthSpec {
  int classes = 5;
  int train_per_class = 20;
  int test_per_class = 10;
  int signal_modes = 3;
  int signal_per_entity = 20;
  int background_per_entity = 40;
  std::size_t dim = 16;
  double separation = 6.0;
  double center_scale = 10.0;
  double signal_noise = 0.5;
  double background_scale = 6.0;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

/// Entities come out in a seeded random order. Deterministic given spec.seed. Throws ParameterError when the centers
/// cannot be placed at the requested separation.
std::pair<DescriptorDataset, DescriptorDataset> generate_synthetic(const SynthSpec& spec);

SynthSpec load_synth_spec(const std::filesystem::path& path);
void set_synth_key(SynthSpec& spec, const std::string& key, const std::string& value);

// ---- Configuration ----

struct PipelineConfig {
  std::string train_manifest;
  std::string test_manifest;
  std::string synth_spec;  // used when no manifests are given

  encoding::Kind mode = encoding::Kind::llc;
  double bandwidth_m = 5.0;
  std::optional<double> entity_bandwidth_m;  // defaults to bandwidth_m

  dictionary::RankingParams ranking;
  dictionary::DominantSetParams dominant_set;

  encoding::LlcParams llc;
  std::size_t gmm_components = 100;
  bool gmm_raw_descriptors = false;

  forest::ForestParams forest;
  std::uint64_t seed = 0;
  bool seed_given = false;

  labelprop::AffinityConfig labelprop;

  bool disable_ranking = false;
  std::optional<std::size_t> fixed_top_b;
  bool disable_labelprop = false;

  int threads = 0;  // 0: runtime default
  std::string run_dir;
};

/// All keys accepted by config files and their CLI flags (`--key-name`
/// spelling with dashes), in a stable order.
const std::vector<std::string>& config_keys();

/// Throws ConfigError naming the key on unknown keys or bad values.
void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key=value` lines; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical `key=value` rendering of every field (run_dir and threads
/// excluded so identical runs serialize identically).
std::string to_text(const PipelineConfig& cfg);

/// Range checks from every module. Throws ConfigError.
void validate(const PipelineConfig& cfg);

// ---- Metrics ----

struct Metrics {
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // truth x predicted
  std::vector<std::size_t> dictionary_sizes;
  double forest_accuracy = 0.0;
  std::map<std::string, double> stage_seconds;  // not serialized with metrics
};

/// Throws ValidationError on length mismatch, empty input or labels outside
/// [0, n_classes).
Metrics evaluate(std::span<const int> predicted, std::span<const int> truth, int n_classes);

/// Deterministic rendering (no timings).
std::string to_text(const Metrics& m);

// ---- Stages ----

enum class Stage { dictionary, encode, train, predict, refine };
Stage parse_stage(const std::string& s);
const char* to_string(Stage s);

struct DictionaryArtifacts {
  GlobalDictionary dictionary;
  std::optional<encoding::GmmModel> gmm;
  std::size_t unfiltered_size = 0;  // temporary codewords before selection
};

/// Entity- and category-level mean-shift, ranking and selection (per the
/// ablation flags), assembly; in fisher mode also the GMM.
DictionaryArtifacts build_dictionary(const PipelineConfig& cfg, const DescriptorDataset& train);

encoding::EncoderModel make_encoder(const PipelineConfig& cfg, const DictionaryArtifacts& dict);

/// Rounds every value to float32 precision, the precision artifacts are
/// stored in, so resumed runs see exactly what a fresh run saw.
void round_to_storage(std::vector<double>& values);

struct RunResult {
  Metrics metrics;
  DictionaryArtifacts dictionary;
  std::vector<encoding::EncodedSample> train_encoded;
  std::vector<encoding::EncodedSample> test_encoded;
  forest::ForestModel forest;
  std::vector<forest::Prediction> forest_predictions;
  labelprop::Refinement refinement;
  std::vector<int> refined_labels;
};

/// Runs stages `from` through `until` on in-memory datasets. When
/// cfg.run_dir is set every stage's output is persisted there, and stages
/// before `from` are reloaded from it. Metrics are filled only when `until`
/// is the last stage. Failures are rethrown as StageError naming the stage.
RunResult run_pipeline(const PipelineConfig& cfg, const DescriptorDataset& train,
                       const DescriptorDataset& test, Stage from = Stage::dictionary,
                       Stage until = Stage::refine);

/// Loads or synthesizes the datasets named by the config, then runs.
RunResult run_pipeline(const PipelineConfig& cfg, Stage from = Stage::dictionary,
                       Stage until = Stage::refine);

std::pair<DescriptorDataset, DescriptorDataset> load_datasets(const PipelineConfig& cfg);

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& cause)
      : Error(std::string("[") + to_string(stage) + "] " + cause), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

// ---- Prediction files ----

/// `<entity_id>\t<label>\t<confidence>\t<votes comma-separated>`.
void save_forest_predictions(const std::filesystem::path& path,
                             std::span<const encoding::EncodedSample> samples,
                             std::span<const forest::Prediction> preds);
std::vector<forest::Prediction> load_forest_predictions(const std::filesystem::path& path);

/// `<entity_id>\t<forest_label>\t<confidence>\t<refined_label>`.
void save_refined(const std::filesystem::path& path,
                  std::span<const encoding::EncodedSample> samples,
                  std::span<const labelprop::RefinedPrediction> refined);

struct RefinedRow {
  std::string entity_id;
  int forest_label = 0;
  double confidence = 0.0;
  int refined_label = 0;
};
std::vector<RefinedRow> load_refined(const std::filesystem::path& path);

}  // namespace ddl::pipeline

#endif  // DDL_PIPELINE_HPP
