// ddl: command-line driver for the dictionary-learning pipeline.
//
//   ddl synth --spec spec.txt --seed 7 --out data/
//   ddl run --config run.cfg --seed 7 [--run-dir run/x] [--threads 4]
//   ddl build-dict|encode|train|predict|refine --run-dir run/x [flags]
//   ddl eval --run-dir run/x
//
// Every config key is also a flag (`rank_w1` -> `--rank-w1`); flags win over
// the config file.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>

#include "ddl/encoding.hpp"
#include "ddl/io.hpp"
#include "ddl/parallel.hpp"
#include "ddl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ddl;

namespace {

std::string flag_name(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

std::string timestamp_dir() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return (fs::path("run") / buf).string();
}

// Config flags shared by the pipeline subcommands.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;  // key -> raw flag text

  void attach(CLI::App& app, bool seed_required) {
    app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    for (const auto& key : pipeline::config_keys()) {
      auto* opt = app.add_option_function<std::string>(
          flag_name(key), [this, key](const std::string& v) { values[key] = v; },
          "config key " + key);
      if (key == "seed" && seed_required) opt->required();
    }
  }

  // Config file (or the run directory's stored config when `inherit`), then
  // flags on top.
  pipeline::PipelineConfig resolve(bool inherit) const {
    pipeline::PipelineConfig cfg;
    if (!config_path.empty()) {
      cfg = pipeline::load_config(config_path);
    } else if (inherit) {
      const auto it = values.find("run_dir");
      if (it != values.end() && fs::exists(fs::path(it->second) / "config.txt"))
        cfg = pipeline::load_config(fs::path(it->second) / "config.txt");
    }
    for (const auto& [k, v] : values) pipeline::set_config_key(cfg, k, v);
    return cfg;
  }
};

int report(const std::exception& e) {
  std::cerr << "ddl: error: " << e.what() << '\n';
  return 1;
}

int run_stages(const ConfigFlags& flags, pipeline::Stage from, pipeline::Stage until,
               bool default_run_dir) {
  auto cfg = flags.resolve(from != pipeline::Stage::dictionary);
  if (cfg.run_dir.empty()) {
    if (!default_run_dir) throw ConfigError("--run-dir is required for this subcommand");
    cfg.run_dir = timestamp_dir();
  }
  const auto res = pipeline::run_pipeline(cfg, from, until);
  std::cerr << "ddl: artifacts in " << cfg.run_dir << '\n';
  if (until == pipeline::Stage::refine) std::cout << pipeline::to_text(res.metrics);
  return 0;
}

// Truth labels come from the encoded test manifest, keyed by entity id.
int evaluate_run(const fs::path& run_dir, const std::string& predictions_path) {
  const fs::path pred_path = predictions_path.empty() ? run_dir / "predictions.tsv" : fs::path(predictions_path);
  const auto rows = pipeline::load_refined(pred_path);
  const auto manifest = read_manifest(run_dir / "encoded_test.manifest");
  std::unordered_map<std::string, int> truth_of;
  for (const auto& e : manifest.entries) truth_of[e.id] = e.label;

  std::vector<int> predicted, truth, forest;
  for (const auto& r : rows) {
    const auto it = truth_of.find(r.entity_id);
    if (it == truth_of.end())
      throw ValidationError("prediction for unknown entity '" + r.entity_id + "'");
    predicted.push_back(r.refined_label);
    forest.push_back(r.forest_label);
    truth.push_back(it->second);
  }
  auto m = pipeline::evaluate(predicted, truth, manifest.num_classes);
  m.forest_accuracy = pipeline::evaluate(forest, truth, manifest.num_classes).overall_accuracy;
  std::cout << pipeline::to_text(m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative dictionary learning pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic train/test dataset");
  std::string spec_path, out_dir;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", spec_path, "synthetic spec file (key=value)")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "generator seed")->required();
  synth->add_option("--out", out_dir, "output directory")->required();

  // run and the single-stage subcommands
  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "full pipeline, or resume with --from");
  run_flags.attach(*run, true);
  std::string from_stage = "dictionary";
  run->add_option("--from", from_stage, "first stage to execute; earlier ones are reloaded");

  struct StageCommand {
    const char* name;
    const char* help;
    pipeline::Stage stage;
    CLI::App* app = nullptr;
    ConfigFlags flags;
  };
  std::vector<StageCommand> stage_cmds;
  stage_cmds.push_back({"build-dict", "mean-shift, ranking and selection", pipeline::Stage::dictionary});
  stage_cmds.push_back({"encode", "encode train and test entities", pipeline::Stage::encode});
  stage_cmds.push_back({"train", "train the random forest", pipeline::Stage::train});
  stage_cmds.push_back({"predict", "forest predictions for the test set", pipeline::Stage::predict});
  stage_cmds.push_back({"refine", "label-propagation refinement and metrics", pipeline::Stage::refine});
  for (auto& sc : stage_cmds) {
    sc.app = app.add_subcommand(sc.name, sc.help);
    sc.flags.attach(*sc.app, false);
  }

  // eval
  auto* eval = app.add_subcommand("eval", "recompute metrics from a run directory");
  std::string eval_dir, eval_predictions;
  eval->add_option("--run-dir", eval_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--predictions", eval_predictions, "predictions.tsv (default: in run dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) set_num_threads(threads);

    if (synth->parsed()) {
      pipeline::SynthSpec spec = spec_path.empty() ? pipeline::SynthSpec{} : pipeline::load_synth_spec(spec_path);
      spec.seed = synth_seed;
      const auto [train, test] = pipeline::generate_synthetic(spec);
      const fs::path out(out_dir);
      fs::create_directories(out);
      save_dataset(train, out / "train.manifest", out / "train");
      save_dataset(test, out / "test.manifest", out / "test");
      std::cout << (out / "train.manifest").string() << '\n' << (out / "test.manifest").string() << '\n';
      return 0;
    }
    if (run->parsed()) {
      if (threads > 0 && !run_flags.values.count("threads")) run_flags.values["threads"] = std::to_string(threads);
      return run_stages(run_flags, pipeline::parse_stage(from_stage), pipeline::Stage::refine, true);
    }
    for (auto& sc : stage_cmds) {
      if (!sc.app->parsed()) continue;
      if (threads > 0 && !sc.flags.values.count("threads")) sc.flags.values["threads"] = std::to_string(threads);
      return run_stages(sc.flags, sc.stage, sc.stage, sc.stage == pipeline::Stage::dictionary);
    }
    if (eval->parsed()) return evaluate_run(eval_dir, eval_predictions);
  } catch (const pipeline::StageError& e) {
    return report(e);
  } catch (const ConfigError& e) {
    std::cerr << "ddl: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    return report(e);
  }
  return 0;
}
