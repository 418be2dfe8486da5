#include <charconv>
#include <fstream>
#include <sstream>

#include "ddl/pipeline.hpp"

namespace ddl::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string fmt_opt(const std::optional<T>& v) {
  if (!v) return "auto";
  if constexpr (std::is_floating_point_v<T>)
    return fmt(*v);
  else
    return std::to_string(*v);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

bool is_auto(const std::string& v) { return v.empty() || v == "auto" || v == "none"; }

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "train_manifest",  "test_manifest",   "synth_spec",        "mode",
      "bandwidth_m",     "entity_bandwidth_m", "rank_neighbors", "rank_w1",
      "rank_h_floor",    "ds_sigma",        "ds_theta",          "ds_full_graph",
      "llc_k",           "llc_lambda",      "gmm_k",             "gmm_raw_descriptors",
      "forest_trees",    "forest_min_leaf", "forest_max_depth",  "forest_criterion",
      "seed",            "lp_fraction",     "lp_sigma",          "lp_tol",
      "lp_max_iter",     "disable_ranking", "fixed_top_b",       "disable_labelprop",
      "threads",         "run_dir"};
  return keys;
}

void set_config_key(PipelineConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "train_manifest") c.train_manifest = v;
  else if (key == "test_manifest") c.test_manifest = v;
  else if (key == "synth_spec") c.synth_spec = v;
  else if (key == "mode") c.mode = encoding::parse_kind(v);
  else if (key == "bandwidth_m") c.bandwidth_m = parse_double(key, v);
  else if (key == "entity_bandwidth_m")
    c.entity_bandwidth_m = is_auto(v) ? std::nullopt : std::optional(parse_double(key, v));
  else if (key == "rank_neighbors") c.ranking.neighbors = parse_u64(key, v);
  else if (key == "rank_w1") c.ranking.w1 = parse_double(key, v);
  else if (key == "rank_h_floor") c.ranking.h_floor = parse_double(key, v);
  else if (key == "ds_sigma")
    c.dominant_set.sigma = is_auto(v) ? std::nullopt : std::optional(parse_double(key, v));
  else if (key == "ds_theta") c.dominant_set.support_threshold = parse_double(key, v);
  else if (key == "ds_full_graph") c.dominant_set.full_graph = parse_bool(key, v);
  else if (key == "llc_k") c.llc.neighbors = parse_u64(key, v);
  else if (key == "llc_lambda") c.llc.ridge = parse_double(key, v);
  else if (key == "gmm_k") c.gmm_components = parse_u64(key, v);
  else if (key == "gmm_raw_descriptors") c.gmm_raw_descriptors = parse_bool(key, v);
  else if (key == "forest_trees") c.forest.n_trees = parse_u64(key, v);
  else if (key == "forest_min_leaf") c.forest.min_leaf = parse_u64(key, v);
  else if (key == "forest_max_depth")
    c.forest.max_depth = is_auto(v) ? std::nullopt : std::optional<std::size_t>(parse_u64(key, v));
  else if (key == "forest_criterion") {
    if (v == "entropy") c.forest.criterion = forest::Criterion::entropy;
    else if (v == "gini") c.forest.criterion = forest::Criterion::gini;
    else throw ConfigError("config key 'forest_criterion': expected entropy or gini");
  } else if (key == "seed") {
    c.seed = parse_u64(key, v);
    c.seed_given = true;
  } else if (key == "lp_fraction") c.labelprop.confident_fraction = parse_double(key, v);
  else if (key == "lp_sigma")
    c.labelprop.sigma = is_auto(v) ? std::nullopt : std::optional(parse_double(key, v));
  else if (key == "lp_tol") c.labelprop.tol = parse_double(key, v);
  else if (key == "lp_max_iter") c.labelprop.max_iter = static_cast<int>(parse_int(key, v));
  else if (key == "disable_ranking") c.disable_ranking = parse_bool(key, v);
  else if (key == "fixed_top_b")
    c.fixed_top_b = is_auto(v) ? std::nullopt : std::optional<std::size_t>(parse_u64(key, v));
  else if (key == "disable_labelprop") c.disable_labelprop = parse_bool(key, v);
  else if (key == "threads") c.threads = static_cast<int>(parse_int(key, v));
  else if (key == "run_dir") c.run_dir = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig cfg;
  for (const auto& [k, v] : read_key_values(path)) set_config_key(cfg, k, v);
  return cfg;
}

std::string to_text(const PipelineConfig& c) {
  std::ostringstream o;
  o << "train_manifest=" << c.train_manifest << '\n'
    << "test_manifest=" << c.test_manifest << '\n'
    << "synth_spec=" << c.synth_spec << '\n'
    << "mode=" << encoding::to_string(c.mode) << '\n'
    << "bandwidth_m=" << fmt(c.bandwidth_m) << '\n'
    << "entity_bandwidth_m=" << fmt_opt(c.entity_bandwidth_m) << '\n'
    << "rank_neighbors=" << c.ranking.neighbors << '\n'
    << "rank_w1=" << fmt(c.ranking.w1) << '\n'
    << "rank_h_floor=" << fmt(c.ranking.h_floor) << '\n'
    << "ds_sigma=" << fmt_opt(c.dominant_set.sigma) << '\n'
    << "ds_theta=" << fmt(c.dominant_set.support_threshold) << '\n'
    << "ds_full_graph=" << (c.dominant_set.full_graph ? "true" : "false") << '\n'
    << "llc_k=" << c.llc.neighbors << '\n'
    << "llc_lambda=" << fmt(c.llc.ridge) << '\n'
    << "gmm_k=" << c.gmm_components << '\n'
    << "gmm_raw_descriptors=" << (c.gmm_raw_descriptors ? "true" : "false") << '\n'
    << "forest_trees=" << c.forest.n_trees << '\n'
    << "forest_min_leaf=" << c.forest.min_leaf << '\n'
    << "forest_max_depth=" << fmt_opt(c.forest.max_depth) << '\n'
    << "forest_criterion=" << (c.forest.criterion == forest::Criterion::entropy ? "entropy" : "gini")
    << '\n'
    << "seed=" << c.seed << '\n'
    << "lp_fraction=" << fmt(c.labelprop.confident_fraction) << '\n'
    << "lp_sigma=" << fmt_opt(c.labelprop.sigma) << '\n'
    << "lp_tol=" << fmt(c.labelprop.tol) << '\n'
    << "lp_max_iter=" << c.labelprop.max_iter << '\n'
    << "disable_ranking=" << (c.disable_ranking ? "true" : "false") << '\n'
    << "fixed_top_b=" << fmt_opt(c.fixed_top_b) << '\n'
    << "disable_labelprop=" << (c.disable_labelprop ? "true" : "false") << '\n';
  return o.str();
}

void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.bandwidth_m >= 1.0 && c.bandwidth_m <= 10.0, "bandwidth_m must lie in [1, 10]");
  if (c.entity_bandwidth_m)
    require(*c.entity_bandwidth_m >= 1.0 && *c.entity_bandwidth_m <= 10.0,
            "entity_bandwidth_m must lie in [1, 10]");
  require(c.ranking.neighbors >= 1, "rank_neighbors must be at least 1");
  require(c.ranking.w1 >= 0.0 && c.ranking.w1 <= 1.0, "rank_w1 must lie in [0, 1]");
  require(c.ranking.h_floor > 0.0, "rank_h_floor must be positive");
  if (c.dominant_set.sigma) require(*c.dominant_set.sigma > 0.0, "ds_sigma must be positive");
  require(c.dominant_set.support_threshold > 0.0 && c.dominant_set.support_threshold < 1.0,
          "ds_theta must lie in (0, 1)");
  require(c.llc.neighbors >= 1, "llc_k must be at least 1");
  require(c.llc.ridge > 0.0, "llc_lambda must be positive");
  require(c.gmm_components >= 1, "gmm_k must be at least 1");
  require(c.forest.n_trees >= 1, "forest_trees must be at least 1");
  require(c.forest.min_leaf >= 1, "forest_min_leaf must be at least 1");
  require(c.labelprop.confident_fraction > 0.0 && c.labelprop.confident_fraction <= 1.0,
          "lp_fraction must lie in (0, 1]");
  if (c.labelprop.sigma) require(*c.labelprop.sigma > 0.0, "lp_sigma must be positive");
  require(c.labelprop.tol > 0.0, "lp_tol must be positive");
  require(c.labelprop.max_iter >= 1, "lp_max_iter must be at least 1");
  if (c.fixed_top_b) require(*c.fixed_top_b >= 1, "fixed_top_b must be at least 1");
  require(!(c.disable_ranking && c.fixed_top_b), "disable_ranking and fixed_top_b are exclusive");
}

}  // namespace ddl::pipeline
