#include <cmath>
#include <string>

#include "ddl/knn.hpp"
#include "ddl/pipeline.hpp"
#include "ddl/rng.hpp"

namespace ddl::pipeline {

namespace {
constexpr int kPlacementAttempts = 10000;
constexpr std::uint64_t kOrderStream = 0x3c6ef372fe94f82bULL;
}

void validate(const SynthSpec& s) {
  if (s.classes < 2) throw ParameterError("synth: need at least 2 classes");
  if (s.train_per_class < 1 || s.test_per_class < 1 || s.signal_modes < 1 ||
      s.signal_per_entity < 1 || s.background_per_entity < 0 || s.dim < 1)
    throw ParameterError("synth: counts must be at least 1");
  if (!(s.separation > 0.0)) throw ParameterError("synth: separation must be positive");
  if (!(s.center_scale > 0.0)) throw ParameterError("synth: center scale must be positive");
  if (!(s.signal_noise >= 0.0) || !(s.background_scale >= 0.0))
    throw ParameterError("synth: noise scales must be non-negative");
}

std::pair<DescriptorDataset, DescriptorDataset> generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t d = spec.dim;

  // Mode centers, rejection-sampled to respect the separation.
  Matrix centers;
  const double sep2 = spec.separation * spec.separation;
  Vector c(d);
  for (int m = 0; m < spec.classes * spec.signal_modes; ++m) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      for (double& v : c) v = rng.uniform(-spec.center_scale, spec.center_scale);
      placed = true;
      for (std::size_t j = 0; j < centers.rows() && placed; ++j)
        placed = squared_distance(c, centers.row(j)) >= sep2;
    }
    if (!placed)
      throw ParameterError("synth: cannot place " +
                           std::to_string(spec.classes * spec.signal_modes) +
                           " mode centers " + std::to_string(spec.separation) +
                           " apart in dimension " + std::to_string(d) + " within scale " +
                           std::to_string(spec.center_scale));
    centers.append_row(c);
  }

  auto make_entity = [&](int label, const std::string& id) {
    Entity e;
    e.id = id;
    e.label = label;
    e.descriptors = Matrix(static_cast<std::size_t>(spec.signal_per_entity + spec.background_per_entity), d);
    std::size_t r = 0;
    for (int k = 0; k < spec.signal_per_entity; ++k, ++r) {
      const auto mode = static_cast<std::size_t>(label * spec.signal_modes) +
                        static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(spec.signal_modes)));
      const auto ctr = centers.row(mode);
      auto row = e.descriptors.row(r);
      for (std::size_t j = 0; j < d; ++j)
        row[j] = spec.signal_noise > 0.0 ? rng.normal(ctr[j], spec.signal_noise) : ctr[j];
    }
    for (int k = 0; k < spec.background_per_entity; ++k, ++r) {
      auto row = e.descriptors.row(r);
      for (std::size_t j = 0; j < d; ++j) row[j] = rng.normal(0.0, spec.background_scale);
    }
    // Stored precision.
    for (double& v : e.descriptors.data()) v = static_cast<double>(static_cast<float>(v));
    return e;
  };

  DescriptorDataset train{{}, spec.classes, d, Split::train};
  DescriptorDataset test{{}, spec.classes, d, Split::test};
  for (int l = 0; l < spec.classes; ++l)
    for (int i = 0; i < spec.train_per_class; ++i)
      train.entities.push_back(make_entity(l, "train_c" + std::to_string(l) + "_" + std::to_string(i)));
  for (int l = 0; l < spec.classes; ++l)
    for (int i = 0; i < spec.test_per_class; ++i)
      test.entities.push_back(make_entity(l, "test_c" + std::to_string(l) + "_" + std::to_string(i)));
  // Emit entities in a seeded random order so position carries no label
  // information; confidence ties downstream are broken by position.
  Rng order_rng(spec.seed ^ kOrderStream);
  for (auto* ds : {&train, &test}) {
    auto& e = ds->entities;
    for (std::size_t i = e.size(); i > 1; --i) std::swap(e[i - 1], e[order_rng.below(i)]);
  }
  return {std::move(train), std::move(test)};
}

void set_synth_key(SynthSpec& spec, const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    auto as_int = [&] {
      const int v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    };
    auto as_double = [&] {
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    };
    if (key == "classes") spec.classes = as_int();
    else if (key == "train_per_class") spec.train_per_class = as_int();
    else if (key == "test_per_class") spec.test_per_class = as_int();
    else if (key == "signal_modes") spec.signal_modes = as_int();
    else if (key == "signal_per_entity") spec.signal_per_entity = as_int();
    else if (key == "background_per_entity") spec.background_per_entity = as_int();
    else if (key == "dim") spec.dim = static_cast<std::size_t>(as_int());
    else if (key == "separation") spec.separation = as_double();
    else if (key == "center_scale") spec.center_scale = as_double();
    else if (key == "signal_noise") spec.signal_noise = as_double();
    else if (key == "background_scale") spec.background_scale = as_double();
    else if (key == "seed") {
      spec.seed = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } else {
      throw ConfigError("unknown synth key '" + key + "'");
    }
  } catch (const std::logic_error&) {
    throw ConfigError("synth key '" + key + "': bad value '" + value + "'");
  }
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  SynthSpec spec;
  for (const auto& [k, v] : read_key_values(path)) set_synth_key(spec, k, v);
  validate(spec);
  return spec;
}

}  // namespace ddl::pipeline
