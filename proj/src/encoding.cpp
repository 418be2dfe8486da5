#include "ddl/encoding.hpp"

#include <cmath>

#include "ddl/io.hpp"
#include "ddl/parallel.hpp"

namespace ddl::encoding {

const char* to_string(Kind kind) { return kind == Kind::llc ? "llc" : "fisher"; }

Kind parse_kind(const std::string& s) {
  if (s == "llc") return Kind::llc;
  if (s == "fisher") return Kind::fisher;
  throw ConfigError("unknown encoding '" + s + "' (expected llc or fisher)");
}

std::vector<EncodedSample> encode_dataset(const DescriptorDataset& ds, const EncoderModel& model) {
  if (model.kind == Kind::llc && !model.dictionary)
    throw ConfigError("llc encoding requested without a dictionary");
  if (model.kind == Kind::fisher && !model.gmm)
    throw ConfigError("fisher encoding requested without a gmm");
  const std::size_t model_dim =
      model.kind == Kind::llc ? model.dictionary->cols() : model.gmm->dim();
  if (model_dim != ds.dim)
    throw ConfigError("encoder dimension " + std::to_string(model_dim) +
                      " does not match dataset dimension " + std::to_string(ds.dim));

  std::vector<EncodedSample> out(ds.entities.size());
  parallel_for(ds.entities.size(), [&](std::size_t i) {
    const Entity& e = ds.entities[i];
    EncodedSample s;
    s.entity_id = e.id;
    s.label = e.label;
    s.kind = model.kind;
    s.features = model.kind == Kind::llc
                     ? llc_encode_entity(e.descriptors, *model.dictionary, model.llc)
                     : fisher_vector(e.descriptors, *model.gmm);
    for (double v : s.features)
      if (!std::isfinite(v)) throw NumericError("non-finite encoding for entity '" + e.id + "'");
    out[i] = std::move(s);
  });
  return out;
}

void save_encoded(std::span<const EncodedSample> samples, int num_classes,
                  const std::filesystem::path& stem) {
  Matrix rows;
  for (const auto& s : samples) rows.append_row(s.features);
  auto bin = stem;
  bin += ".bin";
  auto manifest_path = stem;
  manifest_path += ".manifest";
  write_descriptor_file(bin, rows);
  Manifest m;
  m.dim = rows.cols();
  m.num_classes = num_classes;
  for (const auto& s : samples) m.entries.push_back({s.entity_id, s.label, bin.filename().string()});
  write_manifest(manifest_path, m);
}

EncodedSet load_encoded(const std::filesystem::path& stem, Kind kind) {
  auto manifest_path = stem;
  manifest_path += ".manifest";
  const Manifest m = read_manifest(manifest_path);
  if (m.entries.empty()) return {{}, m.num_classes};
  const auto rows = read_descriptor_file(manifest_path.parent_path() / m.entries.front().path);
  if (rows.rows() != m.entries.size())
    throw ValidationError("encoded manifest lists " + std::to_string(m.entries.size()) +
                          " entities but " + std::to_string(rows.rows()) + " rows are stored");
  if (rows.cols() != m.dim) throw ValidationError("encoded feature length disagrees with manifest");
  EncodedSet set;
  set.num_classes = m.num_classes;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    if (e.label < 0 || e.label >= m.num_classes)
      throw ValidationError("encoded entity '" + e.id + "' has label out of range");
    const auto r = rows.row(i);
    set.samples.push_back({Vector(r.begin(), r.end()), e.label, e.id, kind});
  }
  return set;
}

}  // namespace ddl::encoding
