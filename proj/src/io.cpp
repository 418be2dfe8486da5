#include "ddl/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace ddl {

namespace fs = std::filesystem;

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void validate(const DescriptorDataset& ds) {
  if (ds.num_classes < 2)
    throw ValidationError("dataset needs at least 2 classes, got " +
                          std::to_string(ds.num_classes));
  for (const auto& e : ds.entities) {
    if (e.label < 0 || e.label >= ds.num_classes)
      throw ValidationError("entity '" + e.id + "': label " + std::to_string(e.label) +
                            " out of range [0, " + std::to_string(ds.num_classes) + ")");
    if (e.descriptors.rows() == 0)
      throw ValidationError("entity '" + e.id + "' has no descriptors");
    if (e.descriptors.cols() != ds.dim)
      throw ValidationError("entity '" + e.id + "': dimension " +
                            std::to_string(e.descriptors.cols()) + " does not match dataset dim " +
                            std::to_string(ds.dim));
    for (double v : e.descriptors.data())
      if (!std::isfinite(v))
        throw ValidationError("entity '" + e.id + "' contains a non-finite value");
  }
}

std::vector<const Entity*> entities_of_class(const DescriptorDataset& ds, int label) {
  std::vector<const Entity*> out;
  for (const auto& e : ds.entities)
    if (e.label == label) out.push_back(&e);
  return out;
}

Matrix read_descriptor_file(const fs::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kDescriptorMagic);
  const auto version = in.get<std::uint32_t>();
  if (version != kDescriptorVersion)
    throw FormatError("unsupported descriptor file version " + std::to_string(version) + " in " +
                      path.string());
  const auto rows = in.get<std::uint32_t>();
  const auto dim = in.get<std::uint32_t>();
  std::vector<float> raw(static_cast<std::size_t>(rows) * dim);
  in.bytes(raw.data(), raw.size() * sizeof(float));
  if (!in.at_end()) throw FormatError("trailing bytes in " + path.string());
  return Matrix(rows, dim, std::vector<double>(raw.begin(), raw.end()));
}

void write_descriptor_file(const fs::path& path, const Matrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("matrix too large for the descriptor format");
  detail::BinaryWriter out(path);
  out.bytes(kDescriptorMagic, 4);
  out.put<std::uint32_t>(kDescriptorVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  std::vector<float> raw(m.data().begin(), m.data().end());
  out.bytes(raw.data(), raw.size() * sizeof(float));
}

namespace {

// Parses "key=value" tokens of the manifest header.
void parse_header(const std::string& line, std::size_t lineno, Manifest& m) {
  std::istringstream ss(line.substr(1));
  std::string tok;
  bool have_dim = false, have_classes = false;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header token '" + tok + "'", lineno);
    const auto key = tok.substr(0, eq);
    const auto value = tok.substr(eq + 1);
    try {
      std::size_t used = 0;
      if (key == "dim") {
        const long v = std::stol(value, &used);
        if (v <= 0 || used != value.size()) throw std::invalid_argument(value);
        m.dim = static_cast<std::size_t>(v);
        have_dim = true;
      } else if (key == "classes") {
        const int v = std::stoi(value, &used);
        if (v <= 0 || used != value.size()) throw std::invalid_argument(value);
        m.num_classes = v;
        have_classes = true;
      } else {
        throw FormatError("unknown header key '" + key + "'", lineno);
      }
    } catch (const std::logic_error&) {
      throw FormatError("bad header value '" + tok + "'", lineno);
    }
  }
  if (!have_dim || !have_classes) throw FormatError("header must declare dim and classes", lineno);
}

}  // namespace

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.front() != '#') throw FormatError("missing '#dim=<d> classes=<L>' header", lineno);
      parse_header(line, lineno, m);
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3)
      throw FormatError("expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                        lineno);
    ManifestEntry entry;
    entry.id = fields[0];
    if (entry.id.empty()) throw FormatError("empty entity id", lineno);
    try {
      std::size_t used = 0;
      entry.label = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
    } catch (const std::logic_error&) {
      throw FormatError("label '" + fields[1] + "' is not an integer", lineno);
    }
    entry.path = fields[2];
    if (entry.path.empty()) throw FormatError("empty descriptor path", lineno);
    m.entries.push_back(std::move(entry));
  }
  if (!header_seen) throw FormatError("empty manifest " + path.string());
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "#dim=" << manifest.dim << " classes=" << manifest.num_classes << '\n';
  for (const auto& e : manifest.entries) out << e.id << '\t' << e.label << '\t' << e.path << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

DescriptorDataset load_dataset(const fs::path& manifest_path, Split split) {
  const Manifest manifest = read_manifest(manifest_path);
  DescriptorDataset ds;
  ds.dim = manifest.dim;
  ds.num_classes = manifest.num_classes;
  ds.split = split;
  const fs::path base = manifest_path.parent_path();
  for (const auto& entry : manifest.entries) {
    if (entry.label < 0 || entry.label >= manifest.num_classes)
      throw ValidationError("entity '" + entry.id + "': label " + std::to_string(entry.label) +
                            " out of range for " + std::to_string(manifest.num_classes) +
                            " classes");
    Entity e{entry.id, entry.label, read_descriptor_file(base / entry.path)};
    if (e.descriptors.rows() == 0)
      throw ValidationError("entity '" + e.id + "' has no descriptors");
    if (e.descriptors.cols() != ds.dim)
      throw ValidationError("entity '" + e.id + "': dimension " +
                            std::to_string(e.descriptors.cols()) + " does not match manifest dim " +
                            std::to_string(ds.dim));
    ds.entities.push_back(std::move(e));
  }
  validate(ds);
  return ds;
}

void save_dataset(const DescriptorDataset& ds, const fs::path& manifest_path,
                  const fs::path& data_dir) {
  fs::create_directories(data_dir);
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  Manifest m;
  m.dim = ds.dim;
  m.num_classes = ds.num_classes;
  const fs::path base =
      manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  for (std::size_t i = 0; i < ds.entities.size(); ++i) {
    const auto& e = ds.entities[i];
    const fs::path file = data_dir / ("entity_" + std::to_string(i) + ".ddlc");
    write_descriptor_file(file, e.descriptors);
    m.entries.push_back({e.id, e.label, fs::relative(file, base).generic_string()});
  }
  write_manifest(manifest_path, m);
}

}  // namespace ddl
