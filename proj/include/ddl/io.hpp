#ifndef DDL_IO_HPP
#define DDL_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "ddl/core.hpp"

namespace ddl {

// Descriptor file: magic "DDLC", u32 version (1), u32 rows, u32 dim, then
// rows*dim little-endian float32 values, row-major.
inline constexpr char kDescriptorMagic[4] = {'D', 'D', 'L', 'C'};
inline constexpr std::uint32_t kDescriptorVersion = 1;

Matrix read_descriptor_file(const std::filesystem::path& path);

/// Values are narrowed to float32 on write.
void write_descriptor_file(const std::filesystem::path& path, const Matrix& m);

struct ManifestEntry {
  std::string id;
  int label = 0;
  std::string path;  // relative to the manifest's directory
};

struct Manifest {
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<ManifestEntry> entries;
};

/// Parses `#dim=<d> classes=<L>` followed by `<id>\t<label>\t<path>` lines.
/// Blank lines are skipped. Throws FormatError with the 1-based line number.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

DescriptorDataset load_dataset(const std::filesystem::path& manifest_path,
                               Split split = Split::train);

/// Writes one descriptor file per entity into `data_dir` (named after the
/// entity index) and a manifest at `manifest_path` referencing them.
void save_dataset(const DescriptorDataset& ds, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& data_dir);

}  // namespace ddl

#endif  // DDL_IO_HPP
