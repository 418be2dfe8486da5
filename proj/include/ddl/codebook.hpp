#ifndef DDL_CODEBOOK_HPP
#define DDL_CODEBOOK_HPP

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ddl/core.hpp"

namespace ddl {

struct Codeword {
  Vector vector;
  int label = 0;
  double entropy = 0.0;  // H(Y|c), bits
  double tfidf = 0.0;    // fraction of neighbors sharing the label
  double rank = 0.0;
  std::size_t source_index = 0;  // position in the temporary codebook

  friend bool operator==(const Codeword&, const Codeword&) = default;
};

/// Codewords mined from one category.
struct CategoryCodebook {
  int label = 0;
  std::vector<Codeword> codewords;

  std::size_t size() const { return codewords.size(); }
  Matrix vectors() const;
  friend bool operator==(const CategoryCodebook&, const CategoryCodebook&) = default;
};

/// Concatenation of the selected per-category codebooks, ascending by class.
struct GlobalDictionary {
  Matrix codewords;
  std::vector<int> labels;
  std::vector<double> ranks;
  std::vector<double> entropies;
  std::vector<double> tfidfs;
  std::vector<std::size_t> per_class_counts;

  std::size_t size() const { return codewords.rows(); }
  std::size_t dim() const { return codewords.cols(); }
  friend bool operator==(const GlobalDictionary&, const GlobalDictionary&) = default;
};

/// Writes `<stem>.bin` (descriptor format) and `<stem>.meta` with one line per
/// codeword: `<index>\t<label>\t<rank>\t<H>\t<TI>`.
void save_dictionary(const GlobalDictionary& dict, const std::filesystem::path& bin_path,
                     const std::filesystem::path& meta_path);
GlobalDictionary load_dictionary(const std::filesystem::path& bin_path,
                                 const std::filesystem::path& meta_path, int num_classes);

}  // namespace ddl

#endif  // DDL_CODEBOOK_HPP
