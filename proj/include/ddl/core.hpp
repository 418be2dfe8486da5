#ifndef DDL_CORE_HPP
#define DDL_CORE_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddl {

// Error hierarchy. Every failure the library reports derives from ddl::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text or binary; carries the offending line when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Rows are descriptors, codewords or
/// encoded samples depending on context.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ValidationError("matrix storage does not match its shape");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  /// Appends a row; the first append on an empty 0x0 matrix fixes the width.
  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_)
      throw ValidationError("row length " + std::to_string(values.size()) +
                            " does not match matrix width " + std::to_string(cols_));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Selects the given rows of a matrix in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

/// A labeled visual entity (image or video) holding its bag of local
/// descriptors, one per row.
struct Entity {
  std::string id;
  int label = 0;
  Matrix descriptors;

  std::size_t size() const { return descriptors.rows(); }
  friend bool operator==(const Entity&, const Entity&) = default;
};

enum class Split { train, test };

struct DescriptorDataset {
  std::vector<Entity> entities;
  int num_classes = 0;
  std::size_t dim = 0;
  Split split = Split::train;

  std::size_t size() const { return entities.size(); }
  friend bool operator==(const DescriptorDataset&, const DescriptorDataset&) = default;
};

/// Checks the dataset invariants: L >= 2, labels in range, every entity
/// non-empty with dimension `dim`, every value finite. Throws ValidationError
/// naming the offending entity.
void validate(const DescriptorDataset& ds);

/// Entities of one class, in dataset order.
std::vector<const Entity*> entities_of_class(const DescriptorDataset& ds, int label);

}  // namespace ddl

#endif  // DDL_CORE_HPP
