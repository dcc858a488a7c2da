#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace metaal::data {

/// Input could not be parsed; `line` is 1-based (0 when not line-specific).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Sampling request cannot be satisfied by the data (too few classes or rows).
class SamplingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ClassId = int;

/// Labeled corpus. Class ids are dense 0..C-1 assigned in sorted label order.
class BaseDataset {
 public:
  BaseDataset() = default;
  BaseDataset(std::size_t feature_dim, std::vector<double> features, std::vector<std::string> raw_labels);

  std::size_t rows() const { return labels_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t class_count() const { return class_names_.size(); }

  std::span<const double> row(std::size_t i) const { return {features_.data() + i * feature_dim_, feature_dim_}; }
  ClassId label(std::size_t i) const { return labels_[i]; }
  const std::vector<ClassId>& labels() const { return labels_; }
  const std::string& class_name(ClassId c) const { return class_names_[static_cast<std::size_t>(c)]; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::size_t>& rows_of(ClassId c) const { return by_class_[static_cast<std::size_t>(c)]; }
  const std::vector<double>& features() const { return features_; }

  /// Per-feature z-scoring with mean/std computed on rows of `fit_classes` only.
  BaseDataset standardized(std::span<const ClassId> fit_classes) const;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<std::size_t>> by_class_;
};

enum class Format { csv, libsvm };

Format parse_format(const std::string& name);
std::string to_string(Format f);

struct CsvOptions {
  bool header = false;
  /// Label column; negative counts from the end (-1 = last column).
  int label_column = -1;
  /// When set (requires header), overrides label_column.
  std::string label_name;
  char delimiter = ',';
};

BaseDataset parse_csv(std::istream& in, const CsvOptions& opts = {});
/// "label idx:val ..." with 1-based indices, densified to the largest index seen.
BaseDataset parse_libsvm(std::istream& in);
BaseDataset load_dataset(const std::filesystem::path& path, Format format, const CsvOptions& opts = {});

/// FNV-1a of the file contents, for manifests.
std::uint64_t file_fingerprint(const std::filesystem::path& path);

struct ClassPartition {
  std::vector<ClassId> train;
  std::vector<ClassId> validation;
  std::vector<ClassId> test;
};

struct PartitionCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Disjoint class sets of exactly the requested sizes; classes left over are unused.
ClassPartition partition_classes(const BaseDataset& ds, PartitionCounts counts, std::uint64_t seed);

/// One elementary task: classes C, an unlabeled pool and a labeled eval set.
struct Problem {
  std::size_t id = 0;
  /// C in sampling order; local label of a row = position of its class here.
  std::vector<ClassId> classes;
  std::vector<std::size_t> pool;
  std::vector<std::size_t> eval;
  std::uint64_t seed = 0;

  std::size_t num_classes() const { return classes.size(); }
  /// Local label (index into `classes`) of dataset row `row`.
  std::size_t local_label(const BaseDataset& ds, std::size_t row) const;
  std::vector<std::size_t> eval_labels(const BaseDataset& ds) const;
};

struct ProblemShape {
  std::size_t classes_per_problem = 2;  // P
  std::size_t pool_size = 25;           // N
  std::size_t eval_size = 40;           // M
  bool balanced = false;
};

Problem sample_problem(const BaseDataset& ds, std::span<const ClassId> classes, const ProblemShape& shape,
                       std::uint64_t seed, std::size_t id = 0);

struct SuiteCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct ProblemSuite {
  std::vector<Problem> train;
  std::vector<Problem> validation;
  std::vector<Problem> test;
};

/// Problem j of a split uses seed derive_seed(master_seed, split_tag, j).
ProblemSuite make_problem_suite(const BaseDataset& ds, const ClassPartition& partition, const ProblemShape& shape,
                                SuiteCounts counts, std::uint64_t master_seed);

/// Holds the pool's labels; the selector side only ever sees pool indices.
class Oracle {
 public:
  Oracle(const BaseDataset& ds, const Problem& problem);
  std::vector<std::size_t> query(std::span<const std::size_t> pool_indices) const;
  std::size_t pool_size() const { return labels_.size(); }

 private:
  std::vector<std::size_t> labels_;
};

nlohmann::json to_json(const ClassPartition& p);
ClassPartition partition_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProblemSuite& s);
ProblemSuite suite_from_json(const nlohmann::json& j);

}  // namespace metaal::data
