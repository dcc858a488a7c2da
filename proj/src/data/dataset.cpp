#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "metaal/data.hpp"

namespace metaal::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, delim)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

BaseDataset::BaseDataset(std::size_t feature_dim, std::vector<double> features, std::vector<std::string> raw_labels)
    : feature_dim_(feature_dim), features_(std::move(features)) {
  if (raw_labels.empty()) throw ParseError(0, "dataset has no rows");
  if (feature_dim_ == 0) throw ParseError(0, "dataset has no feature columns");
  if (features_.size() != raw_labels.size() * feature_dim_) {
    throw ParseError(0, "feature matrix size does not match row count");
  }

  std::vector<std::string> names = raw_labels;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const bool numeric = std::all_of(names.begin(), names.end(), [](const std::string& s) {
    double d;
    return parse_double(s, d);
  });
  if (numeric) {
    std::stable_sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
      double x, y;
      parse_double(a, x);
      parse_double(b, y);
      return x < y;
    });
  }
  std::map<std::string, ClassId> id_of;
  for (std::size_t i = 0; i < names.size(); ++i) id_of.emplace(names[i], static_cast<ClassId>(i));
  class_names_ = std::move(names);

  by_class_.resize(class_names_.size());
  labels_.reserve(raw_labels.size());
  for (std::size_t r = 0; r < raw_labels.size(); ++r) {
    const ClassId c = id_of.at(raw_labels[r]);
    labels_.push_back(c);
    by_class_[static_cast<std::size_t>(c)].push_back(r);
  }
}

BaseDataset BaseDataset::standardized(std::span<const ClassId> fit_classes) const {
  std::vector<double> mean(feature_dim_, 0.0), sq(feature_dim_, 0.0);
  std::size_t n = 0;
  for (ClassId c : fit_classes) {
    for (std::size_t r : rows_of(c)) {
      auto x = row(r);
      for (std::size_t k = 0; k < feature_dim_; ++k) mean[k] += x[k];
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("standardize: no rows in fit classes");
  for (double& m : mean) m /= static_cast<double>(n);
  for (ClassId c : fit_classes) {
    for (std::size_t r : rows_of(c)) {
      auto x = row(r);
      for (std::size_t k = 0; k < feature_dim_; ++k) sq[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
    }
  }
  std::vector<double> scale(feature_dim_);
  for (std::size_t k = 0; k < feature_dim_; ++k) {
    const double sd = std::sqrt(sq[k] / static_cast<double>(n));
    scale[k] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  BaseDataset out = *this;
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = 0; k < feature_dim_; ++k) {
      double& v = out.features_[r * feature_dim_ + k];
      v = (v - mean[k]) * scale[k];
    }
  }
  return out;
}

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "libsvm") return Format::libsvm;
  throw std::invalid_argument("unknown dataset format '" + name + "' (expected csv or libsvm)");
}

std::string to_string(Format f) { return f == Format::csv ? "csv" : "libsvm"; }

BaseDataset parse_csv(std::istream& in, const CsvOptions& opts) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t ncols = 0;
  int label_col = opts.label_column;

  if (opts.header) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!blank(line)) break;
    }
    const auto cols = split(line, opts.delimiter);
    ncols = cols.size();
    if (!opts.label_name.empty()) {
      auto it = std::find(cols.begin(), cols.end(), opts.label_name);
      if (it == cols.end()) throw ParseError(lineno, "label column '" + opts.label_name + "' not in header");
      label_col = static_cast<int>(it - cols.begin());
    }
  } else if (!opts.label_name.empty()) {
    throw ParseError(0, "label column given by name but the file has no header");
  }

  std::vector<double> features;
  std::vector<std::string> labels;
  std::size_t label_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto cols = split(line, opts.delimiter);
    if (ncols == 0) {
      ncols = cols.size();
      if (ncols < 2) throw ParseError(lineno, "need at least one feature and one label column");
    }
    if (cols.size() != ncols) {
      throw ParseError(lineno, "expected " + std::to_string(ncols) + " columns, found " + std::to_string(cols.size()));
    }
    if (labels.empty()) {
      const int idx = label_col < 0 ? static_cast<int>(ncols) + label_col : label_col;
      if (idx < 0 || idx >= static_cast<int>(ncols)) throw ParseError(lineno, "label column out of range");
      label_index = static_cast<std::size_t>(idx);
    }
    for (std::size_t c = 0; c < ncols; ++c) {
      if (c == label_index) continue;
      double v;
      if (!parse_double(cols[c], v)) {
        throw ParseError(lineno, "column " + std::to_string(c + 1) + ": not a number: '" + cols[c] + "'");
      }
      features.push_back(v);
    }
    if (cols[label_index].empty()) throw ParseError(lineno, "empty label");
    labels.push_back(cols[label_index]);
  }
  if (labels.empty()) throw ParseError(lineno, "no data rows");
  return BaseDataset(ncols - 1, std::move(features), std::move(labels));
}

BaseDataset parse_libsvm(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<std::string> labels;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    labels.push_back(tok);
    std::vector<std::pair<std::size_t, double>> entries;
    std::size_t last = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected idx:val, got '" + tok + "'");
      std::size_t idx = 0;
      const auto* b = tok.data();
      auto [p, ec] = std::from_chars(b, b + colon, idx);
      if (ec != std::errc() || p != b + colon || idx == 0) throw ParseError(lineno, "bad feature index in '" + tok + "'");
      if (idx <= last) throw ParseError(lineno, "feature indices must be strictly increasing");
      double v;
      if (!parse_double(std::string_view(tok).substr(colon + 1), v)) {
        throw ParseError(lineno, "bad feature value in '" + tok + "'");
      }
      last = idx;
      entries.emplace_back(idx, v);
      dim = std::max(dim, idx);
    }
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) throw ParseError(lineno, "no data rows");
  if (dim == 0) throw ParseError(lineno, "no features in file");
  std::vector<double> features(rows.size() * dim, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto [idx, v] : rows[r]) features[r * dim + idx - 1] = v;
  }
  return BaseDataset(dim, std::move(features), std::move(labels));
}

BaseDataset load_dataset(const std::filesystem::path& path, Format format, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open dataset " + path.string());
  return format == Format::csv ? parse_csv(in, opts) : parse_libsvm(in);
}

std::uint64_t file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace metaal::data
