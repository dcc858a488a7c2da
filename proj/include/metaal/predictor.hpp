#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaal/nn/graph.hpp"

namespace metaal::predictor {

/// predict() was given no labeled examples.
class EmptySupportError : public std::invalid_argument {
 public:
  EmptySupportError() : std::invalid_argument("no labeled examples to predict from") {}
};

enum class Similarity { cosine, euclidean };

Similarity parse_similarity(const std::string& name);
std::string to_string(Similarity s);

double cosine_similarity(std::span<const double> a, std::span<const double> b);
/// Negated Euclidean distance, so larger means closer.
double euclidean_similarity(std::span<const double> a, std::span<const double> b);
double similarity(Similarity kind, std::span<const double> a, std::span<const double> b);

/// D_alpha: embedded labeled examples. Labels are local class ids < num_classes.
struct LabeledSubset {
  std::vector<std::vector<double>> embeddings;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> pool_indices;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::vector<double> one_hot(std::size_t i) const;
  /// Throws on length mismatch or out-of-range labels.
  void validate() const;
};

using PredictionDistribution = std::vector<double>;

/// Similarity-weighted vote: w = softmax(temperature * sims), p = sum_i w_i onehot(y_i).
PredictionDistribution predict(std::span<const double> x, const LabeledSubset& support, Similarity kind,
                               double temperature);

/// Differentiable form of predict(); gradients reach `x` and every support embedding.
nn::Var predict(nn::Var x, std::span<const nn::Var> support, std::span<const std::size_t> labels,
                std::size_t num_classes, Similarity kind, double temperature);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> p);

/// Fraction of predictions whose argmax equals the truth.
double accuracy(std::span<const PredictionDistribution> predictions, std::span<const std::size_t> truths);

}  // namespace metaal::predictor
