#include "metaal/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metaal/nn/tensor.hpp"

namespace metaal::predictor {

Similarity parse_similarity(const std::string& name) {
  if (name == "cosine") return Similarity::cosine;
  if (name == "euclidean") return Similarity::euclidean;
  throw std::invalid_argument("unknown similarity '" + name + "' (expected cosine or euclidean)");
}

std::string to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "euclidean"; }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double euclidean_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("euclidean_similarity: length mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return -std::sqrt(d2);
}

double similarity(Similarity kind, std::span<const double> a, std::span<const double> b) {
  return kind == Similarity::cosine ? cosine_similarity(a, b) : euclidean_similarity(a, b);
}

std::vector<double> LabeledSubset::one_hot(std::size_t i) const {
  std::vector<double> v(num_classes, 0.0);
  v.at(labels.at(i)) = 1.0;
  return v;
}

void LabeledSubset::validate() const {
  if (embeddings.size() != labels.size()) throw DimensionError("labeled subset: embeddings/labels length mismatch");
  if (!pool_indices.empty() && pool_indices.size() != labels.size()) {
    throw DimensionError("labeled subset: pool_indices length mismatch");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) throw std::out_of_range("labeled subset: label outside [0, num_classes)");
  }
}

PredictionDistribution predict(std::span<const double> x, const LabeledSubset& support, Similarity kind,
                               double temperature) {
  if (support.size() == 0) throw EmptySupportError();
  if (!(temperature > 0.0)) throw std::invalid_argument("predict: temperature must be positive");
  support.validate();

  std::vector<double> logits(support.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support.embeddings[i].size() != x.size()) throw DimensionError("predict: embedding length mismatch");
    logits[i] = temperature * similarity(kind, x, support.embeddings[i]);
    m = std::max(m, logits[i]);
  }
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    z += l;
  }
  PredictionDistribution p(support.num_classes, 0.0);
  for (std::size_t i = 0; i < support.size(); ++i) p[support.labels[i]] += logits[i] / z;
  return p;
}

nn::Var predict(nn::Var x, std::span<const nn::Var> support, std::span<const std::size_t> labels,
                std::size_t num_classes, Similarity kind, double temperature) {
  if (support.empty()) throw EmptySupportError();
  if (support.size() != labels.size()) throw DimensionError("predict: support/labels length mismatch");
  std::vector<nn::Var> sims;
  sims.reserve(support.size());
  for (const nn::Var& s : support) {
    sims.push_back(kind == Similarity::cosine ? nn::cosine_similarity(x, s) : nn::euclidean_similarity(x, s));
  }
  nn::Var w = nn::softmax(nn::stack(sims), temperature);

  // One-hot label matrix [num_classes, k]; prediction = Y w.
  nn::Tensor y(nn::Shape{num_classes, support.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw std::out_of_range("predict: label outside [0, num_classes)");
    y.values[labels[i] * support.size() + i] = 1.0;
  }
  return nn::matvec(x.graph->constant(std::move(y)), w);
}

std::size_t argmax(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

double accuracy(std::span<const PredictionDistribution> predictions, std::span<const std::size_t> truths) {
  if (predictions.empty()) throw std::invalid_argument("accuracy of an empty prediction list");
  if (predictions.size() != truths.size()) throw DimensionError("accuracy: predictions/truths length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (argmax(predictions[i]) == truths[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace metaal::predictor
