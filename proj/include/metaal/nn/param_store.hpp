#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metaal/nn/tensor.hpp"

namespace metaal::nn {

/// Named trainable tensors, iterated in insertion order.
///
/// The flat layout used by flatten()/restore() and by optimizers is the
/// concatenation of every tensor's values in that order.
class ParamStore {
 public:
  /// fan_in == 0 derives it from the shape (last dimension, or length for vectors).
  Tensor& add(std::string name, Shape shape, std::size_t fan_in = 0);

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t tensor_count() const { return names_.size(); }
  std::size_t parameter_count() const;

  std::vector<double> flatten() const;
  void restore(std::span<const double> flat);

  /// Gradients in flat order; tensors without a gradient contribute zeros.
  std::vector<double> flatten_grads() const;
  void zero_grad();

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor.
  void init_uniform(std::uint64_t seed);

  bool all_finite() const;

  /// Mutable access by position for optimizers; matches names() order.
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::vector<std::size_t> fan_in_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace metaal::nn
