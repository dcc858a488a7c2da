#include "metaal/nn/param_store.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace metaal::nn {

Tensor& ParamStore::add(std::string name, Shape shape, std::size_t fan_in) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.emplace_back(std::move(shape));
  const auto& t = tensors_.back();
  fan_in_.push_back(fan_in ? fan_in : (t.rank() >= 2 ? t.shape.back() : t.size()));
  return tensors_.back();
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return tensors_[it->second];
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return tensors_[it->second];
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors_) flat.insert(flat.end(), t.values.begin(), t.values.end());
  return flat;
}

void ParamStore::restore(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("restore: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (auto& t : tensors_) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.values.begin());
    off += t.size();
  }
}

std::vector<double> ParamStore::flatten_grads() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors_) {
    if (t.grad) {
      flat.insert(flat.end(), t.grad->begin(), t.grad->end());
    } else {
      flat.insert(flat.end(), t.size(), 0.0);
    }
  }
  return flat;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

void ParamStore::init_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto& t = tensors_[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.values) v = dist(rng);
  }
}

bool ParamStore::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

}  // namespace metaal::nn
