#include "metaal/nn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace metaal::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(shape_size(shape), fill) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (values.size() != shape_size(shape)) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.values[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw DimensionError("rows() on non-matrix " + shape_string(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw DimensionError("cols() on non-matrix " + shape_string(shape));
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  if (grad) {
    for (double v : *grad) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void Tensor::zero_grad() { grad.emplace(values.size(), 0.0); }

}  // namespace metaal::nn
