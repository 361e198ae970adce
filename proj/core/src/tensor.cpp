#include "icl/tensor.hpp"

#include <cmath>

namespace icl {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.size() > 3) throw std::invalid_argument("Tensor: rank above 3");
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_.size() > 3) throw std::invalid_argument("Tensor: rank above 3");
  if (data_.size() != product(shape_)) {
    throw std::invalid_argument("Tensor: " + std::to_string(data_.size()) +
                                " values do not fill shape " + shape_string());
  }
}

std::size_t Tensor::rows() const {
  switch (shape_.size()) {
    case 0:
    case 1:
      return 1;
    case 2:
      return shape_[0];
    default:
      return shape_[0] * shape_[1];
  }
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw std::invalid_argument("Tensor::item: tensor has " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

}  // namespace icl
