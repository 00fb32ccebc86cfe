#include "sqdr/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "sqdr/error.h"

namespace sqdr {

size_t ShapeSize(const std::vector<size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1},
                         std::multiplies<size_t>());
}

Tensor::Tensor(std::vector<size_t> shape, double fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != ShapeSize(shape_)) {
    throw Error(ErrorKind::kShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + ShapeString());
  }
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor::ShapeString() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

ParamSlot::ParamSlot(std::string slot_name, std::vector<size_t> shape,
                     bool is_learnable)
    : name(std::move(slot_name)),
      value(shape),
      grad(shape),
      momentum(shape),
      learnable(is_learnable) {}

}  // namespace sqdr
