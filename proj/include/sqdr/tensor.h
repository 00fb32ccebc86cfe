#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sqdr {

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape, double fill = 0.0);
  Tensor(std::vector<size_t> shape, std::vector<double> data);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t dim(size_t axis) const { return shape_.at(axis); }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // 4-D accessors (N, C, H, W).
  double& at(size_t n, size_t c, size_t h, size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(size_t n, size_t c, size_t h, size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void Fill(double v);
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  bool AllFinite() const;
  std::string ShapeString() const;

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

size_t ShapeSize(const std::vector<size_t>& shape);

// A learnable (or buffered) tensor with its gradient and momentum state.
struct ParamSlot {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor momentum;
  // Running statistics are stored like parameters but never updated by the
  // optimizer and not counted as learnable.
  bool learnable = true;

  ParamSlot() = default;
  ParamSlot(std::string slot_name, std::vector<size_t> shape, bool is_learnable = true);
  void ZeroGrad() { grad.Fill(0.0); }
};

}  // namespace sqdr
