#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgs/errors.hpp"

namespace sgs {

// Dense row-major f64 tensor. The temporal axis, when used, is outermost so
// per-frame slices are contiguous.
class Tensor {
 public:
  Tensor() = default;

  // Zero-initialized tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  // Takes ownership of `data`; data.size() must equal the shape product.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  // Multi-index access, row-major. Index count must equal rank().
  template <typename... Ix>
  double& at(Ix... ix) {
    return data_[offset({static_cast<std::size_t>(ix)...})];
  }
  template <typename... Ix>
  double at(Ix... ix) const {
    return data_[offset({static_cast<std::size_t>(ix)...})];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  std::string shape_str() const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> ix) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// Temporal stack of feature maps, shape T x C x H x W, all dims >= 1.
class FeatureSequence {
 public:
  explicit FeatureSequence(Tensor frames);
  FeatureSequence(std::size_t t, std::size_t c, std::size_t h, std::size_t w)
      : FeatureSequence(Tensor({t, c, h, w})) {}

  std::size_t t() const { return frames_.dim(0); }
  std::size_t c() const { return frames_.dim(1); }
  std::size_t h() const { return frames_.dim(2); }
  std::size_t w() const { return frames_.dim(3); }
  std::size_t frame_size() const { return c() * h() * w(); }

  std::span<const double> frame(std::size_t t) const;
  std::span<double> frame(std::size_t t);

  const Tensor& frames() const { return frames_; }
  Tensor& frames() { return frames_; }

 private:
  Tensor frames_;
};

// Spatial mean per (t, c): collapses H x W, keeps the temporal axis.
// Output shape T x C.
Tensor gap_spatial(const FeatureSequence& seq);

}  // namespace sgs
