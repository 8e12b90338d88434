#include "sgs/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace sgs {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    std::ostringstream msg;
    msg << "tensor data length " << data_.size() << " does not match shape " << shape_str();
    throw ShapeError(msg.str());
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("tensor axis out of range");
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> ix) const {
  if (ix.size() != shape_.size()) throw ShapeError("index count does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : ix) {
    if (i >= shape_[axis]) throw ShapeError("tensor index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) throw ShapeError("shape mismatch in tensor addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (!same_shape(other)) throw ShapeError("shape mismatch in tensor subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("shape mismatch in dot product");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

FeatureSequence::FeatureSequence(Tensor frames) : frames_(std::move(frames)) {
  if (frames_.rank() != 4) {
    throw ShapeError("feature sequence must be T x C x H x W, got " + frames_.shape_str());
  }
}

std::span<const double> FeatureSequence::frame(std::size_t t) const {
  if (t >= this->t()) throw ShapeError("frame index out of range");
  return frames_.values().subspan(t * frame_size(), frame_size());
}

std::span<double> FeatureSequence::frame(std::size_t t) {
  if (t >= this->t()) throw ShapeError("frame index out of range");
  return frames_.values().subspan(t * frame_size(), frame_size());
}

Tensor gap_spatial(const FeatureSequence& seq) {
  const std::size_t t_len = seq.t(), c_len = seq.c();
  const std::size_t spatial = seq.h() * seq.w();
  Tensor out({t_len, c_len});
  const double inv = 1.0 / static_cast<double>(spatial);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(t_len); ++t) {
    const double* frame = seq.frame(static_cast<std::size_t>(t)).data();
    for (std::size_t c = 0; c < c_len; ++c) {
      double acc = 0.0;
      const double* plane = frame + c * spatial;
      for (std::size_t i = 0; i < spatial; ++i) acc += plane[i];
      out[static_cast<std::size_t>(t) * c_len + c] = acc * inv;
    }
  }
  return out;
}

}  // namespace sgs
