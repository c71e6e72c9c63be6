#include "amc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace amc {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + to_string(shape_));
  data_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + to_string(shape_));
  if (data_.size() != numel(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other) {
  if (other.shape_ != shape_)
    throw ShapeError("add_: " + to_string(shape_) + " vs " + to_string(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::scale_(double s) {
  for (auto& v : data_) v *= s;
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin >= end || end > shape_[0])
    throw ShapeError("slice_rows out of range");
  Shape s = shape_;
  s[0] = end - begin;
  const std::size_t stride = data_.size() / shape_[0];
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return Tensor(std::move(s), std::move(out));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  if (shape_.empty() || rows.empty()) throw ShapeError("gather_rows on empty selection");
  Shape s = shape_;
  s[0] = rows.size();
  const std::size_t stride = data_.size() / shape_[0];
  std::vector<double> out(rows.size() * stride);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= shape_[0]) throw ShapeError("gather_rows index out of range");
    std::memcpy(out.data() + r * stride, data_.data() + rows[r] * stride, stride * sizeof(double));
  }
  return Tensor(std::move(s), std::move(out));
}

std::vector<double> Tensor::row(std::size_t i) const {
  require_rank(*this, 2, "row");
  const std::size_t cols = shape_[1];
  return {data_.begin() + static_cast<std::ptrdiff_t>(i * cols),
          data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols)};
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
}

}  // namespace amc
