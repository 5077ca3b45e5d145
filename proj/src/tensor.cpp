#include "graphaf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "graphaf/error.hpp"

namespace graphaf {

std::size_t shape_size(const Tensor::Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Tensor::Shape& shape) {
  std::string out = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += "x";
    out += std::to_string(shape[k]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + graphaf::shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() == 1) return 1;
  if (shape_.empty()) return 1;
  throw ShapeError("rows() on tensor of shape " + graphaf::shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw ShapeError("cols() on tensor of shape " + graphaf::shape_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + graphaf::shape_string(shape_));
  return data_[0];
}

std::string Tensor::shape_string() const { return graphaf::shape_string(shape_); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemm_accumulate(const double* a, const double* b, double* out, std::size_t r,
                     std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    double* out_row = out + i * c;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      const double* b_row = b + p * c;
      for (std::size_t j = 0; j < c; ++j) out_row[j] += av * b_row[j];
    }
  }
}

void gemm_at_b_accumulate(const double* a, const double* g, double* out, std::size_t r,
                          std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* a_row = a + i * k;
    const double* g_row = g + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      double* out_row = out + p * c;
      for (std::size_t j = 0; j < c; ++j) out_row[j] += av * g_row[j];
    }
  }
}

void gemm_a_bt_accumulate(const double* g, const double* b, double* out, std::size_t r,
                          std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* g_row = g + i * c;
    double* out_row = out + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b_row = b + p * c;
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += g_row[j] * b_row[j];
      out_row[p] += acc;
    }
  }
}

}  // namespace graphaf
