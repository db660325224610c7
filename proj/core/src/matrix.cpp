#include "lga/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lga/error.hpp"

namespace lga {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    fail(ErrorKind::invalid_argument, "matrix data size " + std::to_string(data_.size()) +
                                          " does not match " + std::to_string(rows) + "x" +
                                          std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::invalid_argument, "ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace lga
