#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "noisere/errors.hpp"

namespace noisere {

using Shape = std::vector<int>;

inline int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor of doubles. All model math is 64-bit.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(check_shape(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (static_cast<int64_t>(values_.size()) != shape_size(shape_)) {
      throw DimensionError("tensor: " + std::to_string(values_.size()) +
                           " values do not fill shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  static Tensor identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }

  int rows() const { return ndim() == 2 ? shape_[0] : (ndim() == 1 ? 1 : bad_2d()); }
  int cols() const { return ndim() == 2 ? shape_[1] : (ndim() == 1 ? shape_[0] : bad_2d()); }

  double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }

  double& at(int r, int c) { return values_[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return values_[static_cast<size_t>(r) * cols() + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  double max_abs_diff(const Tensor& o) const {
    double m = 0.0;
    for (int64_t i = 0; i < size(); ++i) m = std::max(m, std::abs(values_[i] - o.values_[i]));
    return m;
  }

  const std::vector<double>& values() const { return values_; }

 private:
  static size_t check_shape(const Shape& s) {
    for (int d : s) {
      if (d <= 0) throw DimensionError("tensor: non-positive dimension in " + shape_str(s));
    }
    return static_cast<size_t>(shape_size(s));
  }

  [[noreturn]] int bad_2d() const {
    throw DimensionError("tensor: expected 1-D or 2-D, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> values_;
};

}  // namespace noisere
