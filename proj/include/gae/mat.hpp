#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gae {

/// Dense row-major matrix of 64-bit reals. Vectors are N×1 or 1×N.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {
    assert(r >= 0 && c >= 0);
  }
  Mat(int r, int c, std::vector<double> values)
      : rows(r), cols(c), a(std::move(values)) {
    assert(a.size() == static_cast<size_t>(r) * c);
  }

  static Mat full(int r, int c, double v) {
    Mat m(r, c);
    m.a.assign(m.a.size(), v);
    return m;
  }

  double& operator()(int r, int c) {
    return a[static_cast<size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return a[static_cast<size_t>(r) * cols + c];
  }

  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return a.data() + static_cast<size_t>(r) * cols;
  }

  size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }
  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }
  bool operator==(const Mat& o) const {
    return rows == o.rows && cols == o.cols && a == o.a;
  }
};

inline bool all_finite(const Mat& m) {
  for (double v : m.a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace gae
