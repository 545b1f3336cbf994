#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace grt {

// Shaped real array flowing through the differentiable graph. Row-major,
// trailing dimension is the feature axis for all layer primitives.
template <typename T>
struct ValueGrid {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  ValueGrid() = default;
  ValueGrid(std::vector<std::size_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size()) {
      throw std::invalid_argument("ValueGrid: shape/data size mismatch");
    }
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  static ValueGrid zeros(std::vector<std::size_t> s) {
    std::size_t n = numel_of(s);
    return ValueGrid(std::move(s), std::vector<T>(n, T(0)));
  }

  static ValueGrid scalar(T v) { return ValueGrid({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t trailing() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t rows() const {
    return trailing() == 0 ? 0 : numel() / trailing();
  }

  bool same_shape(const ValueGrid& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  ValueGrid<U> cast() const {
    std::vector<U> d(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) d[i] = static_cast<U>(data[i]);
    return ValueGrid<U>(shape, std::move(d));
  }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace grt
