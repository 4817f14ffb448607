#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kwslab/errors.hpp"

namespace kws {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Numeric precision used for a run: training defaults to 32-bit, gradient
/// verification to 64-bit.
enum class Precision { f32, f64 };

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

/// Dense row-major tensor. `data.size() == shape_size(shape)` always.
template <typename Scalar>
struct Tensor {
  Shape shape;
  Vec<Scalar> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(Vec<Scalar>::Zero(shape_size(shape))) {}
  Tensor(Shape s, Vec<Scalar> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape))
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_string(shape));
  }
  Tensor(Shape s, std::initializer_list<Scalar> values)
      : Tensor(std::move(s), Eigen::Map<const Vec<Scalar>>(values.begin(), Index(values.size()))) {}

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor constant(Shape s, Scalar v) {
    Tensor t(std::move(s));
    t.data.setConstant(v);
    return t;
  }

  Index size() const { return data.size(); }
  Index rank() const { return Index(shape.size()); }
  Index dim(std::size_t axis) const { return shape.at(axis); }

  /// Row-major 2-D view with the leading axis as rows and the rest flattened.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    return Eigen::Map<RowMatrix<Scalar>>(data.data(), rows, cols);
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    return Eigen::Map<const RowMatrix<Scalar>>(data.data(), rows, cols);
  }

  Scalar& at(Index c, Index h, Index w) { return data[(c * shape[1] + h) * shape[2] + w]; }
  Scalar at(Index c, Index h, Index w) const { return data[(c * shape[1] + h) * shape[2] + w]; }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape, data.template cast<Other>());
  }
};

}  // namespace kws
