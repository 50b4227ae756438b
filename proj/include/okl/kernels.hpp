#pragma once

#include <Eigen/Dense>

#include "okl/dataset.hpp"

namespace okl {

/// Scalar input kernel k(x, x').
struct KernelSpec {
  enum class Kind { linear, rbf, precomputed };

  Kind kind = Kind::linear;
  double gamma = 1.0;  // rbf only, > 0

  static KernelSpec linear() { return {Kind::linear, 1.0}; }
  static KernelSpec rbf(double gamma);
  static KernelSpec precomputed() { return {Kind::precomputed, 1.0}; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Sparse dot product, accumulated in long double over ascending indices.
double sparse_dot(const SparseVector& a, const SparseVector& b);
double sparse_squared_distance(const SparseVector& a, const SparseVector& b);

double kernel_value(const KernelSpec& spec, const SparseVector& a, const SparseVector& b);

/// Full Gram matrix of the dataset's feature vectors. Rows are split across `threads`
/// workers writing disjoint ranges; the result does not depend on the split.
GramMatrix gram(const Dataset& data, const KernelSpec& spec, int threads = 1);

/// k(x_j, x) for every training sample j. Throws ValidationError when x uses a feature
/// index beyond the training dimensionality.
Eigen::VectorXd kernel_row(const KernelSpec& spec, const Dataset& train, const SparseVector& x);

}  // namespace okl
