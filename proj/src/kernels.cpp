#include "okl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "okl/error.hpp"

namespace okl {

KernelSpec KernelSpec::rbf(double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("rbf kernel needs gamma > 0");
  return {Kind::rbf, gamma};
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  long double sum = 0.0L;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      sum += static_cast<long double>(ia->value) * ib->value;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(sum);
}

double sparse_squared_distance(const SparseVector& a, const SparseVector& b) {
  long double sum = 0.0L;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    long double diff;
    if (ib == b.end() || (ia != a.end() && ia->index < ib->index)) {
      diff = ia->value;
      ++ia;
    } else if (ia == a.end() || ib->index < ia->index) {
      diff = ib->value;
      ++ib;
    } else {
      diff = static_cast<long double>(ia->value) - ib->value;
      ++ia;
      ++ib;
    }
    sum += diff * diff;
  }
  return static_cast<double>(sum);
}

double kernel_value(const KernelSpec& spec, const SparseVector& a, const SparseVector& b) {
  switch (spec.kind) {
    case KernelSpec::Kind::linear:
      return sparse_dot(a, b);
    case KernelSpec::Kind::rbf:
      return std::exp(-spec.gamma * sparse_squared_distance(a, b));
    case KernelSpec::Kind::precomputed:
      break;
  }
  throw ValidationError("precomputed kernel has no feature-space evaluation; load the Gram matrix instead");
}

GramMatrix gram(const Dataset& data, const KernelSpec& spec, int threads) {
  if (spec.kind == KernelSpec::Kind::precomputed) {
    throw ValidationError("gram() called with a precomputed kernel spec; use load_gram");
  }
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd k(n, n);
  // Entries (i, j) and (j, i) with i <= j are written only by the owner of column j.
  auto fill_columns = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index j = begin; j < end; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double v = kernel_value(spec, data.features[static_cast<std::size_t>(i)],
                                      data.features[static_cast<std::size_t>(j)]);
        k(i, j) = v;
        k(j, i) = v;
      }
    }
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    fill_columns(0, n);
  } else {
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (n + threads - 1) / threads;
    for (Eigen::Index begin = 0; begin < n; begin += chunk) {
      pool.emplace_back(fill_columns, begin, std::min(n, begin + chunk));
    }
    for (auto& t : pool) t.join();
  }
  return GramMatrix(std::move(k));
}

Eigen::VectorXd kernel_row(const KernelSpec& spec, const Dataset& train, const SparseVector& x) {
  if (spec.kind == KernelSpec::Kind::precomputed) {
    throw ValidationError("kernel_row() called with a precomputed kernel spec");
  }
  if (!x.empty() && x.back().index > train.dimension()) {
    throw ValidationError("dimension mismatch: feature index " + std::to_string(x.back().index) +
                          " exceeds training dimension " + std::to_string(train.dimension()));
  }
  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::VectorXd row(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    row(j) = kernel_value(spec, train.features[static_cast<std::size_t>(j)], x);
  }
  return row;
}

}  // namespace okl
