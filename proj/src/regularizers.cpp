#include "okl/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "okl/error.hpp"

namespace okl {

namespace {

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int e = 0; e < exponent; ++e) result *= base;
  return result;
}

}  // namespace

RegularizerSpec RegularizerSpec::pnorm(int k, double lambda) {
  RegularizerSpec spec{Kind::pnorm, k, lambda};
  spec.validate();
  return spec;
}

RegularizerSpec RegularizerSpec::entropy(double lambda) {
  RegularizerSpec spec{Kind::entropy, 1, lambda};
  spec.validate();
  return spec;
}

RegularizerSpec RegularizerSpec::cosh(double lambda) {
  RegularizerSpec spec{Kind::cosh, 1, lambda};
  spec.validate();
  return spec;
}

double RegularizerSpec::p() const { return 2.0 * k / (2.0 * k - 1.0); }

void RegularizerSpec::validate() const {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (kind == Kind::pnorm && k < 1) throw ValidationError("pnorm needs k >= 1");
}

double phi(const RegularizerSpec& spec, double z) {
  switch (spec.kind) {
    case RegularizerSpec::Kind::pnorm:
      return ipow(z, 2 * spec.k) / (2.0 * spec.k);
    case RegularizerSpec::Kind::entropy:
      return std::exp(z);
    case RegularizerSpec::Kind::cosh:
      return std::cosh(z) - 1.0;
  }
  return 0.0;
}

double phi_prime(const RegularizerSpec& spec, double z) {
  switch (spec.kind) {
    case RegularizerSpec::Kind::pnorm:
      return ipow(z, 2 * spec.k - 1);
    case RegularizerSpec::Kind::entropy:
      return std::exp(z);
    case RegularizerSpec::Kind::cosh:
      return std::sinh(z);
  }
  return 0.0;
}

double phi_double(const RegularizerSpec& spec, double z) {
  switch (spec.kind) {
    case RegularizerSpec::Kind::pnorm:
      return (2.0 * spec.k - 1.0) * ipow(z, 2 * spec.k - 2);
    case RegularizerSpec::Kind::entropy:
      return std::exp(z);
    case RegularizerSpec::Kind::cosh:
      return std::cosh(z);
  }
  return 0.0;
}

double generator_scale(const RegularizerSpec& spec) {
  if (spec.kind != RegularizerSpec::Kind::pnorm) return 1.0;
  return ipow((2.0 * spec.k - 1.0) / spec.k, 2 * spec.k - 1);
}

CellPenalty::CellPenalty(const RegularizerSpec& spec)
    : kind_(spec.kind),
      k_(spec.k),
      lambda_(spec.lambda),
      inv_two_lambda_(1.0 / (2.0 * spec.lambda)),
      scale_(generator_scale(spec)) {
  spec.validate();
}

double CellPenalty::value(double x) const {
  const double z = x * inv_two_lambda_;
  switch (kind_) {
    case RegularizerSpec::Kind::pnorm:
      return lambda_ * scale_ * ipow(z, 2 * k_) / (2.0 * k_);
    case RegularizerSpec::Kind::entropy:
      return lambda_ * std::exp(z);
    case RegularizerSpec::Kind::cosh:
      return lambda_ * (std::cosh(z) - 1.0);
  }
  return 0.0;
}

double CellPenalty::d1(double x) const { return 0.5 * theta(x); }

double CellPenalty::theta(double x) const {
  const double z = x * inv_two_lambda_;
  switch (kind_) {
    case RegularizerSpec::Kind::pnorm:
      return scale_ * ipow(z, 2 * k_ - 1);
    case RegularizerSpec::Kind::entropy:
      return std::exp(z);
    case RegularizerSpec::Kind::cosh:
      return std::sinh(z);
  }
  return 0.0;
}

double CellPenalty::d2(double x) const {
  const double z = x * inv_two_lambda_;
  double second = 0.0;
  switch (kind_) {
    case RegularizerSpec::Kind::pnorm:
      second = scale_ * (2.0 * k_ - 1.0) * ipow(z, 2 * k_ - 2);
      break;
    case RegularizerSpec::Kind::entropy:
      second = std::exp(z);
      break;
    case RegularizerSpec::Kind::cosh:
      second = std::cosh(z);
      break;
  }
  return 0.5 * inv_two_lambda_ * second;
}

Eigen::MatrixXd theta_from_rho(const RegularizerSpec& spec, const Eigen::MatrixXd& inner) {
  if (inner.rows() != inner.cols()) throw ValidationError("theta_from_rho: matrix not square");
  const double scale = std::max(1.0, inner.cwiseAbs().maxCoeff());
  for (Eigen::Index r = 0; r < inner.rows(); ++r) {
    for (Eigen::Index s = r + 1; s < inner.cols(); ++s) {
      if (std::abs(inner(r, s) - inner(s, r)) > 1e-12 * scale) {
        throw ValidationError("theta_from_rho: input is not symmetric");
      }
    }
  }
  const CellPenalty cell(spec);
  return inner.unaryExpr([&](double x) { return cell.theta(x); });
}

double dual_penalty(const RegularizerSpec& spec, const Eigen::MatrixXd& inner) {
  const CellPenalty cell(spec);
  double total = 0.0;
  for (Eigen::Index s = 0; s < inner.cols(); ++s) {
    for (Eigen::Index r = 0; r < inner.rows(); ++r) total += cell.value(inner(r, s));
  }
  return total;
}

double v_of_theta(const RegularizerSpec& spec, const Eigen::MatrixXd& theta) {
  double total = 0.0;
  switch (spec.kind) {
    case RegularizerSpec::Kind::pnorm: {
      const double p = spec.p();
      for (double v : theta.reshaped()) total += std::pow(std::abs(v), p);
      return 0.5 * total;
    }
    case RegularizerSpec::Kind::entropy:
      for (double v : theta.reshaped()) {
        if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
        total += v * std::log(v) - v;
      }
      return total;
    case RegularizerSpec::Kind::cosh:
      for (double v : theta.reshaped()) total += v * std::asinh(v) - std::sqrt(1.0 + v * v);
      return total + static_cast<double>(theta.size());
  }
  return total;
}

double eta(const RegularizerSpec& spec, double C) {
  if (spec.kind != RegularizerSpec::Kind::pnorm) {
    throw std::invalid_argument("eta is defined for the pnorm regularizer only");
  }
  const int k = spec.k;
  return spec.lambda / (C * (4.0 * k - 2.0)) *
         ipow((2.0 * k - 1.0) / (2.0 * k * spec.lambda), 2 * k);
}

}  // namespace okl
