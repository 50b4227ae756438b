#include "okl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "okl/error.hpp"

namespace okl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LossSpec LossSpec::eps_svr(double epsilon) {
  if (!(epsilon >= 0.0)) throw ValidationError("eps-svr loss needs epsilon >= 0");
  return {Kind::eps_svr, epsilon};
}

void validate_label(const LossSpec& spec, double y) {
  if (!std::isfinite(y)) throw ValidationError("non-finite label");
  if (spec.is_classification() && y != 1.0 && y != -1.0) {
    throw ValidationError("hinge loss needs labels in {-1,+1}, got " + std::to_string(y));
  }
}

double loss(const LossSpec& spec, double y, double u) {
  switch (spec.kind) {
    case LossSpec::Kind::hinge:
      validate_label(spec, y);
      return std::max(0.0, 1.0 - y * u);
    case LossSpec::Kind::squared:
      return (y - u) * (y - u);
    case LossSpec::Kind::eps_svr:
      return std::max(0.0, std::abs(y - u) - spec.epsilon);
  }
  return kInf;
}

double conjugate(const LossSpec& spec, double y, double v) {
  switch (spec.kind) {
    case LossSpec::Kind::hinge: {
      const double yv = y * v;
      return (yv >= -1.0 && yv <= 0.0) ? yv : kInf;
    }
    case LossSpec::Kind::squared:
      return 0.25 * v * v + y * v;
    case LossSpec::Kind::eps_svr:
      return std::abs(v) <= 1.0 ? y * v + spec.epsilon * std::abs(v) : kInf;
  }
  return kInf;
}

double conjugate_derivative(const LossSpec& spec, double y, double v) {
  switch (spec.kind) {
    case LossSpec::Kind::hinge:
      return y;
    case LossSpec::Kind::squared:
      return 0.5 * v + y;
    case LossSpec::Kind::eps_svr:
      return y + (v >= 0.0 ? spec.epsilon : -spec.epsilon);
  }
  return 0.0;
}

ConjugateTerm::ConjugateTerm(double alpha, double quadratic, double linear, double absolute,
                             double lower, double upper)
    : alpha_(alpha),
      quadratic_(quadratic),
      linear_(linear),
      absolute_(absolute),
      lower_(lower),
      upper_(upper) {}

double ConjugateTerm::value(double delta) const {
  if (!feasible(delta)) return kInf;
  const double u = alpha_ + delta;
  return quadratic_ * u * u + linear_ * u + absolute_ * std::abs(u);
}

double ConjugateTerm::slope(Side side) const {
  return linear_ + (side == Side::right ? absolute_ : -absolute_);
}

double ConjugateTerm::slope_at(double delta, Side side) const {
  const double u = alpha_ + delta;
  if (u > 0.0) return slope(Side::right);
  if (u < 0.0) return slope(Side::left);
  return slope(side);
}

double ConjugateTerm::deriv(double delta, Side side) const {
  return 2.0 * quadratic_ * (alpha_ + delta) + slope_at(delta, side);
}

double ConjugateTerm::deriv2(double) const { return 2.0 * quadratic_; }

std::optional<double> ConjugateTerm::kink() const {
  if (absolute_ == 0.0) return std::nullopt;
  return -alpha_;
}

ConjugateTerm conjugate_term(const LossSpec& spec, double y, double alpha, double C) {
  if (!(C > 0.0)) throw ValidationError("C must be positive");
  // With u = alpha + delta the argument of L* is v = -u / C.
  switch (spec.kind) {
    case LossSpec::Kind::hinge: {
      // y v in [-1, 0]  <=>  y u in [0, C]
      const double u_lo = y > 0 ? 0.0 : -C;
      const double u_hi = y > 0 ? C : 0.0;
      if (alpha < u_lo || alpha > u_hi) {
        throw NumericalError("dual variable " + std::to_string(alpha) +
                             " left the hinge box (solver state corrupted)");
      }
      return ConjugateTerm(alpha, 0.0, -y / C, 0.0, u_lo - alpha, u_hi - alpha);
    }
    case LossSpec::Kind::squared:
      return ConjugateTerm(alpha, 1.0 / (4.0 * C * C), -y / C, 0.0, -kInf, kInf);
    case LossSpec::Kind::eps_svr:
      if (std::abs(alpha) > C) {
        throw NumericalError("dual variable " + std::to_string(alpha) +
                             " left the eps-svr box (solver state corrupted)");
      }
      return ConjugateTerm(alpha, 0.0, -y / C, spec.epsilon / C, -C - alpha, C - alpha);
  }
  throw ValidationError("unknown loss");
}

}  // namespace okl
