#pragma once

#include <optional>

namespace okl {

struct LossSpec {
  enum class Kind { hinge, squared, eps_svr };

  Kind kind = Kind::hinge;
  double epsilon = 0.0;  // eps_svr tube half-width

  static LossSpec hinge() { return {Kind::hinge, 0.0}; }
  static LossSpec squared() { return {Kind::squared, 0.0}; }
  static LossSpec eps_svr(double epsilon);

  bool is_classification() const { return kind == Kind::hinge; }

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

/// Throws ValidationError when y is not a legal label for the loss (hinge needs +-1).
void validate_label(const LossSpec& spec, double y);

/// hinge: max(0, 1 - y u); squared: (y - u)^2; eps_svr: max(0, |y - u| - eps).
double loss(const LossSpec& spec, double y, double u);

/// Fenchel conjugate of u -> loss(y, u), +infinity outside its domain.
///   hinge:   y v           for y v in [-1, 0]
///   squared: v^2 / 4 + y v
///   eps_svr: y v + eps |v| for |v| <= 1
double conjugate(const LossSpec& spec, double y, double v);

/// Derivative of the conjugate at an interior point of its domain (right derivative at
/// the eps_svr kink).
double conjugate_derivative(const LossSpec& spec, double y, double v);

enum class Side { left, right };

/// The map delta -> L*((-alpha - delta) / C) for one sample. With u = alpha + delta
/// every supported loss gives  quadratic * u^2 + linear * u + absolute * |u|  on
/// [lower, upper], +infinity outside.
class ConjugateTerm {
 public:
  ConjugateTerm(double alpha, double quadratic, double linear, double absolute, double lower,
                double upper);

  double value(double delta) const;
  /// One-sided derivative; at the kink `Side::right` is the default.
  double deriv(double delta, Side side = Side::right) const;
  double deriv2(double delta) const;

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  bool feasible(double delta) const { return delta >= lower_ && delta <= upper_; }
  /// delta at which u = 0 when the |u| term is present.
  std::optional<double> kink() const;

  double alpha() const { return alpha_; }
  double quadratic() const { return quadratic_; }
  /// Coefficient of u on the given side of the kink (|u| folded in).
  double slope(Side side) const;
  double slope_at(double delta, Side side = Side::right) const;

 private:
  double alpha_;
  double quadratic_;
  double linear_;
  double absolute_;
  double lower_;
  double upper_;
};

/// Throws NumericalError when alpha is already outside the conjugate's domain.
ConjugateTerm conjugate_term(const LossSpec& spec, double y, double alpha, double C);

}  // namespace okl
