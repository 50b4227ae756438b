#pragma once

#include <Eigen/Dense>

namespace okl {

/// Output-kernel regularizer V(Theta) = sum_rs phi*(Theta_rs).
///
/// Kinds:
///   pnorm(k)  V = 1/2 sum |Theta_rs|^p,  p = 2k / (2k - 1)
///   entropy   V = sum Theta log Theta - Theta   (+inf unless every entry is > 0)
///   cosh      V = sum Theta asinh Theta - sqrt(1 + Theta^2)  + T^2
struct RegularizerSpec {
  enum class Kind { pnorm, entropy, cosh };

  Kind kind = Kind::pnorm;
  int k = 1;
  double lambda = 1.0;

  static RegularizerSpec pnorm(int k, double lambda);
  static RegularizerSpec entropy(double lambda);
  static RegularizerSpec cosh(double lambda);

  /// p = 2k / (2k - 1); only meaningful for pnorm.
  double p() const;
  void validate() const;

  friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

/// Generating function of the family: z^(2k) / (2k), e^z, cosh(z) - 1, and derivatives.
double phi(const RegularizerSpec& spec, double z);
double phi_prime(const RegularizerSpec& spec, double z);
double phi_double(const RegularizerSpec& spec, double z);

/// Positive factor s with  max_Theta <rho, Theta> - V(Theta) = s * sum phi(rho_rs).
/// 1 for entropy and cosh; ((2k-1)/k)^(2k-1) for pnorm, whose V carries the 1/2 factor.
double generator_scale(const RegularizerSpec& spec);

/// Per-cell dual penalty in the inner-product scale x = <alpha^r, K_rs alpha^s>:
///   value(x) = lambda * s * phi(x / (2 lambda)),
/// with derivatives in x. theta(x) = 2 * d1(x) is the optimal output-kernel entry.
class CellPenalty {
 public:
  explicit CellPenalty(const RegularizerSpec& spec);

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  double theta(double x) const;

 private:
  RegularizerSpec::Kind kind_;
  int k_;
  double lambda_;
  double inv_two_lambda_;
  double scale_;
};

/// Optimal output kernel for the matrix inner(r, s) = <alpha^r, K_rs alpha^s>.
/// pnorm:   ((2k-1)/(2k lambda))^(2k-1) inner^(2k-1)
/// entropy: exp(inner / (2 lambda));  cosh: sinh(inner / (2 lambda)).
/// Throws ValidationError for a non-symmetric input.
Eigen::MatrixXd theta_from_rho(const RegularizerSpec& spec, const Eigen::MatrixXd& inner);

/// lambda * max_Theta (<rho, Theta> - V(Theta)) with rho = inner / (2 lambda).
/// pnorm: lambda/(4k-2) ((2k-1)/(2k lambda))^(2k) sum inner^(2k).
double dual_penalty(const RegularizerSpec& spec, const Eigen::MatrixXd& inner);

/// V(Theta); +infinity for entropy when some entry is not strictly positive.
double v_of_theta(const RegularizerSpec& spec, const Eigen::MatrixXd& theta);

/// Scalar eta = lambda/(C(4k-2)) ((2k-1)/(2k lambda))^(2k) of the pnorm coordinate
/// subproblem. Throws std::invalid_argument for other kinds.
double eta(const RegularizerSpec& spec, double C);

}  // namespace okl
