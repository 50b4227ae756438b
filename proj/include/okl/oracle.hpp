#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "okl/dataset.hpp"
#include "okl/losses.hpp"
#include "okl/regularizers.hpp"

// Brute-force reference solvers used to check the main solver. Nothing here is on the
// training path; this is the only code that eigendecomposes a matrix.

namespace okl::oracle {

struct SplittingConfig {
  /// Initial step (the prox weight of the splitting).
  double step = 1.0;
  int max_iter = 200000;
  /// Stop once the fixed-point residual falls below this (Frobenius, scaled by max(1, |Theta|)).
  double tol = 1e-10;

  void validate() const;
};

/// Nearest PSD matrix in Frobenius norm (symmetrise, clip negative eigenvalues).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

/// argmin_x  tau * v(x) + (x - v0)^2 / 2  for the per-entry regularizer v of `reg`
/// (lambda is not applied). Exact up to rounding, by bisection on the monotone derivative.
double prox_entry(const RegularizerSpec& reg, double tau, double v0);

/// <rho, Theta> - V(Theta), V from v_of_theta.
double conjugate_objective(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& theta, const RegularizerSpec& reg);

struct MaximizeResult {
  Eigen::MatrixXd theta;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximises conjugate_objective over the PSD cone numerically: ADMM splitting into the
/// separable regularizer (exact per-entry prox) and the cone (eigenvalue clipping).
/// The returned theta is exactly PSD. Requires T <= 6.
MaximizeResult maximize_conjugate(const Eigen::MatrixXd& rho, const RegularizerSpec& reg,
                                  const SplittingConfig& config = {});

struct PrimalResult {
  Eigen::MatrixXd theta;
  /// Primal objective at a feasible point, hence an upper bound on the optimum.
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Optimal value of the fixed-Theta kernel machine with joint Gram G_ij = k_ij Theta(t_i, t_j):
///   max_a  -C sum L*_i(-a_i / C) - 1/2 a' G a.
/// squared loss: exact linear solve; hinge and eps_svr: exact coordinate ascent on the box.
struct InnerSolution {
  Eigen::VectorXd a;
  /// C sum L(y_i, (G a)_i) + 1/2 a' G a: primal value of the fixed-Theta problem.
  double primal = 0.0;
};
InnerSolution solve_fixed_theta(const Dataset& data, const GramMatrix& gram, const LossSpec& loss,
                                double C, const Eigen::MatrixXd& theta);

/// Minimises  P(Theta) = J(Theta) + lambda V(Theta)  over the PSD cone, J being the optimal
/// fixed-Theta value with gradient -1/2 inner(a*). Three-operator splitting: gradient step
/// on J, exact prox of lambda V, projection onto the cone; the step halves on divergence.
/// Independent of the solver's closed-form Theta map. Requires n <= 12 and T <= 3.
PrimalResult solve_primal_numeric(const Dataset& data, const GramMatrix& gram, const LossSpec& loss,
                                  const RegularizerSpec& reg, double C, const SplittingConfig& config = {});

/// The splitting scheme of solve_primal_numeric, one iteration at a time and without size
/// limits. Each iteration alternates an exact fixed-Theta kernel solve with a Theta update.
class PrimalSplittingSolver {
 public:
  PrimalSplittingSolver(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                        const LossSpec& loss, const RegularizerSpec& reg, double C,
                        const SplittingConfig& config = {});

  /// One iteration; returns the primal objective at the current PSD point (+infinity when
  /// V is infinite there).
  double step();
  bool converged() const { return converged_; }
  int iterations() const { return iterations_; }
  double best_objective() const { return best_; }
  const Eigen::MatrixXd& best_theta() const { return best_theta_; }

 private:
  Dataset data_;
  std::shared_ptr<const GramMatrix> gram_;
  LossSpec loss_;
  RegularizerSpec reg_;
  double C_;
  SplittingConfig config_;
  double gamma_;
  Eigen::MatrixXd z_;
  Eigen::VectorXd a_;
  double best_;
  Eigen::MatrixXd best_theta_;
  double best_residual_;
  int since_best_ = 0;
  int iterations_ = 0;
  bool converged_ = false;
};

/// Central differences, componentwise. Throws NumericalError on a non-finite sample.
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h);

}  // namespace okl::oracle
