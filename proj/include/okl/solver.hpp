#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "okl/dataset.hpp"
#include "okl/losses.hpp"
#include "okl/random.hpp"
#include "okl/regularizers.hpp"

namespace okl {

/// Everything that defines the dual objective
///   D(alpha) = -C sum_i L*_i(-alpha_i / C) - dual_penalty(inner(alpha)).
struct Problem {
  std::vector<int> tasks;
  std::vector<double> labels;
  int num_tasks = 0;
  std::shared_ptr<const GramMatrix> gram;
  LossSpec loss;
  RegularizerSpec reg;
  double C = 1.0;

  /// Validates dimensions, labels against the loss, C and the regularizer.
  static Problem make(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                      const LossSpec& loss, const RegularizerSpec& reg, double C);

  Eigen::Index size() const { return static_cast<Eigen::Index>(tasks.size()); }
  const Eigen::MatrixXd& kernel() const { return gram->matrix(); }
};

enum class Sampling { permutation, uniform };
enum class SubproblemMethod { newton, cubic, automatic };

struct SolverConfig {
  /// Target for (P - D) / max(1, |P|).
  double gap_tol = 1e-3;
  int max_epochs = 1000;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::permutation;
  int gap_check_every = 1;
  SubproblemMethod subproblem = SubproblemMethod::automatic;
  /// Allowed max-abs drift of the incremental caches, scaled by max(1, max|c|).
  double cache_tol = 1e-8;
  /// Also stop once a gap check sees a primal value at or below this.
  std::optional<double> primal_target;

  void validate() const;
};

/// Dual iterate plus incrementally maintained caches:
///   B(i, s) = sum_{j: t_j = s} k_ij alpha_j        (n x T)
///   c(s, z) = <alpha^s, K_sz alpha^z>              (T x T)
struct DualState {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd B;
  Eigen::MatrixXd c;
  long epoch = 0;
  Rng rng;
};

/// alpha = 0, zero caches, generator seeded from the config.
DualState init_state(const Problem& problem, const SolverConfig& config);

/// Arithmetic done by one coordinate subproblem. `cell_evaluations` counts evaluations
/// of the per-cell penalty (value or derivative); it depends on T and the number of
/// iterations but never on n.
struct SubproblemStats {
  int iterations = 0;
  long cell_evaluations = 0;
};

/// Objective of the one-dimensional problem for coordinate i:
///   L*_i((-alpha_i - delta) / C) + (1/C) dual_penalty(inner after the update),
/// including the cells that do not depend on delta. +infinity outside the conjugate box.
double subproblem_value(const Problem& problem, const DualState& state, Eigen::Index i,
                        double delta);

/// Safeguarded Newton (bisection fallback inside a sign-change bracket, explicit handling
/// of the eps-svr kink). Any loss and regularizer.
double solve_subproblem_newton(const Problem& problem, const DualState& state, Eigen::Index i,
                               const SolverConfig& config, SubproblemStats* stats = nullptr);

/// Closed-form solution for pnorm k = 1: the stationarity condition on each smooth piece
/// is a cubic whose real roots are computed directly. Throws std::invalid_argument for
/// other regularizers.
double solve_subproblem_cubic(const Problem& problem, const DualState& state, Eigen::Index i,
                              SubproblemStats* stats = nullptr);

/// alpha_i += delta and O(n + T) cache update.
void apply_update(const Problem& problem, DualState& state, Eigen::Index i, double delta);

double dual_objective(const Problem& problem, const DualState& state);

/// dD/dalpha_i = L*_i'(-alpha_i / C) - F(x_i, t_i).
Eigen::VectorXd dual_gradient(const Problem& problem, const DualState& state);

struct PrimalEvaluation {
  double value = 0.0;
  Eigen::MatrixXd theta;
  /// F(x_i, t_i) on the training points.
  Eigen::VectorXd predictions;
};

/// Primal objective at the feasible point (Theta(alpha), beta = alpha Theta):
///   C sum L(y_i, F_i) + 1/2 sum Theta_rs c_rs + lambda V(Theta).
PrimalEvaluation primal_objective(const Problem& problem, const DualState& state);

/// Caches recomputed from alpha in O(n^2).
struct CacheSnapshot {
  Eigen::MatrixXd B;
  Eigen::MatrixXd c;
};
CacheSnapshot recompute_caches(const Problem& problem, const Eigen::VectorXd& alpha);

struct CacheDrift {
  double B = 0.0;
  double c = 0.0;
  double max() const { return B > c ? B : c; }
};
CacheDrift cache_drift(const Problem& problem, const DualState& state);

/// Dual objective at an arbitrary alpha (caches rebuilt from scratch).
double dual_objective_at(const Problem& problem, const Eigen::VectorXd& alpha);

struct GapCheck {
  long epoch = 0;
  double primal = 0.0;
  double dual = 0.0;
  double relative_gap = 0.0;
};

struct ConvergenceReport {
  long epochs = 0;
  double primal = 0.0;
  double dual = 0.0;
  double relative_gap = 0.0;
  bool converged = false;
  /// "gap", "target" (primal_target reached), "dual-progress" (fallback when the primal is
  /// infinite) or "max-epochs".
  std::string stop_reason;
  std::vector<GapCheck> history;
};

struct EpochInfo {
  long epoch = 0;
  double dual = 0.0;
  /// Set on epochs where the gap was evaluated.
  std::optional<GapCheck> gap;
  std::optional<CacheDrift> drift;
};

using EpochObserver = std::function<void(const DualState&, const EpochInfo&)>;

struct FitResult {
  DualState state;
  Eigen::MatrixXd theta;
  ConvergenceReport report;
};

/// Relative duality gap with the max(1, |P|) denominator.
double relative_gap(double primal, double dual);

/// True when the cubic closed form applies (pnorm with k = 1).
bool cubic_applicable(const Problem& problem);

/// SDCA epochs until the relative gap reaches config.gap_tol or max_epochs.
FitResult solve(const Problem& problem, const SolverConfig& config,
                const EpochObserver& observer = {});

}  // namespace okl
