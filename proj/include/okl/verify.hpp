#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace okl {

/// One oracle check: `worst` is the largest error over all cases; the check passes when it
/// is strictly below `tolerance`.
struct CheckOutcome {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyConfig {
  std::uint64_t seed = 0;
  /// Multiplies every tolerance (0 makes every check fail).
  double tolerance_scale = 1.0;
  int theta_cases = 50;
  int psd_cases = 200;
  int gradient_points = 100;
  int subproblem_cases = 500;
  int primal_instances = 20;
};

/// Closed-form output kernel vs numerical PSD-constrained maximisation (pnorm k = 1, 2, 4;
/// T = 2, 3, 4): max elementwise error (tolerance 1e-4) and relative objective error (1e-6).
std::vector<CheckOutcome> check_theta_maximizer(const VerifyConfig& config);

/// Most negative eigenvalue of theta_from_rho over random PSD inputs (T = 2..10) for every
/// regularizer, absolute (tolerance 1e-8).
CheckOutcome check_psd_preservation(const VerifyConfig& config);

/// Analytic dual gradient vs central differences at interior points, per loss/regularizer
/// pair; worst relative error (tolerance 1e-5).
CheckOutcome check_dual_gradient(const VerifyConfig& config);

/// |delta_cubic - delta_newton| on random pnorm k = 1 subproblems, hinge and squared
/// (tolerance 1e-8).
CheckOutcome check_cubic_newton(const VerifyConfig& config);

/// Relative difference between the solver's converged primal and the reference primal
/// solver on tiny instances (tolerance 1e-3).
CheckOutcome check_primal_oracle(const VerifyConfig& config);

std::vector<CheckOutcome> run_verify(const VerifyConfig& config);

}  // namespace okl
