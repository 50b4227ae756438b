#include "okl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "okl/kernels.hpp"
#include "okl/oracle.hpp"
#include "okl/random.hpp"
#include "okl/solver.hpp"

namespace okl {

namespace {

// Random PSD matrix with entries scaled into [-1, 1].
Eigen::MatrixXd random_psd(Rng& rng, int T) {
  const int rank = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
  Eigen::MatrixXd a(T, rank);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < rank; ++j) a(i, j) = rng.normal();
  }
  Eigen::MatrixXd m = a * a.transpose();
  m /= m.cwiseAbs().maxCoeff();
  return 0.5 * (m + m.transpose());
}

std::vector<RegularizerSpec> all_regularizers(double lambda) {
  return {RegularizerSpec::pnorm(1, lambda), RegularizerSpec::pnorm(2, lambda),
          RegularizerSpec::pnorm(4, lambda), RegularizerSpec::entropy(lambda),
          RegularizerSpec::cosh(lambda)};
}

std::string reg_label(const RegularizerSpec& r) {
  switch (r.kind) {
    case RegularizerSpec::Kind::pnorm: return "pnorm k=" + std::to_string(r.k);
    case RegularizerSpec::Kind::entropy: return "entropy";
    case RegularizerSpec::Kind::cosh: return "cosh";
  }
  return "";
}

std::string loss_label(const LossSpec& l) {
  switch (l.kind) {
    case LossSpec::Kind::hinge: return "hinge";
    case LossSpec::Kind::squared: return "squared";
    case LossSpec::Kind::eps_svr: return "eps_svr";
  }
  return "";
}

// Small dense problem with random tasks, Gaussian inputs and an rbf Gram matrix.
Dataset random_dataset(Rng& rng, int n, int T, const LossSpec& loss) {
  Dataset d;
  d.num_tasks = T;
  for (int t = 0; t < T; ++t) d.task_ids.push_back(t + 1);
  for (int i = 0; i < n; ++i) {
    // Every task gets a sample before tasks repeat.
    d.tasks.push_back(i < T ? i : static_cast<int>(rng.below(static_cast<std::uint64_t>(T))));
    SparseVector x;
    for (int f = 1; f <= 3; ++f) x.push_back({f, rng.normal()});
    d.features.push_back(std::move(x));
    d.labels.push_back(loss.is_classification() ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : rng.normal());
  }
  return d;
}

CheckOutcome finish(CheckOutcome c, double scale) {
  c.tolerance *= scale;
  c.passed = c.worst < c.tolerance;
  return c;
}

}  // namespace

std::vector<CheckOutcome> check_theta_maximizer(const VerifyConfig& config) {
  Rng rng(config.seed);
  CheckOutcome entries{"theta-maximizer-entries", 0, 0.0, 1e-4, false, ""};
  CheckOutcome value{"theta-maximizer-value", 0, 0.0, 1e-6, false, ""};
  int unconverged = 0;
  for (int trial = 0; trial < config.theta_cases; ++trial) {
    const int T = 2 + trial % 3;
    const Eigen::MatrixXd rho = random_psd(rng, T);
    for (int k : {1, 2, 4}) {
      const RegularizerSpec spec = RegularizerSpec::pnorm(k, 1.0);
      // With lambda = 1 the inner-product scale is 2 rho.
      const Eigen::MatrixXd analytic = theta_from_rho(spec, 2.0 * rho);
      const double closed = dual_penalty(spec, 2.0 * rho);
      const oracle::MaximizeResult num = oracle::maximize_conjugate(rho, spec);
      if (!num.converged) ++unconverged;
      entries.worst = std::max(entries.worst, (analytic - num.theta).cwiseAbs().maxCoeff());
      value.worst = std::max(value.worst, std::abs(num.value - closed) / std::max(std::abs(closed), 1e-300));
      ++entries.cases;
      ++value.cases;
    }
  }
  entries.detail = std::to_string(unconverged) + " numerical runs hit the iteration cap";
  return {finish(entries, config.tolerance_scale), finish(value, config.tolerance_scale)};
}

CheckOutcome check_psd_preservation(const VerifyConfig& config) {
  Rng rng(config.seed + 1);
  CheckOutcome c{"psd-preservation", 0, 0.0, 1e-8, false, ""};
  double worst_seen = 0.0;
  std::string where;
  for (int trial = 0; trial < config.psd_cases; ++trial) {
    const int T = 2 + trial % 9;
    const double scale = rng.uniform(0.1, 3.0);
    const Eigen::MatrixXd inner = scale * random_psd(rng, T);
    for (const auto& reg : all_regularizers(rng.uniform(0.5, 2.0))) {
      const Eigen::MatrixXd theta = theta_from_rho(reg, inner);
      const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(theta, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .minCoeff();
      if (-min_eig > worst_seen) {
        worst_seen = -min_eig;
        where = reg_label(reg);
      }
      ++c.cases;
    }
  }
  c.worst = std::max(0.0, worst_seen);
  c.detail = where.empty() ? "no negative eigenvalue" : "most negative eigenvalue with " + where;
  return finish(c, config.tolerance_scale);
}

CheckOutcome check_dual_gradient(const VerifyConfig& config) {
  Rng rng(config.seed + 2);
  CheckOutcome c{"dual-gradient", 0, 0.0, 1e-5, false, ""};
  const std::vector<LossSpec> losses{LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.1)};
  for (const auto& loss : losses) {
    for (const auto& reg_kind : all_regularizers(1.0)) {
      double pair_worst = 0.0;
      for (int point = 0; point < config.gradient_points; ++point) {
        const int T = 1 + static_cast<int>(rng.below(3));
        const int n = T + 1 + static_cast<int>(rng.below(4));
        const Dataset d = random_dataset(rng, n, T, loss);
        RegularizerSpec reg = reg_kind;
        reg.lambda = rng.uniform(0.5, 2.0);
        const double C = rng.uniform(0.2, 1.0);
        const auto gram = std::make_shared<GramMatrix>(okl::gram(d, KernelSpec::rbf(0.5)));
        const Problem p = Problem::make(d, gram, loss, reg, C);

        // Interior point: away from the box faces and from the eps-svr kink.
        Eigen::VectorXd alpha(n);
        for (int i = 0; i < n; ++i) {
          const double mag = rng.uniform(0.05 * C, 0.95 * C);
          if (loss.kind == LossSpec::Kind::hinge) {
            alpha(i) = d.labels[static_cast<std::size_t>(i)] * mag;
          } else if (loss.kind == LossSpec::Kind::eps_svr) {
            alpha(i) = rng.uniform() < 0.5 ? -mag : mag;
          } else {
            alpha(i) = 0.5 * C * rng.normal();
          }
        }
        DualState state;
        state.alpha = alpha;
        const CacheSnapshot snap = recompute_caches(p, alpha);
        state.B = snap.B;
        state.c = snap.c;
        const Eigen::VectorXd g = dual_gradient(p, state);
        const Eigen::VectorXd fd = oracle::finite_diff_grad(
            [&](const Eigen::VectorXd& a) { return dual_objective_at(p, a); }, alpha, 1e-5 * C);
        pair_worst = std::max(pair_worst, (fd - g).norm() / std::max(g.norm(), 1e-12));
        ++c.cases;
      }
      if (pair_worst >= c.worst) {
        c.worst = pair_worst;
        c.detail = "worst pair " + loss_label(loss) + " / " + reg_label(reg_kind);
      }
    }
  }
  return finish(c, config.tolerance_scale);
}

CheckOutcome check_cubic_newton(const VerifyConfig& config) {
  Rng rng(config.seed + 3);
  CheckOutcome c{"cubic-vs-newton", 0, 0.0, 1e-8, false, ""};
  SolverConfig newton;
  newton.newton_tol = 1e-14;
  newton.newton_max_iter = 200;
  for (int trial = 0; trial < config.subproblem_cases; ++trial) {
    const LossSpec loss = trial % 2 == 0 ? LossSpec::hinge() : LossSpec::squared();
    const int T = 1 + static_cast<int>(rng.below(4));
    const int n = T + 2 + static_cast<int>(rng.below(15));
    const Dataset d = random_dataset(rng, n, T, loss);
    const double C = rng.uniform(0.1, 10.0);
    const RegularizerSpec reg = RegularizerSpec::pnorm(1, rng.uniform(0.1, 10.0));
    const auto gram = std::make_shared<GramMatrix>(okl::gram(d, KernelSpec::rbf(rng.uniform(0.1, 2.0))));
    const Problem p = Problem::make(d, gram, loss, reg, C);
    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) {
      if (loss.kind == LossSpec::Kind::hinge) {
        // Mix of free coordinates and coordinates at either face of the box.
        const double u = rng.uniform();
        const double mag = u < 0.2 ? 0.0 : u < 0.3 ? C : rng.uniform(0.0, C);
        alpha(i) = d.labels[static_cast<std::size_t>(i)] * mag;
      } else {
        alpha(i) = C * rng.normal();
      }
    }
    DualState state;
    state.alpha = alpha;
    const CacheSnapshot snap = recompute_caches(p, alpha);
    state.B = snap.B;
    state.c = snap.c;
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    const double dc = solve_subproblem_cubic(p, state, i);
    const double dn = solve_subproblem_newton(p, state, i, newton);
    c.worst = std::max(c.worst, std::abs(dc - dn));
    ++c.cases;
  }
  return finish(c, config.tolerance_scale);
}

CheckOutcome check_primal_oracle(const VerifyConfig& config) {
  Rng rng(config.seed + 4);
  CheckOutcome c{"primal-oracle", 0, 0.0, 1e-3, false, ""};
  const std::vector<LossSpec> losses{LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.1)};
  int unconverged = 0;
  for (int inst = 0; inst < config.primal_instances; ++inst) {
    const LossSpec& loss = losses[static_cast<std::size_t>(inst) % losses.size()];
    const auto regs = all_regularizers(rng.uniform(0.5, 2.0));
    const RegularizerSpec& reg = regs[static_cast<std::size_t>(inst / 3) % regs.size()];
    const int T = 1 + inst % 3;
    const int n = std::min(12, T * (3 + static_cast<int>(rng.below(2))));
    const Dataset d = random_dataset(rng, n, T, loss);
    const double C = rng.uniform(0.5, 2.0);
    const auto gram = std::make_shared<GramMatrix>(okl::gram(d, KernelSpec::rbf(0.5)));
    SolverConfig sc;
    sc.gap_tol = 1e-7;
    sc.max_epochs = 100000;
    sc.seed = config.seed;
    const FitResult fit = solve(Problem::make(d, gram, loss, reg, C), sc);
    const oracle::PrimalResult ref = oracle::solve_primal_numeric(d, *gram, loss, reg, C);
    if (!ref.converged) ++unconverged;
    const double rel = std::abs(fit.report.primal - ref.objective) / std::max(1.0, std::abs(ref.objective));
    if (rel >= c.worst) {
      c.worst = rel;
      c.detail = "worst instance " + loss_label(loss) + " / " + reg_label(reg);
    }
    ++c.cases;
  }
  if (unconverged > 0) c.detail += "; " + std::to_string(unconverged) + " reference runs hit the cap";
  return finish(c, config.tolerance_scale);
}

std::vector<CheckOutcome> run_verify(const VerifyConfig& config) {
  std::vector<CheckOutcome> out = check_theta_maximizer(config);
  out.push_back(check_psd_preservation(config));
  out.push_back(check_dual_gradient(config));
  out.push_back(check_cubic_newton(config));
  out.push_back(check_primal_oracle(config));
  return out;
}

}  // namespace okl
