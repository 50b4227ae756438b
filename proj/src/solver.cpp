#include "okl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "okl/error.hpp"

namespace okl {

namespace {

// Box of alpha_i implied by the conjugate's domain.
std::pair<double, double> alpha_box(const LossSpec& loss, double y, double C) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (loss.kind) {
    case LossSpec::Kind::hinge:
      return y > 0.0 ? std::pair{0.0, C} : std::pair{-C, 0.0};
    case LossSpec::Kind::eps_svr:
      return {-C, C};
    case LossSpec::Kind::squared:
      break;
  }
  return {-inf, inf};
}

// A(j, t_j) = alpha_j.
Eigen::MatrixXd task_embedding(const Problem& problem, const Eigen::VectorXd& alpha) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(problem.size(), problem.num_tasks);
  for (Eigen::Index j = 0; j < problem.size(); ++j) {
    a(j, problem.tasks[static_cast<std::size_t>(j)]) = alpha(j);
  }
  return a;
}

double conjugate_sum(const Problem& problem, const Eigen::VectorXd& alpha) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    total += conjugate(problem.loss, problem.labels[static_cast<std::size_t>(i)],
                       -alpha(i) / problem.C);
  }
  return total;
}

double dual_from(const Problem& problem, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& c) {
  return -problem.C * conjugate_sum(problem, alpha) - dual_penalty(problem.reg, c);
}

Eigen::VectorXd predictions_from(const Problem& problem, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& theta) {
  Eigen::VectorXd f(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    f(i) = B.row(i).dot(theta.row(problem.tasks[static_cast<std::size_t>(i)]));
  }
  return f;
}

}  // namespace

Problem Problem::make(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                      const LossSpec& loss, const RegularizerSpec& reg, double C) {
  if (!gram) throw ValidationError("missing Gram matrix");
  if (data.size() == 0) throw ValidationError("empty training set");
  if (gram->size() != static_cast<Eigen::Index>(data.size())) {
    throw ValidationError("Gram matrix is " + std::to_string(gram->size()) + "x" +
                          std::to_string(gram->size()) + " but there are " +
                          std::to_string(data.size()) + " samples");
  }
  if (data.num_tasks < 1) throw ValidationError("need at least one task");
  if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("C must be positive and finite");
  reg.validate();
  if (loss.kind == LossSpec::Kind::eps_svr && !(loss.epsilon >= 0.0)) {
    throw ValidationError("eps-svr loss needs epsilon >= 0");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.tasks[i] < 0 || data.tasks[i] >= data.num_tasks) {
      throw ValidationError("sample " + std::to_string(i + 1) + " has task index out of range");
    }
    validate_label(loss, data.labels[i]);
  }
  Problem p;
  p.tasks = data.tasks;
  p.labels = data.labels;
  p.num_tasks = data.num_tasks;
  p.gram = std::move(gram);
  p.loss = loss;
  p.reg = reg;
  p.C = C;
  return p;
}

void SolverConfig::validate() const {
  if (!(gap_tol > 0.0)) throw ValidationError("gap tolerance must be positive");
  if (max_epochs < 1) throw ValidationError("max epochs must be at least 1");
  if (!(newton_tol > 0.0)) throw ValidationError("Newton tolerance must be positive");
  if (newton_max_iter < 1) throw ValidationError("Newton iteration cap must be at least 1");
  if (gap_check_every < 1) throw ValidationError("gap check interval must be at least 1");
  if (!(cache_tol > 0.0)) throw ValidationError("cache tolerance must be positive");
}

DualState init_state(const Problem& problem, const SolverConfig& config) {
  DualState s;
  s.alpha = Eigen::VectorXd::Zero(problem.size());
  s.B = Eigen::MatrixXd::Zero(problem.size(), problem.num_tasks);
  s.c = Eigen::MatrixXd::Zero(problem.num_tasks, problem.num_tasks);
  s.epoch = 0;
  s.rng = Rng(config.seed);
  return s;
}

void apply_update(const Problem& problem, DualState& state, Eigen::Index i, double delta) {
  if (delta == 0.0) return;
  const Eigen::Index r = problem.tasks[static_cast<std::size_t>(i)];
  const double a = problem.kernel()(i, i);
  for (Eigen::Index s = 0; s < problem.num_tasks; ++s) {
    if (s == r) continue;
    state.c(r, s) += delta * state.B(i, s);
    state.c(s, r) = state.c(r, s);
  }
  state.c(r, r) += (2.0 * state.B(i, r) + delta * a) * delta;
  state.B.col(r) += delta * problem.kernel().col(i);

  const auto [lo, hi] = alpha_box(problem.loss, problem.labels[static_cast<std::size_t>(i)], problem.C);
  state.alpha(i) = std::clamp(state.alpha(i) + delta, lo, hi);
}

double dual_objective(const Problem& problem, const DualState& state) {
  return dual_from(problem, state.alpha, state.c);
}

Eigen::VectorXd dual_gradient(const Problem& problem, const DualState& state) {
  const Eigen::MatrixXd theta = theta_from_rho(problem.reg, state.c);
  const Eigen::VectorXd f = predictions_from(problem, state.B, theta);
  Eigen::VectorXd g(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    g(i) = conjugate_derivative(problem.loss, problem.labels[static_cast<std::size_t>(i)],
                                -state.alpha(i) / problem.C) -
           f(i);
  }
  return g;
}

PrimalEvaluation primal_objective(const Problem& problem, const DualState& state) {
  PrimalEvaluation out;
  out.theta = theta_from_rho(problem.reg, state.c);
  out.predictions = predictions_from(problem, state.B, out.theta);
  double data_fit = 0.0;
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    data_fit += loss(problem.loss, problem.labels[static_cast<std::size_t>(i)], out.predictions(i));
  }
  out.value = problem.C * data_fit + 0.5 * out.theta.cwiseProduct(state.c).sum() +
              problem.reg.lambda * v_of_theta(problem.reg, out.theta);
  return out;
}

CacheSnapshot recompute_caches(const Problem& problem, const Eigen::VectorXd& alpha) {
  CacheSnapshot snap;
  snap.B = Eigen::MatrixXd::Zero(problem.size(), problem.num_tasks);
  for (Eigen::Index j = 0; j < problem.size(); ++j) {
    if (alpha(j) != 0.0) {
      snap.B.col(problem.tasks[static_cast<std::size_t>(j)]) += alpha(j) * problem.kernel().col(j);
    }
  }
  snap.c = task_embedding(problem, alpha).transpose() * snap.B;
  // Exact symmetry; the product is only symmetric up to rounding.
  snap.c = 0.5 * (snap.c + snap.c.transpose()).eval();
  return snap;
}

CacheDrift cache_drift(const Problem& problem, const DualState& state) {
  const CacheSnapshot fresh = recompute_caches(problem, state.alpha);
  CacheDrift d;
  if (state.B.size() > 0) d.B = (fresh.B - state.B).cwiseAbs().maxCoeff();
  if (state.c.size() > 0) d.c = (fresh.c - state.c).cwiseAbs().maxCoeff();
  return d;
}

double dual_objective_at(const Problem& problem, const Eigen::VectorXd& alpha) {
  if (alpha.size() != problem.size()) throw std::invalid_argument("alpha has the wrong length");
  return dual_from(problem, alpha, recompute_caches(problem, alpha).c);
}

double relative_gap(double primal, double dual) {
  return (primal - dual) / std::max(1.0, std::abs(primal));
}

bool cubic_applicable(const Problem& problem) {
  return problem.reg.kind == RegularizerSpec::Kind::pnorm && problem.reg.k == 1;
}

FitResult solve(const Problem& problem, const SolverConfig& config, const EpochObserver& observer) {
  config.validate();
  bool use_cubic = false;
  switch (config.subproblem) {
    case SubproblemMethod::cubic:
      if (!cubic_applicable(problem)) {
        throw ValidationError("the cubic subproblem solver needs the pnorm regularizer with k = 1");
      }
      use_cubic = true;
      break;
    case SubproblemMethod::automatic:
      use_cubic = cubic_applicable(problem);
      break;
    case SubproblemMethod::newton:
      break;
  }

  FitResult result{init_state(problem, config), {}, {}};
  DualState& state = result.state;
  ConvergenceReport& report = result.report;
  const auto n = static_cast<std::size_t>(problem.size());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double last_checked_dual = -std::numeric_limits<double>::infinity();
  for (long epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.sampling == Sampling::permutation) {
      state.rng.shuffle(order);
    } else {
      for (auto& idx : order) idx = static_cast<Eigen::Index>(state.rng.below(n));
    }
    for (const Eigen::Index i : order) {
      const double delta = use_cubic ? solve_subproblem_cubic(problem, state, i)
                                     : solve_subproblem_newton(problem, state, i, config);
      apply_update(problem, state, i, delta);
    }
    state.epoch = epoch;

    EpochInfo info;
    info.epoch = epoch;
    info.dual = dual_objective(problem, state);
    if (!std::isfinite(info.dual)) throw NumericalError("dual objective became non-finite");

    const bool check = epoch % config.gap_check_every == 0 || epoch == config.max_epochs;
    bool stop = false;
    if (check) {
      const CacheDrift drift = cache_drift(problem, state);
      info.drift = drift;
      const double scale = std::max({1.0, state.c.cwiseAbs().maxCoeff(), state.B.cwiseAbs().maxCoeff()});
      if (drift.max() > config.cache_tol * scale) {
        throw NumericalError("cache drift " + std::to_string(drift.max()) + " exceeds tolerance");
      }
      const PrimalEvaluation primal = primal_objective(problem, state);
      GapCheck gap{epoch, primal.value, info.dual, relative_gap(primal.value, info.dual)};
      info.gap = gap;
      report.history.push_back(gap);
      report.primal = gap.primal;
      report.dual = gap.dual;
      report.relative_gap = gap.relative_gap;
      if (std::isfinite(primal.value)) {
        if (gap.relative_gap <= config.gap_tol) {
          report.stop_reason = "gap";
          stop = true;
        } else if (config.primal_target && primal.value <= *config.primal_target) {
          report.stop_reason = "target";
          stop = true;
        }
      } else if (info.dual - last_checked_dual < 1e-8 * (1.0 + std::abs(info.dual))) {
        report.stop_reason = "dual-progress";
        stop = true;
      }
      last_checked_dual = info.dual;
    }
    if (observer) observer(state, info);
    report.epochs = epoch;
    if (stop) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) report.stop_reason = "max-epochs";
  result.theta = theta_from_rho(problem.reg, state.c);
  return result;
}

}  // namespace okl
