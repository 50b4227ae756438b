#include <cmath>
#include <limits>
#include <memory>

#include <gtest/gtest.h>

#include "okl/error.hpp"
#include "okl/kernels.hpp"
#include "okl/oracle.hpp"
#include "okl/solver.hpp"

using namespace okl;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset fixture(int T, int m, LabelKind kind, std::uint64_t seed, double noise = 0.3) {
  SynthConfig cfg;
  cfg.num_tasks = T;
  cfg.clusters.resize(T > 1 ? 2 : 1);
  for (int t = 0; t < T; ++t) cfg.clusters[static_cast<std::size_t>(t % cfg.clusters.size())].push_back(t);
  cfg.samples_per_task = m;
  cfg.dim = 4;
  cfg.noise = noise;
  cfg.seed = seed;
  cfg.labels = kind;
  return synth_clustered(cfg).data;
}

Problem make_problem(const Dataset& d, const LossSpec& loss, const RegularizerSpec& reg, double C,
                     const KernelSpec& kernel = KernelSpec::rbf(0.3)) {
  return Problem::make(d, std::make_shared<GramMatrix>(gram(d, kernel)), loss, reg, C);
}

// A state with the given alpha and freshly computed caches.
DualState state_at(const Problem& p, const Eigen::VectorXd& alpha) {
  DualState s = init_state(p, SolverConfig{});
  s.alpha = alpha;
  const CacheSnapshot snap = recompute_caches(p, alpha);
  s.B = snap.B;
  s.c = snap.c;
  return s;
}

// Random alpha strictly inside the loss box.
Eigen::VectorXd interior_alpha(const Problem& p, Rng& rng) {
  Eigen::VectorXd a(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double y = p.labels[static_cast<std::size_t>(i)];
    switch (p.loss.kind) {
      case LossSpec::Kind::hinge:
        a(i) = y * p.C * rng.uniform(0.05, 0.95);
        break;
      case LossSpec::Kind::squared:
        a(i) = p.C * rng.uniform(-2, 2);
        break;
      case LossSpec::Kind::eps_svr:
        a(i) = p.C * (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 0.95);
        break;
    }
  }
  return a;
}

Problem single_sample() {
  Dataset d;
  d.num_tasks = 1;
  d.task_ids = {1};
  d.tasks = {0};
  d.labels = {1.0};
  d.features = {{{1, 1.0}}};
  return Problem::make(d, std::make_shared<GramMatrix>(Eigen::MatrixXd::Ones(1, 1)), LossSpec::hinge(),
                       RegularizerSpec::pnorm(1, 1.0), 1.0);
}

}  // namespace

TEST(Problem, Validation) {
  Dataset d = fixture(2, 5, LabelKind::regression, 1);
  EXPECT_THROW(make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), 1), ValidationError);
  EXPECT_NO_THROW(make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 1));
  EXPECT_THROW(make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 0), ValidationError);
  auto small = std::make_shared<GramMatrix>(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW(Problem::make(d, small, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 1), ValidationError);
  SolverConfig bad;
  bad.gap_tol = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Init, ZeroState) {
  const Dataset d = fixture(3, 6, LabelKind::classification, 2);
  for (const LossSpec& loss : {LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.1)}) {
    const Problem p = make_problem(d, loss, RegularizerSpec::pnorm(2, 1), 1.5);
    const DualState s = init_state(p, SolverConfig{});
    EXPECT_EQ(dual_objective(p, s), 0.0);
    EXPECT_EQ(primal_objective(p, s).theta, Eigen::MatrixXd::Zero(3, 3));
    EXPECT_EQ(cache_drift(p, s).max(), 0.0);
  }
  const Problem ent = make_problem(d, LossSpec::hinge(), RegularizerSpec::entropy(0.5), 1);
  EXPECT_DOUBLE_EQ(dual_objective(ent, init_state(ent, SolverConfig{})), -0.5 * 9);
}

TEST(Primal, AtZeroHingeCostsCn) {
  const Dataset d = fixture(2, 7, LabelKind::classification, 3);
  const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), 2.5);
  EXPECT_DOUBLE_EQ(primal_objective(p, init_state(p, SolverConfig{})).value, 2.5 * 14);
}

TEST(Subproblem, SingleSampleValue) {
  const Problem p = single_sample();
  const DualState s = init_state(p, SolverConfig{});
  for (double d : {0.0, 0.3, 0.7, 1.0}) {
    EXPECT_NEAR(subproblem_value(p, s, 0, d), -d + std::pow(d, 4) / 8, 1e-15);
  }
  EXPECT_EQ(subproblem_value(p, s, 0, 1.1), kInf);
  EXPECT_EQ(subproblem_value(p, s, 0, -0.1), kInf);
}

TEST(Subproblem, SingleSampleClipsToBox) {
  const Problem p = single_sample();
  const DualState s = init_state(p, SolverConfig{});
  EXPECT_EQ(solve_subproblem_newton(p, s, 0, SolverConfig{}), 1.0);
  EXPECT_EQ(solve_subproblem_cubic(p, s, 0), 1.0);
}

TEST(Subproblem, UnclippedRoot) {
  // Same instance with C = 2: value(delta) = -delta/2 + delta^4/16 on [0, 2], whose
  // stationary point 2^(1/3) lies inside the box.
  Dataset d;
  d.num_tasks = 1;
  d.task_ids = {1};
  d.tasks = {0};
  d.labels = {1.0};
  d.features = {{{1, 1.0}}};
  const Problem p = Problem::make(d, std::make_shared<GramMatrix>(Eigen::MatrixXd::Ones(1, 1)),
                                  LossSpec::hinge(), RegularizerSpec::pnorm(1, 1.0), 2.0);
  const DualState s = init_state(p, SolverConfig{});
  const double expected = std::cbrt(2.0);
  EXPECT_NEAR(solve_subproblem_newton(p, s, 0, SolverConfig{}), expected, 1e-10);
  EXPECT_NEAR(solve_subproblem_cubic(p, s, 0), expected, 1e-12);
}

TEST(Subproblem, Convex) {
  Rng rng(5);
  const Dataset d = fixture(3, 5, LabelKind::classification, 4);
  for (const RegularizerSpec& reg : {RegularizerSpec::pnorm(1, 1), RegularizerSpec::pnorm(3, 0.5),
                                     RegularizerSpec::entropy(1), RegularizerSpec::cosh(2)}) {
    const Problem p = make_problem(d, LossSpec::hinge(), reg, 1.0);
    const DualState s = state_at(p, interior_alpha(p, rng));
    for (int rep = 0; rep < 200; ++rep) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.size())));
      const ConjugateTerm t = conjugate_term(p.loss, p.labels[static_cast<std::size_t>(i)], s.alpha(i), p.C);
      const double x = rng.uniform(t.lower(), t.upper());
      const double y = rng.uniform(t.lower(), t.upper());
      const double mid = subproblem_value(p, s, i, 0.5 * (x + y));
      const double avg = 0.5 * (subproblem_value(p, s, i, x) + subproblem_value(p, s, i, y));
      EXPECT_LE(mid, avg + 1e-12 * std::max(1.0, std::abs(avg)));
    }
  }
}

TEST(Subproblem, NewtonMatchesGridSearch) {
  Rng rng(6);
  const Dataset d = fixture(2, 6, LabelKind::regression, 5);
  for (const LossSpec& loss : {LossSpec::squared(), LossSpec::eps_svr(0.2)}) {
    for (const RegularizerSpec& reg : {RegularizerSpec::pnorm(2, 1), RegularizerSpec::cosh(1)}) {
      const Problem p = make_problem(d, loss, reg, 1.0);
      const DualState s = state_at(p, 0.5 * interior_alpha(p, rng));
      for (Eigen::Index i = 0; i < p.size(); i += 3) {
        const double delta = solve_subproblem_newton(p, s, i, SolverConfig{});
        const double best = subproblem_value(p, s, i, delta);
        for (double g = delta - 1e-3; g <= delta + 1e-3; g += 1e-6) {
          EXPECT_GE(subproblem_value(p, s, i, g), best - 1e-12 * std::max(1.0, std::abs(best)));
        }
      }
    }
  }
}

TEST(Subproblem, FixedPointGivesZeroStep) {
  const Dataset d = fixture(2, 8, LabelKind::classification, 7);
  const Problem p = make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(2, 1), 1.0);
  DualState s = init_state(p, SolverConfig{});
  const double first = solve_subproblem_newton(p, s, 3, SolverConfig{});
  apply_update(p, s, 3, first);
  EXPECT_NEAR(solve_subproblem_newton(p, s, 3, SolverConfig{}), 0.0, 1e-9);
}

TEST(Subproblem, CubicDegenerateKernel) {
  Dataset d;
  d.num_tasks = 1;
  d.task_ids = {1};
  d.tasks = {0};
  d.labels = {0.7};
  d.features = {{}};
  const Problem p = Problem::make(d, std::make_shared<GramMatrix>(Eigen::MatrixXd::Zero(1, 1)),
                                  LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 2.0);
  const DualState s = init_state(p, SolverConfig{});
  // (a + delta)^2 / (4 C^2) - y (a + delta) / C is minimised at a + delta = 2 C y.
  EXPECT_NEAR(solve_subproblem_cubic(p, s, 0), 2 * 2.0 * 0.7, 1e-12);
  EXPECT_NEAR(solve_subproblem_newton(p, s, 0, SolverConfig{}), 2 * 2.0 * 0.7, 1e-9);
}

TEST(Subproblem, CubicAgreesWithNewton) {
  Rng rng(8);
  SolverConfig tight;
  tight.newton_tol = 1e-14;
  for (const LossSpec& loss : {LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.3)}) {
    const Dataset d = fixture(3, 5, LabelKind::classification, 9);
    const Problem p = make_problem(d, loss, RegularizerSpec::pnorm(1, 0.7), 1.3);
    for (int rep = 0; rep < 20; ++rep) {
      const DualState s = state_at(p, interior_alpha(p, rng));
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        EXPECT_NEAR(solve_subproblem_cubic(p, s, i), solve_subproblem_newton(p, s, i, tight), 1e-8);
      }
    }
  }
  const Problem k2 = make_problem(fixture(2, 3, LabelKind::classification, 1), LossSpec::hinge(),
                                  RegularizerSpec::pnorm(2, 1), 1);
  EXPECT_THROW(solve_subproblem_cubic(k2, init_state(k2, SolverConfig{}), 0), std::invalid_argument);
}

TEST(Subproblem, WorkIndependentOfSampleCount) {
  for (int m : {5, 50}) {
    const Dataset d = fixture(4, m, LabelKind::classification, 10);
    const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), 1);
    const DualState s = init_state(p, SolverConfig{});
    SubproblemStats cubic;
    solve_subproblem_cubic(p, s, 0, &cubic);
    // One pass for the coefficients plus one objective evaluation per candidate.
    EXPECT_EQ(cubic.cell_evaluations % 4, 0);
    EXPECT_LE(cubic.cell_evaluations, 4L * 12);
    SubproblemStats newton;
    solve_subproblem_newton(p, s, 0, SolverConfig{}, &newton);
    EXPECT_EQ(newton.cell_evaluations % 4, 0);
    EXPECT_LE(newton.cell_evaluations, 4L * (3L * newton.iterations + 8));
  }
}

TEST(ApplyUpdate, MatchesRecomputation) {
  Rng rng(12);
  const Dataset d = fixture(3, 6, LabelKind::classification, 11);
  const Problem p = make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 1);
  DualState s = init_state(p, SolverConfig{});
  const DualState before = s;
  apply_update(p, s, 2, 0.0);
  EXPECT_EQ(s.alpha, before.alpha);
  EXPECT_EQ(s.B, before.B);
  EXPECT_EQ(s.c, before.c);
  for (int rep = 0; rep < 100; ++rep) {
    apply_update(p, s, static_cast<Eigen::Index>(rng.below(18)), rng.normal());
    EXPECT_LE(cache_drift(p, s).max(), 1e-8);
  }
}

TEST(ApplyUpdate, SuccessiveUpdatesMatchCombined) {
  const Dataset d = fixture(2, 4, LabelKind::classification, 13);
  const Problem p = make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 1);
  DualState a = init_state(p, SolverConfig{});
  apply_update(p, a, 1, 0.4);
  apply_update(p, a, 6, -0.25);
  DualState b = init_state(p, SolverConfig{});
  apply_update(p, b, 6, -0.25);
  apply_update(p, b, 1, 0.4);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p.size());
  alpha(1) = 0.4;
  alpha(6) = -0.25;
  const CacheSnapshot snap = recompute_caches(p, alpha);
  EXPECT_LE((a.c - snap.c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((b.c - snap.c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.B - snap.B).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dual, ExactStepNeverDecreases) {
  Rng rng(14);
  const Dataset d = fixture(3, 6, LabelKind::classification, 15);
  for (const RegularizerSpec& reg : {RegularizerSpec::pnorm(1, 1), RegularizerSpec::pnorm(4, 1),
                                     RegularizerSpec::entropy(1), RegularizerSpec::cosh(1)}) {
    const Problem p = make_problem(d, LossSpec::hinge(), reg, 1);
    DualState s = init_state(p, SolverConfig{});
    double dual = dual_objective(p, s);
    for (int rep = 0; rep < 200; ++rep) {
      const auto i = static_cast<Eigen::Index>(rng.below(18));
      apply_update(p, s, i, solve_subproblem_newton(p, s, i, SolverConfig{}));
      const double next = dual_objective(p, s);
      EXPECT_GE(next, dual - 1e-12 * std::max(1.0, std::abs(dual)));
      dual = next;
    }
  }
}

TEST(Dual, GradientMatchesFiniteDifferences) {
  Rng rng(16);
  const Dataset cls = fixture(2, 4, LabelKind::classification, 17);
  const Dataset reg_data = fixture(2, 4, LabelKind::regression, 17);
  for (const LossSpec& loss : {LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.2)}) {
    for (const RegularizerSpec& reg : {RegularizerSpec::pnorm(1, 1), RegularizerSpec::pnorm(2, 1),
                                       RegularizerSpec::entropy(2), RegularizerSpec::cosh(2)}) {
      const Problem p = make_problem(loss.is_classification() ? cls : reg_data, loss, reg, 0.8);
      for (int rep = 0; rep < 5; ++rep) {
        const Eigen::VectorXd alpha = 0.5 * interior_alpha(p, rng);
        const Eigen::VectorXd g = dual_gradient(p, state_at(p, alpha));
        const Eigen::VectorXd fd = oracle::finite_diff_grad(
            [&](const Eigen::VectorXd& a) { return dual_objective_at(p, a); }, alpha, 1e-5 * p.C);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          EXPECT_LE(std::abs(g(i) - fd(i)), 1e-5 * std::max(1.0, std::abs(fd(i))));
        }
      }
    }
  }
}

TEST(Fit, SeparableTwoTaskHinge) {
  SynthConfig cfg;
  cfg.num_tasks = 2;
  cfg.clusters = {{0}, {1}};
  cfg.samples_per_task = 30;
  cfg.dim = 3;
  cfg.seed = 21;
  const Dataset d = synth_clustered(cfg).data;
  const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), 1, KernelSpec::linear());
  SolverConfig config;
  config.max_epochs = 200;
  const FitResult fit = solve(p, config);
  EXPECT_TRUE(fit.report.converged);
  EXPECT_EQ(fit.report.stop_reason, "gap");
  EXPECT_LE(fit.report.relative_gap, 1e-3);
  for (const GapCheck& g : fit.report.history) EXPECT_GE(g.primal - g.dual, 0.0);
}

TEST(Fit, DeterministicTrajectory) {
  const Dataset d = fixture(3, 10, LabelKind::classification, 22);
  const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(2, 1), 1);
  for (Sampling sampling : {Sampling::permutation, Sampling::uniform}) {
    SolverConfig config;
    config.seed = 99;
    config.sampling = sampling;
    std::vector<Eigen::VectorXd> first, second;
    solve(p, config, [&](const DualState& s, const EpochInfo&) { first.push_back(s.alpha); });
    solve(p, config, [&](const DualState& s, const EpochInfo&) { second.push_back(s.alpha); });
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t e = 0; e < first.size(); ++e) EXPECT_EQ(first[e], second[e]);
  }
}

TEST(Fit, MaxEpochsIsNotAnError) {
  const Dataset d = fixture(3, 20, LabelKind::classification, 23);
  const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(1, 0.01), 100);
  SolverConfig config;
  config.max_epochs = 1;
  const FitResult fit = solve(p, config);
  EXPECT_FALSE(fit.report.converged);
  EXPECT_EQ(fit.report.stop_reason, "max-epochs");
  EXPECT_EQ(fit.report.epochs, 1);
}

TEST(Fit, AllRegularizersAndLossesConverge) {
  const Dataset cls = fixture(3, 12, LabelKind::classification, 24);
  const Dataset reg_data = fixture(3, 12, LabelKind::regression, 24);
  for (const LossSpec& loss : {LossSpec::hinge(), LossSpec::squared(), LossSpec::eps_svr(0.1)}) {
    for (const RegularizerSpec& reg : {RegularizerSpec::pnorm(1, 1), RegularizerSpec::pnorm(4, 1),
                                       RegularizerSpec::entropy(1), RegularizerSpec::cosh(1)}) {
      const Problem p = make_problem(loss.is_classification() ? cls : reg_data, loss, reg, 1);
      SolverConfig config;
      config.max_epochs = 2000;
      config.gap_check_every = 3;
      const FitResult fit = solve(p, config);
      EXPECT_TRUE(fit.report.converged);
      EXPECT_LE(fit.report.relative_gap, 1e-3);
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fit.theta).eigenvalues().minCoeff(),
                -1e-8 * std::max(1.0, fit.theta.diagonal().maxCoeff()));
    }
  }
}

TEST(Fit, CubicRequiresK1) {
  const Dataset d = fixture(2, 4, LabelKind::classification, 25);
  const Problem p = make_problem(d, LossSpec::hinge(), RegularizerSpec::pnorm(2, 1), 1);
  SolverConfig config;
  config.subproblem = SubproblemMethod::cubic;
  EXPECT_THROW(solve(p, config), ValidationError);
}

TEST(Fit, PrimalTargetStops) {
  const Dataset d = fixture(2, 10, LabelKind::regression, 26);
  const Problem p = make_problem(d, LossSpec::squared(), RegularizerSpec::pnorm(1, 1), 1);
  SolverConfig config;
  config.gap_tol = 1e-15;
  config.primal_target = kInf;
  const FitResult fit = solve(p, config);
  EXPECT_EQ(fit.report.stop_reason, "target");
  EXPECT_EQ(fit.report.epochs, 1);
}
