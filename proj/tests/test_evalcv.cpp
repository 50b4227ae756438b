#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "okl/error.hpp"
#include "okl/evalcv.hpp"

using namespace okl;

namespace {

Dataset fixture(LabelKind kind, std::uint64_t seed, int T = 3, int m = 12) {
  SynthConfig cfg;
  cfg.num_tasks = T;
  cfg.clusters = {{}};
  for (int t = 0; t < T; ++t) cfg.clusters[0].push_back(t);
  cfg.samples_per_task = m;
  cfg.dim = 3;
  cfg.noise = 0.4;
  cfg.seed = seed;
  cfg.labels = kind;
  return synth_clustered(cfg).data;
}

}  // namespace

TEST(Auc, Examples) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_EQ(auc(s, std::vector<double>{-1, -1, 1, 1}), 1.0);
  EXPECT_EQ(auc(s, std::vector<double>{1, 1, -1, -1}), 0.0);
  EXPECT_DOUBLE_EQ(auc(s, std::vector<double>{-1, 1, -1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{1, 1}, std::vector<double>{-1, 1}), 0.5);
  EXPECT_THROW(auc(s, std::vector<double>{1, 1, 1, 1}), ValidationError);
  EXPECT_THROW(auc(s, std::vector<double>{1, 0, 1, -1}), ValidationError);
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  Rng rng(1);
  std::vector<double> s, t, y;
  for (int i = 0; i < 50; ++i) {
    s.push_back(std::round(rng.normal() * 4) / 4);
    t.push_back(std::exp(3 * s.back()) - 7);
    y.push_back(rng.uniform() < 0.4 ? 1 : -1);
  }
  EXPECT_DOUBLE_EQ(auc(s, y), auc(t, y));
}

TEST(ExplainedVariance, Examples) {
  const std::vector<double> y{0, 2};
  EXPECT_DOUBLE_EQ(explained_variance(y, y), 100.0);
  EXPECT_DOUBLE_EQ(explained_variance(y, std::vector<double>{1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(explained_variance(y, std::vector<double>{0, 1}), 75.0);
  EXPECT_THROW(explained_variance(std::vector<double>{1, 1}, std::vector<double>{0, 1}), ValidationError);
  EXPECT_THROW(explained_variance(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST(ExplainedVariance, ShiftInvariant) {
  const std::vector<double> y{0.5, -1, 2, 3.5}, p{0.2, -0.4, 1.5, 3};
  std::vector<double> ys = y, ps = p;
  for (auto& v : ys) v += 10;
  for (auto& v : ps) v += 10;
  EXPECT_NEAR(explained_variance(y, p), explained_variance(ys, ps), 1e-10);
}

TEST(Accuracy, Examples) {
  const std::vector<int> t{0, 1, 2, 1};
  EXPECT_EQ(accuracy(t, t), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{1, 2, 0, 0}, t), 0.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 1, 2, 2}, t), 0.75);
}

TEST(Metric, Names) {
  for (Metric m : {Metric::auc, Metric::ev, Metric::acc}) EXPECT_EQ(parse_metric(metric_name(m)), m);
  EXPECT_THROW(parse_metric("f1"), ValidationError);
}

TEST(PerTaskMetric, SkipsUndefinedTasks) {
  const std::vector<int> tasks{0, 0, 1, 1};
  const std::vector<double> labels{-1, 1, 1, 1};
  const std::vector<double> scores{0.1, 0.9, 0.3, 0.2};
  const TaskMetrics m = per_task_metric(Metric::auc, tasks, 2, labels, scores);
  ASSERT_TRUE(m.per_task[0].has_value());
  EXPECT_FALSE(m.per_task[1].has_value());
  EXPECT_EQ(m.macro, 1.0);
  EXPECT_EQ(m.warnings.size(), 1u);
}

TEST(Sparsity, Profile) {
  const std::vector<double> th{1e-3, 1e-2, 0.1};
  EXPECT_EQ(sparsity_profile(Eigen::MatrixXd::Zero(3, 3), th), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(sparsity_profile(Eigen::MatrixXd::Ones(3, 3), th), (std::vector<double>{0, 0, 0}));
  Eigen::MatrixXd m(3, 3);
  m << 5, 0.005, -0.05, 0.005, 5, 0.5, -0.05, 0.5, 5;
  const auto p = sparsity_profile(m, th);
  EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
  EXPECT_EQ(p, (std::vector<double>{0, 1.0 / 3, 2.0 / 3}));
}

TEST(Folds, StratifiedPartition) {
  const Dataset d = fixture(LabelKind::classification, 2, 4, 7);
  const std::vector<int> fold = assign_folds(d, 3, 5);
  ASSERT_EQ(fold.size(), d.size());
  for (int f : fold) EXPECT_TRUE(f >= 0 && f < 3);
  for (int t = 0; t < 4; ++t) {
    std::set<int> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.tasks[i] == t) seen.insert(fold[i]);
    }
    EXPECT_EQ(seen.size(), 3u);
  }
  EXPECT_EQ(assign_folds(d, 3, 5), fold);
}

TEST(KappaConstant, Equivalence) {
  EXPECT_NEAR(kappa_constant(1, 2.0, 8.0), kappa_constant(1, 1.0, 1.0), 1e-15);
  EXPECT_NEAR(kappa_constant(2, 2.0, std::pow(2.0, 7.0 / 3.0)), 0.0, 1e-14);
  EXPECT_GT(std::abs(kappa_constant(1, 2.0, 2.0)), 0.1);
}

TEST(CrossValidate, SinglePoint) {
  const Dataset d = fixture(LabelKind::classification, 3);
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::rbf(0.5)));
  CvConfig cfg;
  cfg.grid = {{1.0, 1.0}};
  const CvResult r = cross_validate(d, g, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), cfg);
  EXPECT_EQ(r.best_index, 0u);
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.table[0].fold_scores.size(), 3u);
  double mean = 0;
  for (double s : r.table[0].fold_scores) mean += s / 3;
  EXPECT_NEAR(r.table[0].score, mean, 1e-15);
  EXPECT_GT(r.table[0].score, 0.5);
}

TEST(CrossValidate, EquivalentPointsShareOneSolve) {
  const Dataset d = fixture(LabelKind::regression, 4);
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::rbf(0.5)));
  CvConfig cfg;
  cfg.grid = {{1.0, 1.0}, {2.0, 8.0}, {1.0, 3.0}};
  cfg.metric = Metric::ev;
  cfg.solver.gap_tol = 1e-10;
  cfg.solver.max_epochs = 50000;
  const RegularizerSpec reg = RegularizerSpec::pnorm(1, 1);
  const CvResult shared = cross_validate(d, g, LossSpec::squared(), reg, cfg);
  EXPECT_EQ(shared.table[1].shared_with, 0);
  EXPECT_EQ(shared.table[2].shared_with, -1);
  EXPECT_EQ(shared.table[1].score, shared.table[0].score);

  cfg.share_equivalent = false;
  const CvResult separate = cross_validate(d, g, LossSpec::squared(), reg, cfg);
  EXPECT_EQ(separate.table[1].shared_with, -1);
  EXPECT_NEAR(separate.table[1].score, separate.table[0].score, 1e-5);
  EXPECT_EQ(separate.table[0].score, shared.table[0].score);
}

TEST(CrossValidate, DeterministicAcrossThreads) {
  const Dataset d = fixture(LabelKind::classification, 5);
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::rbf(0.5)));
  CvConfig cfg;
  cfg.grid = {{0.5, 1.0}, {1.0, 0.5}, {2.0, 2.0}};
  cfg.seed = 17;
  const RegularizerSpec reg = RegularizerSpec::pnorm(2, 1);
  const CvResult a = cross_validate(d, g, LossSpec::hinge(), reg, cfg);
  cfg.threads = 3;
  const CvResult b = cross_validate(d, g, LossSpec::hinge(), reg, cfg);
  std::ostringstream ta, tb;
  write_cv_table(a, ta);
  write_cv_table(b, tb);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(a.best_index, b.best_index);
}

TEST(CrossValidate, TieBreaksToSmallerLambdaThenC) {
  // One task, one feature x = y (1 + margin): every fitted score is w x with w > 0, so
  // every grid point reaches AUC 1 and ties.
  Dataset d;
  d.num_tasks = 1;
  d.task_ids = {1};
  for (int i = 0; i < 24; ++i) {
    const double y = i % 2 == 0 ? 1.0 : -1.0;
    d.tasks.push_back(0);
    d.labels.push_back(y);
    d.features.push_back({{1, y * (1.0 + 0.1 * (i % 5))}});
  }
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::linear()));
  CvConfig cfg;
  cfg.grid = {{4.0, 2.0}, {2.0, 1.0}, {8.0, 1.0}};
  cfg.share_equivalent = false;
  const CvResult r = cross_validate(d, g, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), cfg);
  ASSERT_EQ(r.table[0].score, r.table[1].score);
  ASSERT_EQ(r.table[1].score, r.table[2].score);
  EXPECT_EQ(r.best_index, 1u);
}

TEST(CrossValidate, MulticlassAccuracy) {
  Dataset classes;
  classes.num_tasks = 3;
  classes.task_ids = {1, 2, 3};
  Rng rng(8);
  const double centres[3][2] = {{4, 0}, {-4, 4}, {-4, -4}};
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 9; ++s) {
      classes.tasks.push_back(c);
      classes.labels.push_back(0.0);
      classes.features.push_back({{1, centres[c][0] + 0.3 * rng.normal()}, {2, centres[c][1] + 0.3 * rng.normal()}});
    }
  }
  const auto g = std::make_shared<GramMatrix>(gram(classes, KernelSpec::rbf(0.1)));
  CvConfig cfg;
  cfg.grid = {{10.0, 1.0}};
  cfg.metric = Metric::acc;
  const CvResult r = cross_validate(classes, g, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), cfg);
  EXPECT_EQ(r.table[0].score, 1.0);
}

TEST(CrossValidate, Errors) {
  const Dataset d = fixture(LabelKind::classification, 9);
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::linear()));
  CvConfig cfg;
  EXPECT_THROW(cross_validate(d, g, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), cfg), ValidationError);
  cfg.grid = {{1, 1}};
  cfg.folds = 1;
  EXPECT_THROW(cross_validate(d, g, LossSpec::hinge(), RegularizerSpec::pnorm(1, 1), cfg), ValidationError);
}
