#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "okl/dataset.hpp"
#include "okl/kernels.hpp"
#include "okl/losses.hpp"
#include "okl/regularizers.hpp"
#include "okl/solver.hpp"

namespace okl {

/// Mann-Whitney statistic; tied scores count 1/2. Labels must be +-1 with both present.
double auc(std::span<const double> scores, std::span<const double> labels);

/// 1 - Var(y_true - y_pred) / Var(y_true) in percent, population variances.
double explained_variance(std::span<const double> y_true, std::span<const double> y_pred);

/// Fraction of equal entries.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

enum class Metric { auc, ev, acc };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric metric);

/// Per-task auc or ev with their unweighted mean over the tasks where it is defined.
struct TaskMetrics {
  std::vector<std::optional<double>> per_task;
  double macro = 0.0;
  std::vector<std::string> warnings;
};
TaskMetrics per_task_metric(Metric metric, std::span<const int> tasks, int num_tasks,
                            std::span<const double> labels, std::span<const double> scores);

/// Fraction of off-diagonal |Theta| entries strictly below each threshold (1.0 for T = 1).
std::vector<double> sparsity_profile(const Eigen::MatrixXd& theta, std::span<const double> thresholds);

struct GridPoint {
  double C = 1.0;
  double lambda = 1.0;
};

/// Effective constant of the pnorm dual after alpha = C kappa: equal values give identical
/// predictors. C^(4k-1) / lambda^(2k-1), computed in logs.
double kappa_constant(int k, double C, double lambda);

struct CvConfig {
  std::vector<GridPoint> grid;
  int folds = 3;
  Metric metric = Metric::auc;
  std::uint64_t seed = 0;
  SolverConfig solver;
  int threads = 1;
  /// Solve grid points with equal kappa_constant once (pnorm only).
  bool share_equivalent = true;
};

struct CvRow {
  GridPoint point;
  double score = 0.0;
  std::vector<double> fold_scores;
  /// Grid index whose solves were reused, or -1.
  int shared_with = -1;
  std::vector<std::string> warnings;
};

struct CvResult {
  std::size_t best_index = 0;
  GridPoint best;
  std::vector<CvRow> table;
};

/// Fold of every sample; stratified by task (by class for Metric::acc), shuffled by seed.
std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed);

/// k-fold cross-validation over the grid. For Metric::acc the dataset is class-labelled
/// (task field = class) and each fold trains a one-vs-all model; otherwise tasks are the
/// learning tasks and the metric is the per-task macro average. The best point maximises
/// the mean score, ties going to the smaller lambda, then the smaller C.
CvResult cross_validate(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                        const LossSpec& loss, const RegularizerSpec& reg, const CvConfig& config);

/// CSV: C,lambda,score,fold scores...,shared_with,warnings.
void write_cv_table(const CvResult& result, std::ostream& out, int digits = 17);

}  // namespace okl
