#include "okl/evalcv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

#include "okl/error.hpp"
#include "okl/model.hpp"
#include "okl/random.hpp"
#include "text.hpp"

namespace okl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank sum of the positives with tied groups sharing their mean rank.
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j < m && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) {
      const double y = labels[order[q]];
      if (y != 1.0 && y != -1.0) throw ValidationError("auc: labels must be -1 or +1");
      if (y > 0) {
        rank_sum += mean_rank;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(m) - positives;
  if (positives == 0.0 || negatives == 0.0) throw ValidationError("auc: both classes must be present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double explained_variance(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw ValidationError("explained variance: lengths differ");
  const std::size_t m = y_true.size();
  if (m < 2) throw ValidationError("explained variance needs at least two samples");
  const auto variance = [m](auto&& value) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += value(i);
    mean /= static_cast<double>(m);
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) v += (value(i) - mean) * (value(i) - mean);
    return v / static_cast<double>(m);
  };
  const double var_true = variance([&](std::size_t i) { return y_true[i]; });
  if (!(var_true > 0.0)) throw ValidationError("explained variance: targets have zero variance");
  const double var_res = variance([&](std::size_t i) { return y_true[i] - y_pred[i]; });
  return 100.0 * (1.0 - var_res / var_true);
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("accuracy: lengths differ");
  if (predicted.empty()) return kNaN;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

Metric parse_metric(const std::string& name) {
  if (name == "auc") return Metric::auc;
  if (name == "ev") return Metric::ev;
  if (name == "acc") return Metric::acc;
  throw ValidationError("unknown metric '" + name + "' (expected auc, ev or acc)");
}

std::string metric_name(Metric metric) {
  switch (metric) {
    case Metric::auc: return "auc";
    case Metric::ev: return "ev";
    case Metric::acc: return "acc";
  }
  return "";
}

TaskMetrics per_task_metric(Metric metric, std::span<const int> tasks, int num_tasks,
                            std::span<const double> labels, std::span<const double> scores) {
  if (metric == Metric::acc) throw std::invalid_argument("accuracy is not a per-task metric");
  if (tasks.size() != labels.size() || tasks.size() != scores.size()) {
    throw ValidationError("metric inputs differ in length");
  }
  TaskMetrics out;
  out.per_task.assign(static_cast<std::size_t>(num_tasks), std::nullopt);
  std::vector<std::vector<double>> y(out.per_task.size());
  std::vector<std::vector<double>> f(out.per_task.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i] < 0 || tasks[i] >= num_tasks) throw ValidationError("task index out of range");
    y[static_cast<std::size_t>(tasks[i])].push_back(labels[i]);
    f[static_cast<std::size_t>(tasks[i])].push_back(scores[i]);
  }
  double sum = 0.0;
  int defined = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t].empty()) continue;
    try {
      out.per_task[t] = metric == Metric::auc ? auc(f[t], y[t]) : explained_variance(y[t], f[t]);
      sum += *out.per_task[t];
      ++defined;
    } catch (const ValidationError& e) {
      out.warnings.push_back("task " + std::to_string(t + 1) + " skipped: " + e.what());
    }
  }
  out.macro = defined > 0 ? sum / defined : kNaN;
  return out;
}

std::vector<double> sparsity_profile(const Eigen::MatrixXd& theta, std::span<const double> thresholds) {
  std::vector<double> out;
  const Eigen::Index T = theta.rows();
  const double total = static_cast<double>(T * (T - 1));
  for (double threshold : thresholds) {
    if (T < 2) {
      out.push_back(1.0);
      continue;
    }
    double below = 0.0;
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index s = 0; s < T; ++s) {
        if (r != s && std::abs(theta(r, s)) < threshold) below += 1.0;
      }
    }
    out.push_back(below / total);
  }
  return out;
}

double kappa_constant(int k, double C, double lambda) {
  if (!(C > 0.0) || !(lambda > 0.0)) throw ValidationError("C and lambda must be positive");
  return (4.0 * k - 1.0) * std::log(C) - (2.0 * k - 1.0) * std::log(lambda);
}

std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("need at least 2 folds");
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(std::max(data.num_tasks, 0)));
  for (std::size_t i = 0; i < data.size(); ++i) groups[static_cast<std::size_t>(data.tasks[i])].push_back(i);
  Rng rng(seed);
  std::vector<int> fold(data.size(), 0);
  std::size_t offset = 0;
  for (auto& g : groups) {
    rng.shuffle(g);
    // Continue the round-robin across groups so fold sizes stay balanced.
    for (std::size_t q = 0; q < g.size(); ++q) fold[g[q]] = static_cast<int>((offset + q) % static_cast<std::size_t>(folds));
    offset += g.size();
  }
  return fold;
}

namespace {

struct FoldOutcome {
  double score = kNaN;
  std::vector<std::string> warnings;
};

FoldOutcome run_fold(const Dataset& data, const GramMatrix& gram, const LossSpec& loss,
                     const RegularizerSpec& reg, double C, const CvConfig& config,
                     const std::vector<int>& fold, int f) {
  FoldOutcome out;
  const std::string tag = "fold " + std::to_string(f + 1) + ": ";
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
  if (train_rows.empty() || test_rows.empty()) {
    out.warnings.push_back(tag + "empty training or test split");
    return out;
  }
  const Dataset train = data.subset(train_rows);

  Dataset fit_data = train;
  std::vector<std::size_t> support = train_rows;  // row of `data` behind each training sample
  if (config.metric == Metric::acc) {
    OneVsAll ova = one_vs_all(train);
    fit_data = std::move(ova.data);
    support.clear();
    for (std::size_t o : ova.origin) support.push_back(train_rows[o]);
  }
  const auto sub = std::make_shared<GramMatrix>(gram.subset(support));
  Model model;
  model.theta.resize(0, 0);
  {
    const Problem problem = Problem::make(fit_data, sub, loss, reg, C);
    FitResult fit = solve(problem, config.solver);
    if (!fit.report.converged) out.warnings.push_back(tag + "solver stopped at max epochs");
    model.alpha = std::move(fit.state.alpha);
    model.theta = std::move(fit.theta);
    model.training = std::move(fit_data);
  }

  std::vector<bool> present(static_cast<std::size_t>(data.num_tasks), false);
  for (int t : train.tasks) present[static_cast<std::size_t>(t)] = true;

  Eigen::VectorXd row(static_cast<Eigen::Index>(support.size()));
  const auto kernel_row = [&](std::size_t i) {
    for (std::size_t j = 0; j < support.size(); ++j) {
      row(static_cast<Eigen::Index>(j)) = gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(support[j]));
    }
  };

  if (config.metric == Metric::acc) {
    std::vector<int> predicted;
    std::vector<int> truth;
    for (std::size_t i : test_rows) {
      kernel_row(i);
      predicted.push_back(predict_multiclass_gram_row(model, row));
      truth.push_back(data.tasks[i]);
    }
    out.score = accuracy(predicted, truth);
    return out;
  }

  std::vector<int> tasks;
  std::vector<double> labels;
  std::vector<double> scores;
  std::vector<bool> warned(present.size(), false);
  for (std::size_t i : test_rows) {
    const int t = data.tasks[i];
    if (!present[static_cast<std::size_t>(t)]) {
      if (!warned[static_cast<std::size_t>(t)]) {
        out.warnings.push_back(tag + "task " + std::to_string(t + 1) +
                               " has no training samples; its test samples are skipped");
        warned[static_cast<std::size_t>(t)] = true;
      }
      continue;
    }
    kernel_row(i);
    tasks.push_back(t);
    labels.push_back(data.labels[i]);
    scores.push_back(predict_gram_row(model, row, t));
  }
  TaskMetrics m = per_task_metric(config.metric, tasks, data.num_tasks, labels, scores);
  for (auto& w : m.warnings) out.warnings.push_back(tag + w);
  out.score = m.macro;
  return out;
}

}  // namespace

CvResult cross_validate(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                        const LossSpec& loss, const RegularizerSpec& reg, const CvConfig& config) {
  if (!gram) throw ValidationError("cross-validation needs a Gram matrix");
  if (config.grid.empty()) throw ValidationError("empty hyper-parameter grid");
  if (config.folds < 2) throw ValidationError("need at least 2 folds");
  if (static_cast<std::size_t>(config.folds) > data.size()) throw ValidationError("more folds than samples");
  if (gram->size() != static_cast<Eigen::Index>(data.size())) throw ValidationError("Gram size does not match the dataset");
  config.solver.validate();
  for (const auto& g : config.grid) {
    if (!(g.C > 0.0) || !(g.lambda > 0.0)) throw ValidationError("grid values must be positive");
  }

  const std::vector<int> fold = assign_folds(data, config.folds, config.seed);
  CvResult result;
  result.table.resize(config.grid.size());
  const bool share = config.share_equivalent && reg.kind == RegularizerSpec::Kind::pnorm;
  std::vector<std::size_t> owners;
  for (std::size_t g = 0; g < config.grid.size(); ++g) {
    CvRow& row = result.table[g];
    row.point = config.grid[g];
    if (share) {
      const double mu = kappa_constant(reg.k, row.point.C, row.point.lambda);
      for (std::size_t h : owners) {
        const double other = kappa_constant(reg.k, config.grid[h].C, config.grid[h].lambda);
        if (std::abs(mu - other) <= 1e-12 * std::max(1.0, std::abs(mu))) {
          row.shared_with = static_cast<int>(h);
          break;
        }
      }
    }
    if (row.shared_with < 0) owners.push_back(g);
  }

  // One job per (owning grid point, fold); slots are fixed so results do not depend on scheduling.
  const std::size_t jobs = owners.size() * static_cast<std::size_t>(config.folds);
  std::vector<FoldOutcome> outcomes(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t g = owners[j / static_cast<std::size_t>(config.folds)];
      const int f = static_cast<int>(j % static_cast<std::size_t>(config.folds));
      RegularizerSpec r = reg;
      r.lambda = config.grid[g].lambda;
      try {
        outcomes[j] = run_fold(data, *gram, loss, r, config.grid[g].C, config, fold, f);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t o = 0; o < owners.size(); ++o) {
    CvRow& row = result.table[owners[o]];
    double sum = 0.0;
    int defined = 0;
    for (int f = 0; f < config.folds; ++f) {
      const FoldOutcome& fo = outcomes[o * static_cast<std::size_t>(config.folds) + static_cast<std::size_t>(f)];
      row.fold_scores.push_back(fo.score);
      row.warnings.insert(row.warnings.end(), fo.warnings.begin(), fo.warnings.end());
      if (std::isfinite(fo.score)) {
        sum += fo.score;
        ++defined;
      }
    }
    row.score = defined > 0 ? sum / defined : kNaN;
    if (defined == 0) row.warnings.push_back("no fold produced a score");
  }
  for (auto& row : result.table) {
    if (row.shared_with < 0) continue;
    const CvRow& src = result.table[static_cast<std::size_t>(row.shared_with)];
    row.score = src.score;
    row.fold_scores = src.fold_scores;
    row.warnings = src.warnings;
  }

  bool found = false;
  for (std::size_t g = 0; g < result.table.size(); ++g) {
    const CvRow& row = result.table[g];
    if (!std::isfinite(row.score)) continue;
    if (!found) {
      result.best_index = g;
      found = true;
      continue;
    }
    const CvRow& best = result.table[result.best_index];
    const bool better = row.score > best.score ||
                        (row.score == best.score &&
                         (row.point.lambda < best.point.lambda ||
                          (row.point.lambda == best.point.lambda && row.point.C < best.point.C)));
    if (better) result.best_index = g;
  }
  if (!found) throw NumericalError("cross-validation produced no finite score");
  result.best = result.table[result.best_index].point;
  return result;
}

void write_cv_table(const CvResult& result, std::ostream& out, int digits) {
  const std::size_t folds = result.table.empty() ? 0 : result.table.front().fold_scores.size();
  out << "C,lambda,score";
  for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f + 1;
  out << ",shared_with,warnings\n";
  for (const auto& row : result.table) {
    out << detail::format_double(row.point.C, digits) << ',' << detail::format_double(row.point.lambda, digits)
        << ',' << detail::format_double(row.score, digits);
    for (double s : row.fold_scores) out << ',' << detail::format_double(s, digits);
    out << ',';
    if (row.shared_with >= 0) out << row.shared_with + 1;
    std::string joined;
    for (const auto& w : row.warnings) joined += (joined.empty() ? "" : "; ") + w;
    out << ",\"" << joined << "\"\n";
  }
}

}  // namespace okl
