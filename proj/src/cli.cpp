#include "okl/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "okl/bench.hpp"
#include "okl/dataset.hpp"
#include "okl/error.hpp"
#include "okl/evalcv.hpp"
#include "okl/kernels.hpp"
#include "okl/model.hpp"
#include "okl/verify.hpp"
#include "text.hpp"

namespace okl {

namespace {

struct TrainingOptions {
  std::string loss = "hinge";
  double epsilon = 0.1;
  std::string reg = "pnorm";
  int k = 1;
  double lambda = 1.0;
  double C = 1.0;
  double gap_tol = 1e-3;
  int max_epochs = 1000;
  std::uint64_t seed = 0;
  std::string sampling = "perm";
  std::string subproblem = "auto";
  std::string kernel = "rbf";
  double gamma = 1.0;
  std::string gram;
  int threads = 1;
  bool one_vs_all = false;
};

void add_training_options(CLI::App* app, TrainingOptions& o, bool with_c_lambda = true) {
  app->add_option("--loss", o.loss, "hinge | squared | eps-svr")
      ->check(CLI::IsMember({"hinge", "squared", "eps-svr", "eps_svr"}))
      ->capture_default_str();
  app->add_option("--epsilon", o.epsilon, "eps-svr tube half-width")->capture_default_str();
  app->add_option("--reg", o.reg, "pnorm | entropy | cosh")
      ->check(CLI::IsMember({"pnorm", "entropy", "cosh"}))
      ->capture_default_str();
  app->add_option("--k", o.k, "pnorm order, p = 2k/(2k-1)")->capture_default_str();
  if (with_c_lambda) {
    app->add_option("--lambda", o.lambda, "regularizer weight")->capture_default_str();
    app->add_option("--C", o.C, "loss weight")->capture_default_str();
  }
  app->add_option("--gap-tol", o.gap_tol, "target relative duality gap")->capture_default_str();
  app->add_option("--max-epochs", o.max_epochs)->capture_default_str();
  app->add_option("--seed", o.seed)->capture_default_str();
  app->add_option("--sampling", o.sampling, "perm | uniform")
      ->check(CLI::IsMember({"perm", "uniform"}))
      ->capture_default_str();
  app->add_option("--subproblem", o.subproblem, "newton | cubic | auto")
      ->check(CLI::IsMember({"newton", "cubic", "auto"}))
      ->capture_default_str();
  app->add_option("--kernel", o.kernel, "linear | rbf | precomputed")
      ->check(CLI::IsMember({"linear", "rbf", "precomputed"}))
      ->capture_default_str();
  app->add_option("--gamma", o.gamma, "rbf width")->capture_default_str();
  app->add_option("--gram", o.gram, "training Gram matrix (CSV) for --kernel precomputed");
  app->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  app->add_flag("--one-vs-all", o.one_vs_all, "treat the task field as a class label");
}

LossSpec loss_from(const TrainingOptions& o) {
  if (o.loss == "squared") return LossSpec::squared();
  if (o.loss == "eps-svr" || o.loss == "eps_svr") return LossSpec::eps_svr(o.epsilon);
  return LossSpec::hinge();
}

RegularizerSpec reg_from(const TrainingOptions& o, double lambda) {
  if (o.reg == "entropy") return RegularizerSpec::entropy(lambda);
  if (o.reg == "cosh") return RegularizerSpec::cosh(lambda);
  return RegularizerSpec::pnorm(o.k, lambda);
}

KernelSpec kernel_from(const TrainingOptions& o) {
  if (o.kernel == "linear") return KernelSpec::linear();
  if (o.kernel == "precomputed") return KernelSpec::precomputed();
  return KernelSpec::rbf(o.gamma);
}

SolverConfig solver_from(const TrainingOptions& o) {
  SolverConfig s;
  s.gap_tol = o.gap_tol;
  s.max_epochs = o.max_epochs;
  s.seed = o.seed;
  s.sampling = o.sampling == "uniform" ? Sampling::uniform : Sampling::permutation;
  s.subproblem = o.subproblem == "newton"  ? SubproblemMethod::newton
                 : o.subproblem == "cubic" ? SubproblemMethod::cubic
                                           : SubproblemMethod::automatic;
  s.validate();
  return s;
}

std::shared_ptr<const GramMatrix> training_gram(const TrainingOptions& o, const Dataset& data) {
  const KernelSpec kernel = kernel_from(o);
  if (kernel.kind == KernelSpec::Kind::precomputed) {
    if (o.gram.empty()) throw ValidationError("--kernel precomputed needs --gram");
    GramMatrix g = load_gram_file(o.gram);
    if (g.size() != static_cast<Eigen::Index>(data.size())) {
      throw ValidationError("Gram matrix has " + std::to_string(g.size()) + " rows but the dataset has " +
                            std::to_string(data.size()) + " samples");
    }
    return std::make_shared<GramMatrix>(std::move(g));
  }
  if (!o.gram.empty()) throw ValidationError("--gram is only used with --kernel precomputed");
  return std::make_shared<GramMatrix>(gram(data, kernel, o.threads));
}

// Kernel rows against the training samples: one line of comma-separated values per query.
std::vector<Eigen::VectorXd> load_kernel_rows(const std::string& path, Eigen::Index n) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<Eigen::VectorXd> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    Eigen::VectorXd row(n);
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index j = 0;
    while (std::getline(ss, cell, ',')) {
      const auto v = detail::to_double(detail::trim(cell));
      if (!v) throw ParseError("bad kernel value \"" + cell + "\"", lineno);
      if (j >= n) throw ParseError("kernel row longer than " + std::to_string(n), lineno);
      row(j++) = *v;
    }
    if (j != n) throw ParseError("kernel row has " + std::to_string(j) + " values, expected " + std::to_string(n), lineno);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback,
                          bool binary = false) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, binary ? std::ios::binary : std::ios::out);
  if (!file) throw ValidationError("cannot open " + path + " for writing");
  return file;
}

// Kernel rows for every test sample, from features or from a rows file.
std::vector<Eigen::VectorXd> query_rows(const Model& model, const Dataset& test, const std::string& rows_path) {
  if (model.kernel.kind == KernelSpec::Kind::precomputed) {
    if (rows_path.empty()) throw ValidationError("model uses a precomputed kernel; pass --gram-rows");
    auto rows = load_kernel_rows(rows_path, model.size());
    if (rows.size() != test.size()) {
      throw ValidationError("--gram-rows has " + std::to_string(rows.size()) + " rows for " +
                            std::to_string(test.size()) + " samples");
    }
    return rows;
  }
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(test.size());
  for (const auto& x : test.features) rows.push_back(kernel_row(model.kernel, model.training, x));
  return rows;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task learning with learned output kernels"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags win");
  app.require_subcommand(1);
  int digits = 17;
  app.add_option("--digits", digits, "significant digits of numeric output (17 = round-trip)")
      ->check(CLI::Range(1, 17))
      ->capture_default_str();

  // train
  TrainingOptions train_opts;
  std::string train_data;
  std::string train_model;
  auto* train_cmd = app.add_subcommand("train", "fit a model and write it to a file");
  train_cmd->add_option("data", train_data, "training data file")->required();
  train_cmd->add_option("-m,--model", train_model, "output model file")->required();
  add_training_options(train_cmd, train_opts);

  // predict / eval
  std::string predict_model;
  std::string predict_data;
  std::string predict_rows;
  bool predict_multiclass = false;
  auto* predict_cmd = app.add_subcommand("predict", "score a dataset with a trained model");
  predict_cmd->add_option("data", predict_data, "test data file")->required();
  predict_cmd->add_option("-m,--model", predict_model, "model file")->required();
  predict_cmd->add_option("--gram-rows", predict_rows, "kernel rows for a precomputed kernel");
  predict_cmd->add_flag("--multiclass", predict_multiclass, "print the argmax class");

  std::string eval_model;
  std::string eval_data;
  std::string eval_rows;
  std::string eval_metric;
  bool eval_multiclass = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a labelled dataset");
  eval_cmd->add_option("data", eval_data, "labelled test data file")->required();
  eval_cmd->add_option("-m,--model", eval_model, "model file")->required();
  eval_cmd->add_option("--gram-rows", eval_rows, "kernel rows for a precomputed kernel");
  eval_cmd->add_option("--metric", eval_metric, "auc | ev | acc (default from the loss)")
      ->check(CLI::IsMember({"auc", "ev", "acc"}));
  eval_cmd->add_flag("--multiclass", eval_multiclass, "task field is the class; report accuracy");

  // cv
  TrainingOptions cv_opts;
  std::string cv_data;
  std::vector<double> grid_c{1.0};
  std::vector<double> grid_lambda{1.0};
  int cv_folds = 3;
  std::string cv_metric;
  std::string cv_table;
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation over a (C, lambda) grid");
  cv_cmd->add_option("data", cv_data, "data file")->required();
  add_training_options(cv_cmd, cv_opts, false);
  cv_cmd->add_option("--grid-C", grid_c, "comma-separated C values")->delimiter(',');
  cv_cmd->add_option("--grid-lambda", grid_lambda, "comma-separated lambda values")->delimiter(',');
  cv_cmd->add_option("--folds", cv_folds)->capture_default_str();
  cv_cmd->add_option("--metric", cv_metric, "auc | ev | acc")->check(CLI::IsMember({"auc", "ev", "acc"}));
  cv_cmd->add_option("--table", cv_table, "write the score table (CSV) here instead of stdout");

  // export-theta
  std::string export_model;
  std::string export_format = "csv";
  std::string export_transform = "raw";
  std::string export_output;
  bool drop_diagonal = false;
  auto* export_cmd = app.add_subcommand("export-theta", "write the learned output kernel");
  export_cmd->add_option("-m,--model", export_model, "model file")->required();
  export_cmd->add_option("--format", export_format, "csv | pgm")
      ->check(CLI::IsMember({"csv", "pgm"}))
      ->capture_default_str();
  export_cmd->add_option("--transform", export_transform, "raw | abs | log1p_abs")
      ->check(CLI::IsMember({"raw", "abs", "log1p_abs"}))
      ->capture_default_str();
  export_cmd->add_flag("--drop-diagonal", drop_diagonal, "leave the diagonal out of the image");
  export_cmd->add_option("-o,--output", export_output, "output file (default stdout)");

  // bench
  BenchConfig bench;
  std::string bench_output;
  auto* bench_cmd = app.add_subcommand("bench", "runtime of the solvers against the number of tasks");
  bench_cmd->add_option("--tasks", bench.task_counts, "comma-separated task counts")->delimiter(',');
  bench_cmd->add_option("--variants", bench.variants, "sdca-newton,sdca-cubic,oracle-alternating")
      ->delimiter(',');
  bench_cmd->add_option("--samples-per-task", bench.samples_per_task)->capture_default_str();
  bench_cmd->add_option("--dim", bench.dim)->capture_default_str();
  bench_cmd->add_option("--clusters", bench.clusters)->capture_default_str();
  bench_cmd->add_option("--noise", bench.noise)->capture_default_str();
  bench_cmd->add_option("--C", bench.C)->capture_default_str();
  bench_cmd->add_option("--lambda", bench.lambda)->capture_default_str();
  bench_cmd->add_option("--gap-tol", bench.gap_tol)->capture_default_str();
  bench_cmd->add_option("--time-limit", bench.time_limit, "seconds per reference run")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  bench_cmd->add_option("-o,--output", bench_output, "CSV file (default stdout)");

  // verify
  VerifyConfig verify;
  auto* verify_cmd = app.add_subcommand("verify", "run the reference-solver checks");
  verify_cmd->add_option("--seed", verify.seed)->capture_default_str();
  verify_cmd->add_option("--tolerance-scale", verify.tolerance_scale, "multiplies every tolerance")
      ->capture_default_str();

  // synth
  int synth_tasks = 4;
  int synth_clusters = 2;
  int synth_samples = 20;
  int synth_dim = 5;
  double synth_noise = 0.1;
  std::uint64_t synth_seed = 0;
  bool synth_regression = false;
  std::string synth_output;
  auto* synth_cmd = app.add_subcommand("synth", "write a clustered synthetic multi-task dataset");
  synth_cmd->add_option("--tasks", synth_tasks)->capture_default_str();
  synth_cmd->add_option("--clusters", synth_clusters, "tasks are dealt round-robin to clusters")
      ->capture_default_str();
  synth_cmd->add_option("--samples-per-task", synth_samples)->capture_default_str();
  synth_cmd->add_option("--dim", synth_dim)->capture_default_str();
  synth_cmd->add_option("--noise", synth_noise)->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
  synth_cmd->add_flag("--regression", synth_regression, "real-valued labels");
  synth_cmd->add_option("-o,--output", synth_output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitInput;
  }

  const auto num = [&](double v) { return detail::format_double(v, digits); };

  try {
    if (*train_cmd) {
      Dataset data = parse_dataset_file(train_data);
      if (train_opts.one_vs_all) {
        if (kernel_from(train_opts).kind == KernelSpec::Kind::precomputed) {
          throw ValidationError("--one-vs-all needs a feature kernel");
        }
        data = one_vs_all(data).data;
      }
      const auto start = std::chrono::steady_clock::now();
      const Model model = train(data, kernel_from(train_opts), loss_from(train_opts),
                                reg_from(train_opts, train_opts.lambda), train_opts.C, solver_from(train_opts),
                                training_gram(train_opts, data));
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      save_model_file(model, train_model);
      out << "epochs " << model.report.epochs << '\n'
          << "primal " << num(model.report.primal) << '\n'
          << "dual " << num(model.report.dual) << '\n'
          << "relative_gap " << num(model.report.relative_gap) << '\n'
          << "converged " << (model.report.converged ? "true" : "false") << '\n'
          << "stop_reason " << model.report.stop_reason << '\n'
          << "seconds " << num(seconds) << '\n';
      if (!model.report.converged) {
        err << "warning: stopped after " << model.report.epochs << " epochs without reaching the gap tolerance\n";
        return kExitMaxEpochs;
      }
      return kExitOk;
    }

    if (*predict_cmd) {
      const Model model = load_model_file(predict_model);
      Dataset test = parse_dataset_file(predict_data);
      if (!predict_multiclass) align_tasks(test, model.training.task_ids);
      const auto rows = query_rows(model, test, predict_rows);
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (predict_multiclass) {
          const int cls = predict_multiclass_gram_row(model, rows[i]);
          out << model.training.task_ids[static_cast<std::size_t>(cls)] << '\n';
        } else {
          const int t = test.tasks[i];
          out << model.training.task_ids[static_cast<std::size_t>(t)] << ' '
              << num(predict_gram_row(model, rows[i], t)) << '\n';
        }
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      const Model model = load_model_file(eval_model);
      Dataset test = parse_dataset_file(eval_data);
      align_tasks(test, model.training.task_ids);
      const auto rows = query_rows(model, test, eval_rows);
      Metric metric = eval_metric.empty()
                          ? (eval_multiclass ? Metric::acc : model.loss.is_classification() ? Metric::auc : Metric::ev)
                          : parse_metric(eval_metric);
      if (metric == Metric::acc || eval_multiclass) {
        if (metric != Metric::acc) err << "warning: --multiclass reports accuracy\n";
        std::vector<int> predicted;
        for (const auto& row : rows) predicted.push_back(predict_multiclass_gram_row(model, row));
        out << "metric,value\nacc," << num(accuracy(predicted, test.tasks)) << '\n';
        return kExitOk;
      }
      std::vector<double> labels = test.labels;
      if (metric == Metric::auc && !model.loss.is_classification()) {
        err << "warning: auc on a regression model; labels are split at 0\n";
        for (double& y : labels) y = y > 0.0 ? 1.0 : -1.0;
      }
      if (metric == Metric::ev && model.loss.is_classification()) {
        err << "warning: explained variance on a classification model\n";
      }
      std::vector<double> scores;
      for (std::size_t i = 0; i < test.size(); ++i) scores.push_back(predict_gram_row(model, rows[i], test.tasks[i]));
      const TaskMetrics m = per_task_metric(metric, test.tasks, test.num_tasks, labels, scores);
      for (const auto& w : m.warnings) err << "warning: " << w << '\n';
      out << "task," << metric_name(metric) << '\n';
      for (std::size_t t = 0; t < m.per_task.size(); ++t) {
        if (m.per_task[t]) out << model.training.task_ids[t] << ',' << num(*m.per_task[t]) << '\n';
      }
      out << "macro," << num(m.macro) << '\n';
      return kExitOk;
    }

    if (*cv_cmd) {
      const Dataset data = parse_dataset_file(cv_data);
      CvConfig cfg;
      for (double lambda : grid_lambda) {
        for (double c : grid_c) cfg.grid.push_back({c, lambda});
      }
      cfg.folds = cv_folds;
      cfg.metric = cv_metric.empty()
                       ? (cv_opts.one_vs_all ? Metric::acc : loss_from(cv_opts).is_classification() ? Metric::auc : Metric::ev)
                       : parse_metric(cv_metric);
      if (cv_opts.one_vs_all && cfg.metric != Metric::acc) throw ValidationError("--one-vs-all cross-validation uses --metric acc");
      cfg.seed = cv_opts.seed;
      cfg.solver = solver_from(cv_opts);
      cfg.threads = cv_opts.threads;
      const CvResult result = cross_validate(data, training_gram(cv_opts, data), loss_from(cv_opts),
                                             reg_from(cv_opts, 1.0), cfg);
      std::ofstream file;
      write_cv_table(result, open_output(cv_table, file, out), digits);
      for (const auto& row : result.table) {
        for (const auto& w : row.warnings) err << "warning: C=" << num(row.point.C) << " lambda=" << num(row.point.lambda) << ": " << w << '\n';
      }
      out << "best C=" << num(result.best.C) << " lambda=" << num(result.best.lambda)
          << " score=" << num(result.table[result.best_index].score) << '\n';
      return kExitOk;
    }

    if (*export_cmd) {
      const Model model = load_model_file(export_model);
      const ThetaFormat format = export_format == "pgm" ? ThetaFormat::pgm : ThetaFormat::csv;
      const ThetaTransform transform = export_transform == "abs"         ? ThetaTransform::abs
                                       : export_transform == "log1p_abs" ? ThetaTransform::log1p_abs
                                                                         : ThetaTransform::raw;
      std::ofstream file;
      export_theta(model.theta, format, transform, drop_diagonal,
                   open_output(export_output, file, out, format == ThetaFormat::pgm), digits);
      return kExitOk;
    }

    if (*bench_cmd) {
      const auto rows = run_bench(bench);
      std::ofstream file;
      write_bench_csv(rows, open_output(bench_output, file, out), digits);
      return kExitOk;
    }

    if (*verify_cmd) {
      if (!(verify.tolerance_scale >= 0.0)) throw ValidationError("--tolerance-scale must be >= 0");
      bool all = true;
      for (const auto& c : run_verify(verify)) {
        all = all && c.passed;
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " cases=" << c.cases << " worst=" << num(c.worst)
            << " tolerance=" << num(c.tolerance);
        if (!c.detail.empty()) out << " (" << c.detail << ')';
        out << '\n';
      }
      return all ? kExitOk : kExitNumerical;
    }

    if (*synth_cmd) {
      SynthConfig sc;
      sc.num_tasks = synth_tasks;
      if (synth_clusters < 1 || synth_clusters > synth_tasks) throw ValidationError("--clusters must be in [1, tasks]");
      sc.clusters.assign(static_cast<std::size_t>(synth_clusters), {});
      for (int t = 0; t < synth_tasks; ++t) sc.clusters[static_cast<std::size_t>(t % synth_clusters)].push_back(t);
      sc.samples_per_task = synth_samples;
      sc.dim = synth_dim;
      sc.noise = synth_noise;
      sc.seed = synth_seed;
      sc.labels = synth_regression ? LabelKind::regression : LabelKind::classification;
      std::ofstream file;
      serialize_dataset(synth_clustered(sc).data, open_output(synth_output, file, out));
      return kExitOk;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace okl
