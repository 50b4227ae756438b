#include "okl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <ostream>

#include "okl/error.hpp"
#include "okl/kernels.hpp"
#include "okl/oracle.hpp"
#include "okl/solver.hpp"
#include "text.hpp"

namespace okl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool known_variant(const std::string& v) {
  return v == "sdca-newton" || v == "sdca-cubic" || v == "oracle-alternating";
}

}  // namespace

void BenchConfig::validate() const {
  if (task_counts.empty()) throw ValidationError("bench needs at least one task count");
  for (int t : task_counts) {
    if (t < 1) throw ValidationError("task counts must be positive");
  }
  if (variants.empty()) throw ValidationError("bench needs at least one variant");
  for (const auto& v : variants) {
    if (!known_variant(v)) throw ValidationError("unknown bench variant '" + v + "'");
  }
  if (samples_per_task < 2 || dim < 2 || clusters < 1) throw ValidationError("invalid synthetic data shape");
  if (!(C > 0.0) || !(lambda > 0.0) || !(gap_tol > 0.0) || !(time_limit > 0.0) || max_epochs < 1) {
    throw ValidationError("invalid bench parameters");
  }
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  config.validate();
  std::vector<BenchRow> rows;
  for (int T : config.task_counts) {
    SynthConfig sc;
    sc.num_tasks = T;
    const int clusters = std::min(config.clusters, T);
    sc.clusters.assign(static_cast<std::size_t>(clusters), {});
    for (int t = 0; t < T; ++t) sc.clusters[static_cast<std::size_t>(t % clusters)].push_back(t);
    sc.samples_per_task = config.samples_per_task;
    sc.dim = config.dim;
    sc.noise = config.noise;
    sc.seed = config.seed + static_cast<std::uint64_t>(T);
    sc.labels = LabelKind::regression;
    const Dataset data = synth_clustered(sc).data;
    const auto gram =
        std::make_shared<GramMatrix>(okl::gram(data, KernelSpec::rbf(1.0 / config.dim)));
    const LossSpec loss = LossSpec::squared();
    const RegularizerSpec reg = RegularizerSpec::pnorm(1, config.lambda);
    const Problem problem = Problem::make(data, gram, loss, reg, config.C);

    // The target always comes from sdca-newton, whether or not it is reported.
    SolverConfig base;
    base.seed = config.seed;
    base.max_epochs = config.max_epochs;
    base.gap_tol = config.gap_tol;
    base.subproblem = SubproblemMethod::newton;
    auto start = Clock::now();
    const FitResult reference = solve(problem, base);
    const double reference_seconds = seconds_since(start);
    const double target = reference.report.primal;

    for (const auto& variant : config.variants) {
      BenchRow row;
      row.num_tasks = T;
      row.variant = variant;
      if (variant == "sdca-newton") {
        row.seconds = reference_seconds;
        row.primal = target;
        row.reached = reference.report.converged;
      } else if (variant == "sdca-cubic") {
        SolverConfig cfg = base;
        cfg.subproblem = SubproblemMethod::cubic;
        cfg.primal_target = target;
        cfg.gap_tol = 1e-15;  // stop on the target only
        start = Clock::now();
        const FitResult fit = solve(problem, cfg);
        row.seconds = seconds_since(start);
        row.primal = fit.report.primal;
        row.reached = fit.report.primal <= target;
      } else {
        start = Clock::now();
        oracle::PrimalSplittingSolver alt(data, gram, loss, reg, config.C);
        while (alt.best_objective() > target && !alt.converged() &&
               seconds_since(start) < config.time_limit) {
          alt.step();
        }
        row.seconds = seconds_since(start);
        row.primal = alt.best_objective();
        row.reached = row.primal <= target;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out, int digits) {
  out << "T,variant,seconds,primal,reached\n";
  for (const auto& r : rows) {
    out << r.num_tasks << ',' << r.variant << ',' << detail::format_double(r.seconds, digits) << ','
        << detail::format_double(r.primal, digits) << ',' << (r.reached ? "true" : "false") << '\n';
  }
}

}  // namespace okl
