#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace okl {

/// Runtime comparison on clustered synthetic data (squared loss, pnorm k = 1, rbf kernel).
/// For every T the target is the primal value sdca-newton reaches at relative gap
/// `gap_tol`; every variant is timed until its primal objective is at or below it.
struct BenchConfig {
  std::vector<int> task_counts{5, 10, 20, 40};
  /// Any of "sdca-newton", "sdca-cubic", "oracle-alternating".
  std::vector<std::string> variants{"sdca-newton", "sdca-cubic", "oracle-alternating"};
  int samples_per_task = 20;
  int dim = 10;
  int clusters = 2;
  double noise = 0.3;
  double C = 1.0;
  double lambda = 1.0;
  double gap_tol = 1e-3;
  /// Wall-clock cap per (T, variant) for the alternating solver, seconds.
  double time_limit = 60.0;
  int max_epochs = 100000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BenchRow {
  int num_tasks = 0;
  std::string variant;
  double seconds = 0.0;
  double primal = 0.0;
  bool reached = false;
};

std::vector<BenchRow> run_bench(const BenchConfig& config);

/// CSV: T,variant,seconds,primal,reached.
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out, int digits = 17);

}  // namespace okl
