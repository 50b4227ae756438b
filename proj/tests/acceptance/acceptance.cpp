// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "okl/bench.hpp"
#include "okl/evalcv.hpp"
#include "okl/model.hpp"
#include "okl/verify.hpp"

using namespace okl;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string describe(const CheckOutcome& c) {
  return c.name + " worst=" + fmt(c.worst) + " tol=" + fmt(c.tolerance) + " cases=" + std::to_string(c.cases);
}

Verdict timed_checks(const std::vector<CheckOutcome>& checks, double elapsed, double budget) {
  Verdict v{elapsed <= budget, ""};
  for (const auto& c : checks) {
    v.pass = v.pass && c.passed;
    v.detail += describe(c) + "; ";
  }
  v.detail += "time " + fmt(elapsed) + "s (budget " + fmt(budget) + "s)";
  return v;
}

Dataset clustered(int T, int m, int dim, double noise, LabelKind kind, std::uint64_t seed, int clusters = 2) {
  SynthConfig cfg;
  cfg.num_tasks = T;
  cfg.clusters.assign(static_cast<std::size_t>(std::min(clusters, T)), {});
  for (int t = 0; t < T; ++t) cfg.clusters[static_cast<std::size_t>(t) % cfg.clusters.size()].push_back(t);
  cfg.samples_per_task = m;
  cfg.dim = dim;
  cfg.noise = noise;
  cfg.seed = seed;
  cfg.labels = kind;
  return synth_clustered(cfg).data;
}

// Criteria 3 and 8 share the same runs.
struct ConvergenceRuns {
  Verdict weak_duality;
  Verdict caches;
};

ConvergenceRuns convergence_runs() {
  const auto t0 = Clock::now();
  int failures = 0, unconverged = 0, monotone_breaks = 0, duality_breaks = 0;
  long checks = 0, epochs_total = 0;
  double worst_drift = 0.0, worst_gap = 0.0;
  const int ks[] = {1, 2, 4};
  for (int inst = 0; inst < 20; ++inst) {
    const bool hinge = inst % 2 == 0;
    const int k = ks[inst % 3];
    const int T = 2 + (inst * 7) % 9;     // 2..10
    const int m = std::min(20, 200 / T);  // n <= 200
    const Dataset d = clustered(T, m, 8, 0.3, hinge ? LabelKind::classification : LabelKind::regression,
                                1000 + static_cast<std::uint64_t>(inst));
    const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::rbf(1.0 / 8)));
    const Problem p = Problem::make(d, g, hinge ? LossSpec::hinge() : LossSpec::squared(),
                                    RegularizerSpec::pnorm(k, 0.5 * (1 + inst % 3)), 0.5 + inst % 4);
    SolverConfig cfg;
    cfg.max_epochs = 2000;
    cfg.gap_tol = 1e-3;
    cfg.gap_check_every = 1;
    cfg.seed = static_cast<std::uint64_t>(inst);
    double previous = dual_objective(p, init_state(p, cfg));
    try {
      const FitResult fit = solve(p, cfg, [&](const DualState& s, const EpochInfo& info) {
        if (info.dual < previous - 1e-12 * std::max(1.0, std::abs(previous))) ++monotone_breaks;
        previous = info.dual;
        if (info.gap) {
          ++checks;
          if (info.gap->primal < info.gap->dual) ++duality_breaks;
        }
        const CacheSnapshot fresh = recompute_caches(p, s.alpha);
        worst_drift = std::max({worst_drift, (fresh.B - s.B).cwiseAbs().maxCoeff(),
                                (fresh.c - s.c).cwiseAbs().maxCoeff()});
      });
      epochs_total += fit.report.epochs;
      worst_gap = std::max(worst_gap, fit.report.relative_gap);
      if (!fit.report.converged || fit.report.relative_gap > 1e-3) ++unconverged;
    } catch (const std::exception& e) {
      ++failures;
      std::cerr << "instance " << inst << ": " << e.what() << '\n';
    }
  }
  const double elapsed = seconds_since(t0);
  ConvergenceRuns out;
  out.weak_duality.pass = failures == 0 && unconverged == 0 && monotone_breaks == 0 && duality_breaks == 0 &&
                          elapsed <= 300;
  out.weak_duality.detail = "20 instances, " + std::to_string(checks) + " gap checks, primal<dual " +
                            std::to_string(duality_breaks) + ", dual decreases " + std::to_string(monotone_breaks) +
                            ", not converged " + std::to_string(unconverged) + ", worst final gap " + fmt(worst_gap) +
                            ", total epochs " + std::to_string(epochs_total) + ", time " + fmt(elapsed) +
                            "s (budget 300s)";
  out.caches.pass = failures == 0 && worst_drift <= 1e-8;
  out.caches.detail = "max-abs drift of B and c after every epoch: " + fmt(worst_drift) + " (limit 1e-8)";
  return out;
}

Verdict sparsity_trend() {
  const auto t0 = Clock::now();
  // Two clusters of three tasks each.
  const Dataset d = clustered(6, 30, 10, 0.1, LabelKind::classification, 7);
  const auto g = std::make_shared<GramMatrix>(gram(d, KernelSpec::linear()));
  SolverConfig cfg;
  cfg.max_epochs = 5000;
  cfg.gap_tol = 1e-4;
  struct Stats {
    double fraction, cross, within;
  };
  const auto stats = [&](int k) {
    const Model m = train(d, KernelSpec::linear(), LossSpec::hinge(), RegularizerSpec::pnorm(k, 1.0), 1.0, cfg, g);
    const Eigen::MatrixXd a = m.theta.cwiseAbs();
    const double threshold = 1e-3 * a.maxCoeff();
    const std::vector<double> th{threshold};
    double cross = 0, within = 0;
    int nc = 0, nw = 0;
    for (int r = 0; r < 6; ++r) {
      for (int s = 0; s < 6; ++s) {
        if (r == s) continue;
        if (r % 2 == s % 2) {
          within += a(r, s);
          ++nw;
        } else {
          cross += a(r, s);
          ++nc;
        }
      }
    }
    return Stats{sparsity_profile(m.theta, th)[0], cross / nc, within / nw};
  };
  const Stats dense = stats(1), sparse = stats(4);
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = sparse.fraction > dense.fraction && dense.cross < dense.within && sparse.cross < sparse.within &&
           elapsed <= 60;
  v.detail = "fraction below 1e-3 max: p=2 " + fmt(dense.fraction) + ", p=8/7 " + fmt(sparse.fraction) +
             "; cross/within mean |Theta|: p=2 " + fmt(dense.cross) + "/" + fmt(dense.within) + ", p=8/7 " +
             fmt(sparse.cross) + "/" + fmt(sparse.within) + "; time " + fmt(elapsed) + "s";
  return v;
}

Verdict bench_protocol() {
  const auto t0 = Clock::now();
  BenchConfig cfg;
  const std::vector<BenchRow> rows = run_bench(cfg);
  const double elapsed = seconds_since(t0);
  const int largest = *std::max_element(cfg.task_counts.begin(), cfg.task_counts.end());
  const BenchRow* sdca = nullptr;
  const BenchRow* ref = nullptr;
  std::string table;
  for (const auto& r : rows) {
    table += " T=" + std::to_string(r.num_tasks) + " " + r.variant + " " + fmt(r.seconds) + "s" + (r.reached ? "" : "(not reached)");
    if (r.num_tasks != largest) continue;
    if (r.variant == "sdca-newton") sdca = &r;
    if (r.variant == "oracle-alternating") ref = &r;
  }
  Verdict v;
  v.pass = sdca != nullptr && ref != nullptr && sdca->reached && (!ref->reached || sdca->seconds < ref->seconds) &&
           elapsed <= 600;
  v.detail = "at T=" + std::to_string(largest) + ":" + table + "; time " + fmt(elapsed) + "s (budget 600s)";
  return v;
}

// Model file and metric reports produced twice from the same seed.
Verdict determinism() {
  const auto produce = [] {
    const Dataset d = clustered(4, 15, 5, 0.3, LabelKind::classification, 99);
    SolverConfig cfg;
    cfg.seed = 12345;
    cfg.gap_tol = 1e-5;
    std::ostringstream report;
    const Model m = train(d, KernelSpec::rbf(0.2), LossSpec::hinge(), RegularizerSpec::pnorm(2, 0.5), 2.0, cfg);
    save_model(m, report);
    std::vector<double> scores;
    for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(predict(m, d.features[i], d.tasks[i]));
    const TaskMetrics tm = per_task_metric(Metric::auc, d.tasks, d.num_tasks, d.labels, scores);
    report << "macro " << std::hexfloat << tm.macro << '\n';
    CvConfig cv;
    cv.grid = {{1.0, 1.0}, {2.0, 0.5}, {0.5, 2.0}};
    cv.seed = 4;
    cv.threads = 2;
    cv.solver = cfg;
    write_cv_table(cross_validate(d, std::make_shared<GramMatrix>(gram(d, KernelSpec::rbf(0.2))), LossSpec::hinge(),
                                  RegularizerSpec::pnorm(2, 0.5), cv),
                   report);
    return report.str();
  };
  const std::string first = produce();
  const std::string second = produce();
  return {first == second, "model + metric report of " + std::to_string(first.size()) + " bytes, " +
                               (first == second ? "identical" : "different")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Verdict()> run;
  };
  ConvergenceRuns runs;
  bool runs_done = false;
  const auto ensure_runs = [&]() -> ConvergenceRuns& {
    if (!runs_done) {
      runs = convergence_runs();
      runs_done = true;
    }
    return runs;
  };
  const VerifyConfig vc;

  const std::vector<Criterion> criteria{
      {1, "analytic output kernel equals numerical maximiser",
       [&] {
         const auto t0 = Clock::now();
         const auto checks = check_theta_maximizer(vc);
         return timed_checks(checks, seconds_since(t0), 60);
       }},
      {2, "output kernel map preserves PSD",
       [&] {
         const auto t0 = Clock::now();
         const auto c = check_psd_preservation(vc);
         return timed_checks({c}, seconds_since(t0), 10);
       }},
      {3, "weak duality, monotone dual, convergence", [&] { return ensure_runs().weak_duality; }},
      {4, "cubic closed form equals Newton",
       [&] {
         const auto t0 = Clock::now();
         const auto c = check_cubic_newton(vc);
         return timed_checks({c}, seconds_since(t0), 10);
       }},
      {5, "dual gradient equals finite differences",
       [&] {
         const auto t0 = Clock::now();
         const auto c = check_dual_gradient(vc);
         return timed_checks({c}, seconds_since(t0), 30);
       }},
      {6, "solver primal equals reference primal solver",
       [&] {
         const auto t0 = Clock::now();
         const auto c = check_primal_oracle(vc);
         return timed_checks({c}, seconds_since(t0), 120);
       }},
      {7, "smaller p gives sparser output kernel", sparsity_trend},
      {8, "incremental caches match recomputation", [&] { return ensure_runs().caches; }},
      {9, "SDCA beats alternating reference at largest T", bench_protocol},
      {10, "identical seeds give identical models and reports", determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " [" << v.detail << "]"
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
