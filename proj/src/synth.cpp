#include <cmath>
#include <set>

#include "okl/dataset.hpp"
#include "okl/error.hpp"
#include "okl/random.hpp"

namespace okl {

SynthDataset synth_clustered(const SynthConfig& config) {
  const int T = config.num_tasks;
  if (T < 1) throw ValidationError("synth_clustered: need at least one task");
  if (config.samples_per_task < 2) throw ValidationError("synth_clustered: m must be >= 2");
  if (config.dim < 2) throw ValidationError("synth_clustered: d must be >= 2");
  if (config.noise < 0.0) throw ValidationError("synth_clustered: noise must be >= 0");

  std::vector<int> cluster_of(static_cast<std::size_t>(T), -1);
  for (std::size_t c = 0; c < config.clusters.size(); ++c) {
    if (config.clusters[c].empty()) throw ValidationError("synth_clustered: empty cluster");
    for (int t : config.clusters[c]) {
      if (t < 0 || t >= T || cluster_of[static_cast<std::size_t>(t)] != -1) {
        throw ValidationError("synth_clustered: clusters do not partition the tasks");
      }
      cluster_of[static_cast<std::size_t>(t)] = static_cast<int>(c);
    }
  }
  for (int c : cluster_of) {
    if (c < 0) throw ValidationError("synth_clustered: clusters do not partition the tasks");
  }

  Rng rng(config.seed);
  const auto d = static_cast<Eigen::Index>(config.dim);
  std::vector<Eigen::VectorXd> base;
  for (std::size_t c = 0; c < config.clusters.size(); ++c) {
    Eigen::VectorXd w(d);
    for (Eigen::Index j = 0; j < d; ++j) w(j) = rng.normal();
    base.push_back(w);
  }

  SynthDataset out;
  out.data.num_tasks = T;
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd perturb(d);
    for (Eigen::Index j = 0; j < d; ++j) perturb(j) = rng.uniform(-1.0, 1.0);
    // max-norm of the uniform cube is sqrt(d); scale so the norm stays <= noise
    perturb *= config.noise / std::sqrt(static_cast<double>(d));
    out.task_weights.push_back(base[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(t)])] +
                               perturb);
    out.data.task_ids.push_back(t + 1);
  }

  for (int t = 0; t < T; ++t) {
    const auto& w = out.task_weights[static_cast<std::size_t>(t)];
    for (int s = 0; s < config.samples_per_task; ++s) {
      SparseVector x;
      double score = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double v = rng.normal();
        x.push_back({static_cast<int>(j) + 1, v});
        score += w(j) * v;
      }
      out.data.tasks.push_back(t);
      out.data.labels.push_back(config.labels == LabelKind::classification
                                    ? (score >= 0.0 ? 1.0 : -1.0)
                                    : score);
      out.data.features.push_back(std::move(x));
    }
  }
  return out;
}

}  // namespace okl
