#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace okl {

/// One non-zero of a sparse feature vector. Indices are 1-based, as in the file format.
struct Feature {
  int index = 0;
  double value = 0.0;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sorted by ascending index, no duplicates.
using SparseVector = std::vector<Feature>;

/// Multi-task training or test data.
///
/// Tasks are stored as contiguous 0-based indices; `task_ids[t]` is the integer that
/// identified task t in the source file (task t is printed as `t + 1` when a
/// contiguous 1-based id is needed). `features` always has one entry per sample but
/// may hold empty vectors when only a precomputed Gram matrix is used.
struct Dataset {
  int num_tasks = 0;
  std::vector<int> tasks;
  std::vector<double> labels;
  std::vector<SparseVector> features;
  std::vector<long long> task_ids;

  std::size_t size() const { return tasks.size(); }
  /// Largest feature index over all samples (0 when there are no features).
  int dimension() const;
  std::vector<std::size_t> task_counts() const;
  /// Rows may repeat. Task numbering and the id side map are kept as-is, so a subset
  /// can leave some tasks without samples.
  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parses the task-annotated sparse text format:
///   `<task:int> <label:float> <idx:int>:<val:float> ...`
/// `#` starts a comment line, blank lines are skipped. Task ids are re-indexed to
/// 0..T-1 in ascending order of the original id. Throws ParseError naming the line.
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset_file(const std::string& path);

/// Inverse of parse_dataset (original task ids, 17 significant digits).
void serialize_dataset(const Dataset& data, std::ostream& out);

/// Re-maps the tasks of `data` (a freshly parsed test set) onto the task numbering of
/// `reference_ids`. Throws ValidationError for ids unknown to the reference.
void align_tasks(Dataset& data, std::span<const long long> reference_ids);

/// Expands a class-labelled dataset (task field = class) into one-vs-all binary tasks:
/// every sample appears once per class with label +1 for its own class and -1 otherwise.
struct OneVsAll {
  Dataset data;
  /// Row of the class-labelled input each expanded sample came from.
  std::vector<std::size_t> origin;
};
OneVsAll one_vs_all(const Dataset& classes);

/// Dense symmetric positive semidefinite matrix of scalar kernel values.
class GramMatrix {
 public:
  GramMatrix() = default;
  /// Takes the matrix as-is; use validate_gram() on untrusted input.
  explicit GramMatrix(Eigen::MatrixXd entries);

  const Eigen::MatrixXd& matrix() const { return k_; }
  Eigen::Index size() const { return k_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return k_(i, j); }

  /// K[rows[a], rows[b]]; rows may repeat.
  GramMatrix subset(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd k_;
};

inline constexpr double kGramSymmetryTol = 1e-12;
inline constexpr double kGramPsdTol = 1e-8;

/// Symmetry within kGramSymmetryTol (absolute) and PSD within
/// -kGramPsdTol * max(diag), probed by a shifted Cholesky factorisation.
/// Throws ValidationError; the PSD message carries a power-iteration estimate of the
/// most negative eigenvalue.
void validate_gram(const Eigen::MatrixXd& k);

/// Estimate of the smallest eigenvalue of a symmetric matrix by power iteration on a
/// shifted matrix.
double smallest_eigenvalue_estimate(const Eigen::MatrixXd& k, int iterations = 500);

/// CSV Gram file: line 1 holds n, then n lines of n comma-separated reals.
GramMatrix load_gram(std::istream& in);
GramMatrix load_gram_file(const std::string& path);
void write_gram(const GramMatrix& gram, std::ostream& out);

enum class LabelKind { classification, regression };

struct SynthConfig {
  int num_tasks = 2;
  /// Partition of {0..num_tasks-1}; tasks in one cluster share a base weight vector.
  std::vector<std::vector<int>> clusters;
  int samples_per_task = 10;
  int dim = 5;
  /// Per-task perturbation of the cluster weight, Euclidean norm at most `noise`.
  double noise = 0.0;
  std::uint64_t seed = 0;
  LabelKind labels = LabelKind::classification;
};

struct SynthDataset {
  Dataset data;
  std::vector<Eigen::VectorXd> task_weights;
};

/// Clustered-task fixture: Gaussian inputs, labels sign(<w_t, x>) (classification)
/// or <w_t, x> (regression). Deterministic for a given seed.
SynthDataset synth_clustered(const SynthConfig& config);

}  // namespace okl
