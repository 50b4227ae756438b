#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "okl/dataset.hpp"
#include "okl/kernels.hpp"
#include "okl/losses.hpp"
#include "okl/regularizers.hpp"
#include "okl/solver.hpp"

namespace okl {

/// Trained multi-task predictor
///   F(x, s) = sum_j alpha_j Theta(s, t_j) k(x_j, x).
/// `training` holds the support samples (features may be empty for a precomputed
/// kernel, in which case predictions need explicit Gram rows).
struct Model {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd theta;
  LossSpec loss;
  RegularizerSpec reg;
  double C = 1.0;
  KernelSpec kernel;
  Dataset training;
  ConvergenceReport report;

  int num_tasks() const { return training.num_tasks; }
  Eigen::Index size() const { return alpha.size(); }
};

/// Fits a model on `data`. For a precomputed kernel `gram` is required; otherwise it is
/// computed (with `threads` workers) when not supplied.
Model train(const Dataset& data, const KernelSpec& kernel, const LossSpec& loss,
            const RegularizerSpec& reg, double C, const SolverConfig& config,
            std::shared_ptr<const GramMatrix> gram = nullptr, const EpochObserver& observer = {},
            int threads = 1);

/// Score for a 0-based task. Throws ValidationError for an unknown task, a feature index
/// beyond the training dimensionality, or a precomputed kernel.
double predict(const Model& model, const SparseVector& x, int task);

/// Same formula with row(j) = k(x_j, x) supplied.
double predict_gram_row(const Model& model, const Eigen::VectorXd& row, int task);

/// Scores of every task for one input (one kernel row, reused across tasks).
Eigen::VectorXd predict_all_tasks(const Model& model, const Eigen::VectorXd& row);

/// Index of the largest score; ties go to the lowest index.
int argmax_task(const Eigen::VectorXd& scores);

int predict_multiclass(const Model& model, const SparseVector& x);
int predict_multiclass_gram_row(const Model& model, const Eigen::VectorXd& row);

/// Versioned JSON document with a checksum over its payload.
inline constexpr int kModelFormatVersion = 1;
void save_model(const Model& model, std::ostream& out);
void save_model_file(const Model& model, const std::string& path);
/// Throws ParseError naming the first missing field, or for a checksum failure;
/// ValidationError for a version mismatch or inconsistent dimensions.
Model load_model(std::istream& in);
Model load_model_file(const std::string& path);

/// Theta recomputed from alpha through the inner-product matrix of the training data.
/// `gram` is needed for a precomputed kernel and optional otherwise.
Eigen::MatrixXd rederive_theta(const Model& model, const GramMatrix* gram = nullptr);

enum class ThetaFormat { csv, pgm };
enum class ThetaTransform { raw, abs, log1p_abs };

Eigen::MatrixXd transform_theta(const Eigen::MatrixXd& theta, ThetaTransform transform);

/// csv: T rows of transformed values. pgm: binary 8-bit grayscale, transformed values
/// min-max rescaled so the largest maps to 255; with `drop_diagonal` the diagonal is
/// excluded from the rescaling and written as 0.
void export_theta(const Eigen::MatrixXd& theta, ThetaFormat format, ThetaTransform transform,
                  bool drop_diagonal, std::ostream& out, int digits = 17);

}  // namespace okl
