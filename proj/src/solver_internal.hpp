#pragma once

#include <vector>

#include <Eigen/Dense>

#include "okl/losses.hpp"
#include "okl/regularizers.hpp"
#include "okl/solver.hpp"

namespace okl::detail {

// Delta-dependent part of the coordinate subproblem, O(T) per evaluation.
class Coordinate {
 public:
  Coordinate(const Problem& problem, const DualState& state, Eigen::Index i,
             SubproblemStats* stats);

  // Cells in row and column r after the update (unscaled).
  double penalty(double delta) const;
  double value(double delta) const;
  double deriv(double delta, Side side = Side::right) const;
  double deriv2(double delta) const;

  ConjugateTerm term;
  Eigen::Index r;
  double a;
  Eigen::VectorXd b;
  Eigen::VectorXd c_row;
  double inv_C;

 private:
  void count() const;

  CellPenalty cell_;
  SubproblemStats* stats_;
};

std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0);

}  // namespace okl::detail
