// One-dimensional coordinate subproblems of the SDCA solver.
//
// For coordinate i with task r, a = k_ii, b_s = B(i, s) and c = the cached inner
// matrix, the update alpha_i += delta changes only row/column r of c:
//   c_rr' = c_rr + 2 b_r delta + a delta^2,   c_rs' = c_rs + b_s delta  (s != r),
// so the delta-dependent part of the objective costs O(T) per evaluation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "okl/error.hpp"
#include "okl/solver.hpp"
#include "solver_internal.hpp"

namespace okl {

namespace detail {

Coordinate::Coordinate(const Problem& problem, const DualState& state, Eigen::Index i,
                       SubproblemStats* stats)
    : term(conjugate_term(problem.loss, problem.labels[static_cast<std::size_t>(i)],
                          state.alpha(i), problem.C)),
      r(problem.tasks[static_cast<std::size_t>(i)]),
      a(problem.kernel()(i, i)),
      b(state.B.row(i).transpose()),
      c_row(state.c.row(r).transpose()),
      inv_C(1.0 / problem.C),
      cell_(problem.reg),
      stats_(stats) {}

void Coordinate::count() const {
  if (stats_ != nullptr) stats_->cell_evaluations += b.size();
}

double Coordinate::penalty(double delta) const {
  count();
  double total = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    if (s == r) {
      total += cell_.value(c_row(r) + (2.0 * b(r) + a * delta) * delta);
    } else {
      total += 2.0 * cell_.value(c_row(s) + b(s) * delta);
    }
  }
  return total;
}

double Coordinate::value(double delta) const {
  const double conj = term.value(delta);
  if (!std::isfinite(conj)) return conj;
  return conj + inv_C * penalty(delta);
}

double Coordinate::deriv(double delta, Side side) const {
  count();
  double total = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    if (s == r) {
      total += cell_.d1(c_row(r) + (2.0 * b(r) + a * delta) * delta) * 2.0 * (b(r) + a * delta);
    } else {
      total += 2.0 * cell_.d1(c_row(s) + b(s) * delta) * b(s);
    }
  }
  return term.deriv(delta, side) + inv_C * total;
}

double Coordinate::deriv2(double delta) const {
  count();
  double total = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    if (s == r) {
      const double x = c_row(r) + (2.0 * b(r) + a * delta) * delta;
      const double slope = 2.0 * (b(r) + a * delta);
      total += cell_.d2(x) * slope * slope + cell_.d1(x) * 2.0 * a;
    } else {
      total += 2.0 * cell_.d2(c_row(s) + b(s) * delta) * b(s) * b(s);
    }
  }
  return term.deriv2(delta) + inv_C * total;
}

std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0) {
  std::vector<double> roots;
  if (c3 == 0.0) {
    if (c2 == 0.0) {
      if (c1 != 0.0) roots.push_back(-c0 / c1);
      return roots;
    }
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) return roots;
    // Cancellation-free form of the quadratic formula.
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    if (q != 0.0) roots.push_back(c0 / q);
    roots.push_back(q / c2);
    return roots;
  }

  const double A = c2 / c3;
  const double B = c1 / c3;
  const double C = c0 / c3;
  // x = t - A/3 gives t^3 + p t + q = 0.
  const double p = B - A * A / 3.0;
  const double q = 2.0 * A * A * A / 27.0 - A * B / 3.0 + C;
  const double shift = -A / 3.0;
  const double disc = 0.25 * q * q + p * p * p / 27.0;

  if (disc >= 0.0) {
    const double u = std::cbrt(-0.5 * q - std::copysign(std::sqrt(disc), q));
    const double t = u != 0.0 ? u - p / (3.0 * u) : 0.0;
    roots.push_back(t + shift);
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double angle = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) {
      roots.push_back(m * std::cos(angle - 2.0 * std::numbers::pi * j / 3.0) + shift);
    }
  }

  // Two Newton steps on the polynomial remove the cancellation error of the closed form.
  for (double& x : roots) {
    for (int it = 0; it < 2; ++it) {
      const double f = ((c3 * x + c2) * x + c1) * x + c0;
      const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
      if (df == 0.0) break;
      const double next = x - f / df;
      if (!std::isfinite(next)) break;
      x = next;
    }
  }
  return roots;
}

}  // namespace detail

double subproblem_value(const Problem& problem, const DualState& state, Eigen::Index i,
                        double delta) {
  const detail::Coordinate co(problem, state, i, nullptr);
  const double moving = co.value(delta);
  if (!std::isfinite(moving)) return moving;
  const CellPenalty cell(problem.reg);
  double fixed = 0.0;
  for (Eigen::Index z = 0; z < state.c.cols(); ++z) {
    if (z == co.r) continue;
    for (Eigen::Index s = 0; s < state.c.rows(); ++s) {
      if (s != co.r) fixed += cell.value(state.c(s, z));
    }
  }
  return moving + fixed / problem.C;
}

double solve_subproblem_newton(const Problem& problem, const DualState& state, Eigen::Index i,
                               const SolverConfig& config, SubproblemStats* stats) {
  const detail::Coordinate co(problem, state, i, stats);
  double lo = co.term.lower();
  double hi = co.term.upper();

  const auto check = [](double v) {
    if (!std::isfinite(v)) throw NumericalError("non-finite subproblem derivative (cache corruption?)");
    return v;
  };

  // The objective is smooth away from the kink; decide on which side the minimiser is.
  if (const auto kink = co.term.kink(); kink && *kink > lo && *kink < hi) {
    const double left = check(co.deriv(*kink, Side::left));
    const double right = check(co.deriv(*kink, Side::right));
    if (left <= 0.0 && right >= 0.0) return *kink;
    if (right < 0.0) {
      lo = *kink;
    } else {
      hi = *kink;
    }
  }
  if (std::isfinite(lo) && check(co.deriv(lo, Side::right)) >= 0.0) return lo;
  if (std::isfinite(hi) && check(co.deriv(hi, Side::left)) <= 0.0) return hi;

  double x = std::clamp(0.0, lo, hi);
  // Bracket an unbounded side by doubling steps.
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    const double g0 = check(co.deriv(x));
    if (g0 == 0.0) return x;
    double step = std::max(1.0, std::abs(state.alpha(i)));
    if (g0 > 0.0) {
      hi = std::min(hi, x);
      while (true) {
        const double probe = x - step;
        if (probe <= lo) break;
        if (check(co.deriv(probe)) < 0.0) {
          lo = probe;
          break;
        }
        hi = probe;
        step *= 2.0;
        if (step > 1e150) throw NumericalError("subproblem bracketing failed");
      }
    } else {
      lo = std::max(lo, x);
      while (true) {
        const double probe = x + step;
        if (probe >= hi) break;
        if (check(co.deriv(probe)) > 0.0) {
          hi = probe;
          break;
        }
        lo = probe;
        step *= 2.0;
        if (step > 1e150) throw NumericalError("subproblem bracketing failed");
      }
    }
  }

  // Invariant: deriv < 0 at lo, deriv > 0 at hi.
  if (x <= lo || x >= hi) x = 0.5 * (lo + hi);
  for (int it = 0; it < config.newton_max_iter; ++it) {
    if (stats != nullptr) ++stats->iterations;
    const double g = check(co.deriv(x));
    if (g == 0.0) break;
    if (g < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double h = co.deriv2(x);
    double next = x - g / h;
    if (!(h > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = next - x;
    x = next;
    if (std::abs(step) <= config.newton_tol || hi - lo <= config.newton_tol) break;
  }

  // Never accept a step that is worse than staying put.
  if (co.value(0.0) < co.value(x)) return 0.0;
  return x;
}

double solve_subproblem_cubic(const Problem& problem, const DualState& state, Eigen::Index i,
                              SubproblemStats* stats) {
  if (!cubic_applicable(problem)) {
    throw std::invalid_argument("cubic subproblem solver needs the pnorm regularizer with k = 1");
  }
  const detail::Coordinate co(problem, state, i, stats);
  if (stats != nullptr) ++stats->iterations;
  const double eta = okl::eta(problem.reg, problem.C);
  const Eigen::Index r = co.r;
  const double a = co.a;
  const double br = co.b(r);
  const double cr = co.c_row(r);
  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index s = 0; s < co.b.size(); ++s) {
    if (s == r) continue;
    s1 += co.b(s) * co.c_row(s);
    s2 += co.b(s) * co.b(s);
  }
  if (stats != nullptr) stats->cell_evaluations += co.b.size();

  const double q = co.term.quadratic();
  const double alpha = co.term.alpha();
  const double lo = co.term.lower();
  const double hi = co.term.upper();

  struct Piece {
    double lo, hi;
    Side side;
  };
  std::vector<Piece> pieces;
  if (const auto kink = co.term.kink(); kink && *kink > lo && *kink < hi) {
    pieces.push_back({lo, *kink, Side::left});
    pieces.push_back({*kink, hi, Side::right});
  } else {
    // Whole interval on one side of u = 0 (or no |u| term at all).
    const bool right = !co.term.kink() || *co.term.kink() <= lo;
    pieces.push_back({lo, hi, right ? Side::right : Side::left});
  }

  // Stationarity on a piece:
  //   eta [4a^2 d^3 + 12 a b_r d^2 + (8 b_r^2 + 4 a c_rr + 4 S2) d + 4 b_r c_rr + 4 S1]
  //   + 2 q (alpha + d) + slope = 0
  std::vector<double> candidates{0.0};
  for (const auto& piece : pieces) {
    const double slope = co.term.slope(piece.side);
    const double c3 = 4.0 * eta * a * a;
    const double c2 = 12.0 * eta * a * br;
    const double c1 = eta * (8.0 * br * br + 4.0 * a * cr + 4.0 * s2) + 2.0 * q;
    const double c0 = eta * (4.0 * br * cr + 4.0 * s1) + 2.0 * q * alpha + slope;
    for (double root : detail::real_cubic_roots(c3, c2, c1, c0)) {
      if (root >= piece.lo && root <= piece.hi) candidates.push_back(root);
    }
    if (std::isfinite(piece.lo)) candidates.push_back(piece.lo);
    if (std::isfinite(piece.hi)) candidates.push_back(piece.hi);
  }

  double best = 0.0;
  double best_value = std::numeric_limits<double>::infinity();
  for (double d : candidates) {
    const double v = co.value(d);
    if (v < best_value) {
      best_value = v;
      best = d;
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("non-finite subproblem objective");
  return best;
}

}  // namespace okl
