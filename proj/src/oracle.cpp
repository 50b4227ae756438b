#include "okl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "okl/error.hpp"

namespace okl::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double frob_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return a.cwiseProduct(b).sum(); }

Eigen::MatrixXd joint_gram(const Dataset& data, const GramMatrix& gram, const Eigen::MatrixXd& theta) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g(i, j) = gram(i, j) * theta(data.tasks[static_cast<std::size_t>(i)], data.tasks[static_cast<std::size_t>(j)]);
    }
  }
  return g;
}

// c(r, s) = sum over t_i = r, t_j = s of a_i a_j k_ij.
Eigen::MatrixXd inner_matrix(const Dataset& data, const GramMatrix& gram, const Eigen::VectorXd& a) {
  Eigen::MatrixXd emb = Eigen::MatrixXd::Zero(a.size(), data.num_tasks);
  for (Eigen::Index i = 0; i < a.size(); ++i) emb(i, data.tasks[static_cast<std::size_t>(i)]) = a(i);
  Eigen::MatrixXd c = emb.transpose() * gram.matrix() * emb;
  return 0.5 * (c + c.transpose());
}

// Fixed-Theta dual: warm-started, exact per-coordinate maximisation for the box losses.
Eigen::VectorXd inner_dual(const Dataset& data, const Eigen::MatrixXd& g, const LossSpec& loss, double C,
                           Eigen::VectorXd a) {
  const auto n = g.rows();
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.labels.data(), n);
  if (loss.kind == LossSpec::Kind::squared) {
    Eigen::MatrixXd m = g;
    m.diagonal().array() += 1.0 / (2.0 * C);
    return m.ldlt().solve(y);
  }
  if (a.size() != n) a = Eigen::VectorXd::Zero(n);
  const double eps = loss.kind == LossSpec::Kind::eps_svr ? loss.epsilon : 0.0;
  Eigen::VectorXd ga = g * a;
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double biggest = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double lo = -C;
      double hi = C;
      if (loss.kind == LossSpec::Kind::hinge) {
        lo = y(i) > 0 ? 0.0 : -C;
        hi = y(i) > 0 ? C : 0.0;
      }
      // maximise  u (y_i - rest) - eps |u| - g_ii u^2 / 2  over [lo, hi]
      const double rest = ga(i) - g(i, i) * a(i);
      const double lin = y(i) - rest;
      double u = 0.0;
      if (g(i, i) > 0.0) {
        const double shrunk = std::copysign(std::max(0.0, std::abs(lin) - eps), lin);
        u = std::clamp(shrunk / g(i, i), lo, hi);
      } else if (std::abs(lin) > eps) {
        u = lin > 0 ? hi : lo;
      } else {
        u = std::clamp(0.0, lo, hi);
      }
      const double d = u - a(i);
      if (d != 0.0) {
        ga += d * g.col(i);
        a(i) = u;
        biggest = std::max(biggest, std::abs(d));
      }
    }
    if (biggest <= 1e-13 * std::max(1.0, C)) break;
  }
  return a;
}

double fixed_theta_primal(const Dataset& data, const LossSpec& loss, double C, const Eigen::MatrixXd& g,
                          const Eigen::VectorXd& a) {
  const Eigen::VectorXd f = g * a;
  double fit = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) fit += okl::loss(loss, data.labels[static_cast<std::size_t>(i)], f(i));
  return C * fit + 0.5 * a.dot(f);
}

void check_sizes(const Dataset& data, const GramMatrix& gram) {
  if (gram.size() != static_cast<Eigen::Index>(data.size())) throw ValidationError("Gram size does not match the dataset");
  if (data.num_tasks < 1) throw ValidationError("need at least one task");
}

Eigen::MatrixXd starting_theta(const RegularizerSpec& reg, int T) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(T, T);
  // Entropy needs strictly positive entries.
  if (reg.kind == RegularizerSpec::Kind::entropy) theta.array() += 1.0;
  return theta;
}

}  // namespace

void SplittingConfig::validate() const {
  if (!(step > 0.0) || !(tol > 0.0) || max_iter < 1) {
    throw ValidationError("invalid splitting configuration");
  }
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

double prox_entry(const RegularizerSpec& reg, double tau, double v0) {
  const double p = reg.kind == RegularizerSpec::Kind::pnorm ? reg.p() : 0.0;
  const auto dv = [&](double x) {
    switch (reg.kind) {
      case RegularizerSpec::Kind::pnorm:
        return x == 0.0 ? 0.0 : 0.5 * p * std::pow(std::abs(x), p - 1.0) * (x > 0 ? 1.0 : -1.0);
      case RegularizerSpec::Kind::entropy:
        return std::log(x);
      case RegularizerSpec::Kind::cosh:
        return std::asinh(x);
    }
    return 0.0;
  };
  // h is increasing; its root is the prox.
  const auto h = [&](double x) { return tau * dv(x) + x - v0; };
  double lo = std::min(0.0, v0);
  double hi = std::max(0.0, v0);
  if (reg.kind == RegularizerSpec::Kind::entropy) {
    hi = std::max(1.0, v0);
    lo = hi;
    while (h(lo) > 0.0) {
      lo *= 0.5;
      if (lo < std::numeric_limits<double>::min()) return lo;
    }
  }
  for (int it = 0; it < 4000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double conjugate_objective(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& theta, const RegularizerSpec& reg) {
  return frob_dot(rho, theta) - v_of_theta(reg, theta);
}

MaximizeResult maximize_conjugate(const Eigen::MatrixXd& rho, const RegularizerSpec& reg,
                                  const SplittingConfig& config) {
  config.validate();
  reg.validate();
  if (rho.rows() != rho.cols() || rho.rows() > 6) throw ValidationError("rho must be square with T <= 6");
  const Eigen::Index T = rho.rows();
  const double tau = config.step;

  // minimise V(X) - <rho, X> subject to X = Z, Z PSD (scaled-dual ADMM)
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(T, T);
  Eigen::MatrixXd z = x;
  Eigen::MatrixXd u = x;
  MaximizeResult res;
  for (res.iterations = 1; res.iterations <= config.max_iter; ++res.iterations) {
    const Eigen::MatrixXd arg = z - u + tau * rho;
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index s = 0; s < T; ++s) x(r, s) = prox_entry(reg, tau, arg(r, s));
    }
    const Eigen::MatrixXd z_prev = z;
    z = project_psd(x + u);
    u += x - z;
    const double scale = std::max(1.0, z.norm());
    if ((x - z).norm() < config.tol * scale && (z - z_prev).norm() < config.tol * scale) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, config.max_iter);
  res.theta = z;
  res.value = conjugate_objective(rho, z, reg);
  return res;
}

InnerSolution solve_fixed_theta(const Dataset& data, const GramMatrix& gram, const LossSpec& loss,
                                double C, const Eigen::MatrixXd& theta) {
  check_sizes(data, gram);
  const Eigen::MatrixXd g = joint_gram(data, gram, theta);
  InnerSolution s;
  s.a = inner_dual(data, g, loss, C, {});
  s.primal = fixed_theta_primal(data, loss, C, g, s.a);
  return s;
}

PrimalSplittingSolver::PrimalSplittingSolver(const Dataset& data, std::shared_ptr<const GramMatrix> gram,
                                             const LossSpec& loss, const RegularizerSpec& reg, double C,
                                             const SplittingConfig& config)
    : data_(data), gram_(std::move(gram)), loss_(loss), reg_(reg), C_(C), config_(config),
      gamma_(config.step), best_(kInf), best_residual_(kInf) {
  config_.validate();
  reg_.validate();
  if (!gram_) throw ValidationError("missing Gram matrix");
  check_sizes(data_, *gram_);
  if (!(C_ > 0.0)) throw ValidationError("C must be positive");
  for (double y : data_.labels) validate_label(loss_, y);
  z_ = starting_theta(reg_, data_.num_tasks);
  best_theta_ = z_;
}

double PrimalSplittingSolver::step() {
  ++iterations_;
  const Eigen::Index T = data_.num_tasks;
  // x_b = cone projection, x_a = prox of lambda V after a gradient step on J at x_b.
  const Eigen::MatrixXd xb = project_psd(z_);
  const Eigen::MatrixXd g = joint_gram(data_, *gram_, xb);
  a_ = inner_dual(data_, g, loss_, C_, a_);
  const double v = v_of_theta(reg_, xb);
  double value = kInf;
  if (std::isfinite(v)) {
    value = fixed_theta_primal(data_, loss_, C_, g, a_) + reg_.lambda * v;
    if (value < best_) {
      best_ = value;
      best_theta_ = xb;
    }
  }
  const Eigen::MatrixXd grad = -0.5 * inner_matrix(data_, *gram_, a_);
  const Eigen::MatrixXd arg = 2.0 * xb - z_ - gamma_ * grad;
  Eigen::MatrixXd xa(T, T);
  for (Eigen::Index r = 0; r < T; ++r) {
    for (Eigen::Index s = 0; s < T; ++s) xa(r, s) = prox_entry(reg_, gamma_ * reg_.lambda, arg(r, s));
  }
  const double residual = (xa - xb).norm();
  if (residual < config_.tol * std::max(1.0, xb.norm())) {
    converged_ = true;
    return value;
  }
  z_ += xa - xb;
  if (residual < best_residual_) {
    best_residual_ = residual;
    since_best_ = 0;
  } else if (++since_best_ > 200 || !std::isfinite(residual) || residual > 1e3 * best_residual_) {
    // Step too long for the curvature of J: halve it and restart from the best point.
    gamma_ *= 0.5;
    z_ = best_theta_;
    best_residual_ = kInf;
    since_best_ = 0;
    if (gamma_ < 1e-12) converged_ = true;
  }
  return value;
}

PrimalResult solve_primal_numeric(const Dataset& data, const GramMatrix& gram, const LossSpec& loss,
                                  const RegularizerSpec& reg, double C, const SplittingConfig& config) {
  check_sizes(data, gram);
  if (data.size() > 12 || data.num_tasks > 3) throw ValidationError("reference primal solver needs n <= 12 and T <= 3");
  PrimalSplittingSolver solver(data, std::make_shared<GramMatrix>(gram), loss, reg, C, config);
  while (!solver.converged() && solver.iterations() < config.max_iter) solver.step();
  PrimalResult res;
  res.theta = solver.best_theta();
  res.objective = solver.best_objective();
  res.iterations = solver.iterations();
  res.converged = solver.converged();
  return res;
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("non-finite function value at coordinate " + std::to_string(i));
    }
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace okl::oracle
