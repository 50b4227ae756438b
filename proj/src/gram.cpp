#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "okl/dataset.hpp"
#include "okl/error.hpp"
#include "text.hpp"

namespace okl {

GramMatrix::GramMatrix(Eigen::MatrixXd entries) : k_(std::move(entries)) {
  if (k_.rows() != k_.cols()) throw ValidationError("Gram matrix must be square");
}

GramMatrix GramMatrix::subset(std::span<const std::size_t> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index b = 0; b < m; ++b) {
    for (Eigen::Index a = 0; a < m; ++a) {
      out(a, b) = k_(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(a)]),
                     static_cast<Eigen::Index>(rows[static_cast<std::size_t>(b)]));
    }
  }
  return GramMatrix(std::move(out));
}

double smallest_eigenvalue_estimate(const Eigen::MatrixXd& k, int iterations) {
  const Eigen::Index n = k.rows();
  if (n == 0) return 0.0;
  // Gershgorin bound: shift - K is PSD, its top eigenvalue is shift - lambda_min(K).
  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) shift = std::max(shift, k.row(i).cwiseAbs().sum());
  const Eigen::MatrixXd shifted = shift * Eigen::MatrixXd::Identity(n, n) - k;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
  double top = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = shifted * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    v = w / norm;
    top = v.dot(shifted * v);
  }
  return shift - top;
}

void validate_gram(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw ValidationError("Gram matrix must be square");
  const Eigen::Index n = k.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!(std::abs(k(i, j) - k(j, i)) <= kGramSymmetryTol)) {
        std::ostringstream msg;
        msg << "Gram matrix is not symmetric at (" << i + 1 << "," << j + 1 << ")/(" << j + 1
            << "," << i + 1 << "): " << k(i, j) << " vs " << k(j, i);
        throw ValidationError(msg.str());
      }
    }
  }
  if (!k.allFinite()) throw ValidationError("Gram matrix has non-finite entries");
  const double max_diag = n > 0 ? k.diagonal().maxCoeff() : 0.0;
  if (max_diag <= 0.0) {
    // A PSD matrix with a non-positive diagonal is the zero matrix.
    if (n > 0 && (k.diagonal().minCoeff() < 0.0 || k.cwiseAbs().maxCoeff() > 0.0)) {
      throw ValidationError("Gram matrix is not positive semidefinite (non-positive diagonal)");
    }
    return;
  }
  const Eigen::MatrixXd probe =
      k + kGramPsdTol * max_diag * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(probe);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Gram matrix is not positive semidefinite (most negative eigenvalue ~ "
        << smallest_eigenvalue_estimate(k) << ")";
    throw ValidationError(msg.str());
  }
}

GramMatrix load_gram(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty Gram file");
  const auto n = detail::to_integer(detail::trim(line));
  if (!n || *n < 0) throw ParseError("expected matrix dimension", line_no);

  Eigen::MatrixXd k(*n, *n);
  for (long long row = 0; row < *n; ++row) {
    if (!next_line()) {
      throw ValidationError("dimension mismatch: expected " + std::to_string(*n) +
                            " rows, got " + std::to_string(row));
    }
    std::string_view rest = line;
    long long col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto cell = detail::trim(rest.substr(0, comma));
      if (col >= *n) {
        throw ValidationError("dimension mismatch on line " + std::to_string(line_no) +
                              ": more than " + std::to_string(*n) + " values");
      }
      const auto v = detail::to_double(cell);
      if (!v) throw ParseError("bad value \"" + std::string(cell) + "\"", line_no);
      k(row, col++) = *v;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (col != *n) {
      throw ValidationError("dimension mismatch on line " + std::to_string(line_no) +
                            ": expected " + std::to_string(*n) + " values, got " +
                            std::to_string(col));
    }
  }
  if (next_line()) {
    throw ValidationError("dimension mismatch: more than " + std::to_string(*n) + " rows");
  }
  validate_gram(k);
  return GramMatrix(std::move(k));
}

GramMatrix load_gram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open Gram file " + path);
  return load_gram(in);
}

void write_gram(const GramMatrix& gram, std::ostream& out) {
  const auto& k = gram.matrix();
  out << k.rows() << '\n';
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      if (j > 0) out << ',';
      out << detail::format_double(k(i, j));
    }
    out << '\n';
  }
}

}  // namespace okl
