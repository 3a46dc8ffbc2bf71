#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlrt/errors.hpp"
#include "rlrt/rmt_core.hpp"

namespace rlrt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n x p observations, one row per observation.
class DataMatrix {
 public:
  explicit DataMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 2) throw DomainError("DataMatrix: need at least 2 observations");
    if (values_.cols() < 1) throw DomainError("DataMatrix: need at least 1 variable");
    if (!values_.allFinite()) throw DomainError("DataMatrix: entries must be finite");
  }

  const Matrix& values() const noexcept { return values_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  DimensionSetup setup() const { return {n(), p()}; }

 private:
  Matrix values_;
};

/// Centered, unbiased sample covariance (divisor n - 1).
struct SampleCovariance {
  Matrix matrix;
  std::size_t n_tilde;
};

/// lambda * S + (1 - lambda) * I.
struct ShrunkenCovariance {
  Matrix matrix;
  double lambda;
};

namespace cov {

inline Matrix centered(const Matrix& x) { return x.rowwise() - x.colwise().mean(); }

inline SampleCovariance sample_covariance(const DataMatrix& data) {
  const Matrix xc = centered(data.values());
  const auto p = xc.cols();
  Matrix s = Matrix::Zero(p, p);
  s.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose(), 1.0 / static_cast<double>(data.n() - 1));
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return {std::move(s), data.n() - 1};
}

inline ShrunkenCovariance shrink(const SampleCovariance& s, const ShrinkageParams& params) {
  if (s.matrix.rows() != s.matrix.cols()) throw DomainError("shrink: covariance must be square");
  const double lambda = params.lambda();
  Matrix out = lambda * s.matrix;
  out.diagonal().array() += 1.0 - lambda;
  return {std::move(out), lambda};
}

/// Full spectrum of a symmetric matrix, descending.
inline std::vector<double> sym_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("sym_eigenvalues: matrix must be square");
  if (m.size() == 0) return {};
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("sym_eigenvalues: matrix is not symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eigenvalues: eigensolver did not converge");
  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + sym.rows());
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

inline std::vector<double> sample_spectrum(const DataMatrix& data) {
  return sym_eigenvalues(sample_covariance(data).matrix);
}

}  // namespace cov
}  // namespace rlrt
