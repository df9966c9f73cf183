#include "core/linalg.hpp"

#include <array>
#include <sstream>

#include "core/error.hpp"

namespace ents {

namespace {

constexpr std::array<double, 7> kJitterSchedule = {1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

bool try_llt(const Matrix& s, Matrix& lower) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  // LLT accepts some indefinite inputs with tiny negative rounding; insist on
  // a strictly positive, finite diagonal.
  for (Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

}  // namespace

bool is_symmetric(const Matrix& s, double rel_tol) {
  if (s.rows() != s.cols()) return false;
  const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
  return (s - s.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

CholeskyFactor cholesky_lower(const Matrix& s, const char* what) {
  if (s.rows() != s.cols() || s.rows() == 0) fail(ErrorCode::InvalidArgument, std::string(what) + " must be square and non-empty");
  if (!s.allFinite()) fail(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
  if (!is_symmetric(s)) fail(ErrorCode::InvalidArgument, std::string(what) + " is not symmetric");

  CholeskyFactor out;
  if (try_llt(s, out.lower)) return out;

  if (s.isZero(0.0)) fail(ErrorCode::EnsembleCollapse, std::string(what) + " has zero variance (ensemble collapse)");
  double scale = s.trace() / static_cast<double>(s.rows());
  if (!(scale > 0.0)) scale = s.diagonal().cwiseAbs().mean();

  for (double eps : kJitterSchedule) {
    const double shift = eps * scale;
    Matrix shifted = s;
    shifted.diagonal().array() += shift;
    if (try_llt(shifted, out.lower)) {
      out.jitter = shift;
      return out;
    }
  }
  Eigen::LDLT<Matrix> ldlt(s);
  std::ostringstream msg;
  msg << what << " is not positive definite after maximum jitter; smallest pivot " << ldlt.vectorD().minCoeff();
  fail(ErrorCode::NotPositiveDefinite, msg.str());
}

Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what) {
  const CholeskyFactor f = cholesky_lower(s, what);
  const auto l = f.lower.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(b));
}

Matrix spd_right_solve(const Matrix& b, const Matrix& s, const char* what) {
  return spd_solve(s, b.transpose(), what).transpose();
}

Matrix lower_inverse(const Matrix& l) {
  for (Index i = 0; i < l.rows(); ++i) {
    if (l(i, i) == 0.0) fail(ErrorCode::InvalidArgument, "zero diagonal in triangular factor");
  }
  return l.triangularView<Eigen::Lower>().solve(Matrix::Identity(l.rows(), l.cols()));
}

SpdMatrix::SpdMatrix(Matrix values) : values_(std::move(values)) {
  if (!is_symmetric(values_)) fail(ErrorCode::InvalidArgument, "SpdMatrix: input is not symmetric");
  Matrix l;
  if (!try_llt(values_, l)) fail(ErrorCode::NotPositiveDefinite, "SpdMatrix: input is not positive definite");
}

}  // namespace ents
