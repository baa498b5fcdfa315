#include "cubic_observer/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cubic_observer/errors.hpp"

namespace cubic_observer::numlin {

namespace {

void require_square(const Mat& s, std::string_view what) {
  if (s.rows() != s.cols()) {
    throw DimensionError(std::string(what) + " must be square, got " + std::to_string(s.rows()) +
                         "x" + std::to_string(s.cols()));
  }
}

}  // namespace

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + " has non-finite entries");
  }
}

int mat_rank(const Mat& m, double rtol) {
  if (!(rtol > 0.0)) {
    throw InvalidInput("rank tolerance must be positive");
  }
  require_finite(m, "matrix");
  if (m.size() == 0) {
    return 0;
  }
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) {
    return 0;
  }
  const double cutoff = rtol * s(0);
  return static_cast<int>((s.array() > cutoff).count());
}

Mat pinv(const Mat& m) {
  require_finite(m, "matrix");
  if (m.size() == 0) {
    return Mat::Zero(m.cols(), m.rows());
  }
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = static_cast<double>(std::max(m.rows(), m.cols())) *
                        std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
  Vec inv_s = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      inv_s(i) = 1.0 / s(i);
    }
  }
  return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
}

Mat symmetrize(const Mat& s) { return 0.5 * (s + s.transpose()); }

EigExtremes sym_eig_extremes(const Mat& s) {
  require_square(s, "symmetric matrix");
  require_finite(s, "symmetric matrix");
  if (s.size() == 0) {
    return {0.0, 0.0};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(s), Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

double definiteness_margin(const Mat& s) { return sym_eig_extremes(s).max; }

double spectral_abscissa(const Mat& m) {
  require_square(m, "matrix");
  require_finite(m, "matrix");
  if (m.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Mat solve_lyapunov(const Mat& g, const Mat& q) {
  require_square(g, "G");
  require_square(q, "Q");
  const Eigen::Index n = g.rows();
  if (q.rows() != n) {
    throw DimensionError("Lyapunov right-hand side must match G");
  }
  // Column-major vec: vec(G^T P) = (I kron G^T) vec(P), vec(P G) = (G^T kron I) vec(P).
  const Mat id = Mat::Identity(n, n);
  Mat op = Mat::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      op.block(i * n, j * n, n, n) += id(i, j) * g.transpose() + g(j, i) * id;
    }
  }
  Eigen::FullPivLU<Mat> lu(op);
  if (!lu.isInvertible()) {
    throw InvalidInput("Lyapunov operator is singular for this G");
  }
  const Mat rhs = -q;
  const Vec vec_p = lu.solve(Eigen::Map<const Vec>(rhs.data(), n * n));
  return symmetrize(Eigen::Map<const Mat>(vec_p.data(), n, n));
}

Mat range_basis(const Mat& m, double rtol) {
  if (m.size() == 0) {
    return Mat(m.rows(), 0);
  }
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const int r = mat_rank(m, rtol);
  return svd.matrixU().leftCols(r);
}

}  // namespace cubic_observer::numlin
