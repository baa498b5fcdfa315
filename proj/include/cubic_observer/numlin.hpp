#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace cubic_observer {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace numlin {

inline constexpr double kDefaultRankTol = 1e-10;

// Throws InvalidInput naming `what` if any entry is NaN or infinite.
void require_finite(const Mat& m, std::string_view what);

// Numerical rank: singular values above rtol * sigma_max. Zero matrix -> 0.
int mat_rank(const Mat& m, double rtol = kDefaultRankTol);

// Moore-Penrose pseudoinverse via SVD.
Mat pinv(const Mat& m);

struct EigExtremes {
  double min;
  double max;
};

// Extreme eigenvalues of (S + S^T)/2.
EigExtremes sym_eig_extremes(const Mat& s);

// Largest eigenvalue of the symmetric part. Negative means S < 0 with that
// margin.
double definiteness_margin(const Mat& s);

// Largest real part over the eigenvalues of a general square matrix.
double spectral_abscissa(const Mat& m);

double max_abs(const Mat& m);

Mat symmetrize(const Mat& s);

// Solves P G + G^T P = -Q. Throws InvalidInput when G has eigenvalues
// lambda_i + lambda_j = 0 (singular Lyapunov operator).
Mat solve_lyapunov(const Mat& g, const Mat& q);

// Orthonormal basis of range(M) as columns (may have zero columns).
Mat range_basis(const Mat& m, double rtol = kDefaultRankTol);

}  // namespace numlin
}  // namespace cubic_observer
