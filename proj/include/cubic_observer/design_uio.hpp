#pragma once

#include <cstdint>
#include <optional>

#include "cubic_observer/numlin.hpp"
#include "cubic_observer/parallel.hpp"

// Structural design of the observer: choose E, G, J so that
//   (I - E C) A - J C - G (I - E C) = 0   and   (I - E C) D = 0.
namespace cubic_observer::design {

inline constexpr double kStructuralTol = 1e-9;

struct StructuralDesign {
  Mat E;
  Mat T;  // I - E C
  Mat G;
  Mat J;
  std::optional<Mat> L;
  double residual_sylvester = 0.0;
  std::optional<double> residual_decoupling;  // set when D was supplied
};

// rank(C D) == rank(D).
bool decoupling_feasible(const Mat& C, const Mat& D);

// E = D (C D)^+. Throws DecouplingInfeasible if the rank test fails.
Mat compute_E(const Mat& C, const Mat& D);

// G = T A - L C,  J = T A E + L (I - C E). Both residuals are recomputed
// from the resulting matrices.
StructuralDesign design_GJ(const Mat& A, const Mat& C, const Mat& E, const Mat& L,
                           const std::optional<Mat>& D = std::nullopt);

struct StructuralResiduals {
  double sylvester;
  double decoupling;
};

// Max-abs residuals of both structural equations for arbitrary matrices.
StructuralResiduals verify_structure(const Mat& A, const Mat& C, const Mat& D, const Mat& E,
                                     const Mat& G, const Mat& J);

struct StabilizeOptions {
  std::uint64_t seed = 0;
  int restarts = 8;
  int max_iters = 4000;  // objective evaluations per restart
  ExecPolicy policy = ExecPolicy::Parallel;
};

// Finds L with spectral abscissa of (T A - L C) <= -margin by multistart
// Nelder-Mead on the abscissa. Throws SearchFailure when no restart reaches
// the margin (e.g. an undetectable pair).
Mat stabilize_L(const Mat& T, const Mat& A, const Mat& C, double margin,
                const StabilizeOptions& opts = {});

}  // namespace cubic_observer::design
