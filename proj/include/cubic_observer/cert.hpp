#pragma once

#include <cstdint>
#include <optional>

#include "cubic_observer/model.hpp"
#include "cubic_observer/numlin.hpp"
#include "cubic_observer/parallel.hpp"

// Lyapunov certificate checks and search for the cubic observer.
//
// Lipschitz case, with T = I - E C:
//   [ P G + G^T P + gamma^2 beta I    P T      ]
//   [ T^T P                           -beta I  ]  < 0
// One-sided Lipschitz case, with k = mu2 b - mu1:
//   [ P G + G^T P + 2 (mu1 rho + mu2 a) I    k P T     ]
//   [ k T^T P                                -2 mu1 I  ]  < 0
// plus P N C + C^T N^T P <= 0 and uniqueness of the zero equilibrium of
//   G v + (v^T C^T theta C v) N C v = 0.
namespace cubic_observer::cert {

struct LmiBlock {
  Mat block;
  double margin = 0.0;  // largest eigenvalue; < 0 certifies
};

LmiBlock assemble_lmi_lipschitz(const Mat& P, double beta, double gamma, const Mat& G,
                                const Mat& E, const Mat& C);
LmiBlock assemble_lmi_osl(const Mat& P, double mu1, double mu2, double rho, double a, double b,
                          const Mat& G, const Mat& E, const Mat& C);

// Throw InvalidCertificate if P is not symmetric positive definite and
// InvalidInput on non-positive multipliers / gamma.
double verify_lmi_lipschitz(const Mat& P, double beta, double gamma, const Mat& G, const Mat& E,
                            const Mat& C);
double verify_lmi_osl(const Mat& P, double mu1, double mu2, double rho, double a, double b,
                      const Mat& G, const Mat& E, const Mat& C);

// Dispatches on the spec/multiplier variants (they must agree).
double verify_lmi(const LipschitzSpec& spec, const Mat& P, const Multipliers& mult, const Mat& G,
                  const Mat& E, const Mat& C);

// N = -alpha P^{-1} C^T theta via a Cholesky solve.
Mat cubic_gain(const Mat& P, const Mat& C, const Mat& theta, double alpha);

enum class NClass {
  Definite,         // P N C + C^T N^T P < 0
  SemidefinitePass, // <= 0, negative definite on range(C^T)
  Fail,
};

struct NConditionReport {
  Mat matrix;  // P N C + C^T N^T P
  double margin = 0.0;
  NClass classification = NClass::Fail;
  // Present when (theta, alpha) were supplied: max-abs of matrix + 2 alpha C^T theta C.
  std::optional<double> identity_residual;
};

NConditionReport verify_N_condition(const Mat& P, const Mat& N, const Mat& C);
NConditionReport verify_N_condition(const Mat& P, const Mat& N, const Mat& C, const Mat& theta,
                                    double alpha);

const char* to_string(NClass c);

inline constexpr double kCounterexampleTol = 1e-8;

struct EquilibriumOptions {
  std::uint64_t seed = 0;
  int restarts = 64;
  int max_iters = 200;  // solver iterations per restart
  ExecPolicy policy = ExecPolicy::Parallel;
  // When N came from cubic_gain(P, C, theta, alpha) these let the check
  // return the closed-form guarantee instead of searching.
  std::optional<Mat> P;
  std::optional<double> alpha;
};

EquilibriumVerdict check_equilibrium_uniqueness(const Mat& G, const Mat& N, const Mat& C,
                                                const Mat& theta, const EquilibriumOptions& opts = {});

// || G v + (v^T C^T theta C v) N C v || / ||v||.
double equilibrium_residual(const Mat& G, const Mat& N, const Mat& C, const Mat& theta, const Vec& v);

struct SearchOptions {
  std::uint64_t seed = 0;
  int restarts = 8;
  int max_iters = 3000;  // subgradient steps per restart
  double tol = 1e-4;     // required margin: lmi < -tol
  double eps = 1e-6;     // P >= eps I, multipliers >= eps
  ExecPolicy policy = ExecPolicy::Parallel;
  std::optional<double> beta;  // fixed Lipschitz multiplier
  std::optional<double> mu1;   // fixed one-sided multipliers
  std::optional<double> mu2;
};

// Minimizes the largest eigenvalue of the LMI block over P and the free
// multipliers. Throws SearchFailure when the budget runs out; that does not
// prove infeasibility.
Certificate search_P(const LipschitzSpec& spec, const Mat& G, const Mat& E, const Mat& C,
                     const SearchOptions& opts = {});

}  // namespace cubic_observer::cert
