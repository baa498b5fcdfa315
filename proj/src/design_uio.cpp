#include "cubic_observer/design_uio.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "cubic_observer/errors.hpp"

namespace cubic_observer::design {

namespace {

void require_cols(const Mat& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw DimensionError(std::string(what) + " must be " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
}

struct NmProblem {
  const Mat* TA;
  const Mat* C;
  Eigen::Index n;
  Eigen::Index ny;
};

double abscissa_objective(const gsl_vector* z, void* params) {
  const auto& p = *static_cast<const NmProblem*>(params);
  const Eigen::Map<const Mat> L(z->data, p.n, p.ny);
  const Mat closed = *p.TA - L * *p.C;
  if (!closed.allFinite()) {
    return std::numeric_limits<double>::max();
  }
  return numlin::spectral_abscissa(closed);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

struct Restart {
  Mat L;
  double abscissa = std::numeric_limits<double>::infinity();
};

Restart nelder_mead(const Mat& TA, const Mat& C, double margin, const Mat& start, double step,
                    int max_iters) {
  const Eigen::Index n = TA.rows();
  const Eigen::Index ny = C.rows();
  const std::size_t dim = static_cast<std::size_t>(n * ny);
  NmProblem problem{&TA, &C, n, ny};

  gsl_multimin_function fn;
  fn.n = dim;
  fn.f = &abscissa_objective;
  fn.params = &problem;

  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(dim));
  std::unique_ptr<gsl_vector, VectorDeleter> steps(gsl_vector_alloc(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    gsl_vector_set(x.get(), i, start.data()[i]);
  }
  gsl_vector_set_all(steps.get(), step);
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> nm(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim));
  gsl_multimin_fminimizer_set(nm.get(), &fn, x.get(), steps.get());

  Restart best;
  for (int it = 0; it < max_iters; ++it) {
    if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) {
      break;
    }
    if (nm->fval < best.abscissa) {
      best.abscissa = nm->fval;
      best.L = Eigen::Map<const Mat>(nm->x->data, n, ny);
    }
    if (best.abscissa <= -margin) {
      break;
    }
    if (gsl_multimin_fminimizer_size(nm.get()) < 1e-12) {
      break;
    }
  }
  return best;
}

}  // namespace

bool decoupling_feasible(const Mat& C, const Mat& D) {
  if (C.cols() != D.rows()) {
    throw DimensionError("C columns must match D rows");
  }
  if (D.cols() == 0) {
    return true;
  }
  return numlin::mat_rank(C * D) == numlin::mat_rank(D);
}

Mat compute_E(const Mat& C, const Mat& D) {
  if (!decoupling_feasible(C, D)) {
    throw DecouplingInfeasible("rank(CD) ≠ rank(D): unknown-input decoupling is infeasible");
  }
  if (D.cols() == 0) {
    return Mat::Zero(C.cols(), C.rows());
  }
  return D * numlin::pinv(C * D);
}

StructuralDesign design_GJ(const Mat& A, const Mat& C, const Mat& E, const Mat& L,
                           const std::optional<Mat>& D) {
  const Eigen::Index n = A.rows();
  const Eigen::Index ny = C.rows();
  require_cols(A, n, n, "A");
  require_cols(C, ny, n, "C");
  require_cols(E, n, ny, "E");
  require_cols(L, n, ny, "L");
  StructuralDesign d;
  d.E = E;
  d.T = Mat::Identity(n, n) - E * C;
  const Mat TA = d.T * A;
  d.G = TA - L * C;
  d.J = TA * E + L * (Mat::Identity(ny, ny) - C * E);
  d.L = L;
  d.residual_sylvester = numlin::max_abs(d.T * A - d.J * C - d.G * d.T);
  if (D) {
    require_cols(*D, n, D->cols(), "D");
    d.residual_decoupling = numlin::max_abs(d.T * *D);
  }
  return d;
}

StructuralResiduals verify_structure(const Mat& A, const Mat& C, const Mat& D, const Mat& E,
                                     const Mat& G, const Mat& J) {
  const Eigen::Index n = A.rows();
  const Eigen::Index ny = C.rows();
  require_cols(A, n, n, "A");
  require_cols(C, ny, n, "C");
  require_cols(D, n, D.cols(), "D");
  require_cols(E, n, ny, "E");
  require_cols(G, n, n, "G");
  require_cols(J, n, ny, "J");
  const Mat T = Mat::Identity(n, n) - E * C;
  return {numlin::max_abs(T * A - J * C - G * T), numlin::max_abs(T * D)};
}

Mat stabilize_L(const Mat& T, const Mat& A, const Mat& C, double margin, const StabilizeOptions& opts) {
  if (!(margin > 0.0)) {
    throw InvalidInput("stabilization margin must be positive");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index ny = C.rows();
  require_cols(A, n, n, "A");
  require_cols(T, n, n, "T");
  require_cols(C, ny, n, "C");
  const Mat TA = T * A;

  const Mat zero = Mat::Zero(n, ny);
  if (numlin::spectral_abscissa(TA) <= -margin) {
    return zero;
  }
  gsl_set_error_handler_off();

  const double scale = std::max({1.0, margin, numlin::max_abs(TA)});
  const auto results = run_restarts<Restart>(opts.restarts, opts.policy, [&](int r) {
    Mat start = zero;
    if (r > 0) {
      auto rng = restart_rng(opts.seed, r);
      std::normal_distribution<double> normal(0.0, scale);
      for (Eigen::Index i = 0; i < start.size(); ++i) {
        start.data()[i] = normal(rng);
      }
    }
    return nelder_mead(TA, C, margin, start, scale, opts.max_iters);
  });

  // Lowest restart index that meets the margin; otherwise report the best.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& res : results) {
    if (res.abscissa <= -margin && res.L.size() == zero.size()) {
      const double check = numlin::spectral_abscissa(TA - res.L * C);
      if (check <= -margin) {
        return res.L;
      }
    }
    best = std::min(best, res.abscissa);
  }
  throw SearchFailure("no gain L reached spectral abscissa <= -" + std::to_string(margin) +
                      " (best " + std::to_string(best) + "); the pair (TA, C) may be undetectable");
}

}  // namespace cubic_observer::design
