#include "cubic_observer/cert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>

#include "cubic_observer/errors.hpp"

namespace cubic_observer::cert {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double scale_of(const Mat& m) { return std::max(1.0, numlin::max_abs(m)); }

void require_spd(const Mat& P, const char* what) {
  if (P.rows() != P.cols() || P.rows() == 0) {
    throw InvalidCertificate(std::string(what) + " must be square and non-empty");
  }
  if (!P.allFinite()) {
    throw InvalidCertificate(std::string(what) + " has non-finite entries");
  }
  if (numlin::max_abs(P - P.transpose()) > 1e-10 * scale_of(P)) {
    throw InvalidCertificate(std::string(what) + " is not symmetric");
  }
  if (!(numlin::sym_eig_extremes(P).min > 0.0)) {
    throw InvalidCertificate(std::string(what) + " is not positive definite");
  }
}

void require_dims(const Mat& P, const Mat& G, const Mat& E, const Mat& C) {
  const Eigen::Index n = P.rows();
  if (G.rows() != n || G.cols() != n || C.cols() != n || E.rows() != n || E.cols() != C.rows()) {
    throw DimensionError("certificate matrices have inconsistent dimensions");
  }
}

Mat t_matrix(const Mat& E, const Mat& C) {
  return Mat::Identity(C.cols(), C.cols()) - E * C;
}

// ---- certificate search ---------------------------------------------------

enum class Mode { Lipschitz, OneSided };

struct Problem {
  Mode mode;
  Mat G;
  Mat T;
  double gamma = 0.0;
  double rho = 0.0;
  double a = 0.0;
  double b = 0.0;
  bool fix1 = false;  // beta or mu1 fixed
  bool fix2 = false;  // mu2 fixed
  double eps = 1e-6;
};

// m1 = beta (Lipschitz) or mu1; m2 = mu2 (unused for Lipschitz).
struct Point {
  Mat P;
  double m1 = 1.0;
  double m2 = 1.0;
};

Mat assemble(const Problem& pr, const Point& z) {
  const Eigen::Index n = z.P.rows();
  Mat block(2 * n, 2 * n);
  const Mat id = Mat::Identity(n, n);
  const Mat lyap = z.P * pr.G + pr.G.transpose() * z.P;
  if (pr.mode == Mode::Lipschitz) {
    block.topLeftCorner(n, n) = lyap + pr.gamma * pr.gamma * z.m1 * id;
    block.topRightCorner(n, n) = z.P * pr.T;
    block.bottomLeftCorner(n, n) = pr.T.transpose() * z.P;
    block.bottomRightCorner(n, n) = -z.m1 * id;
  } else {
    const double k = z.m2 * pr.b - z.m1;
    block.topLeftCorner(n, n) = lyap + 2.0 * (z.m1 * pr.rho + z.m2 * pr.a) * id;
    block.topRightCorner(n, n) = k * z.P * pr.T;
    block.bottomLeftCorner(n, n) = k * pr.T.transpose() * z.P;
    block.bottomRightCorner(n, n) = -2.0 * z.m1 * id;
  }
  return numlin::symmetrize(block);
}

struct Subgradient {
  double f = 0.0;
  Mat dP;
  double d1 = 0.0;
  double d2 = 0.0;
};

Subgradient subgradient(const Problem& pr, const Point& z) {
  const Eigen::Index n = z.P.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(assemble(pr, z));
  const Eigen::Index top = es.eigenvalues().size() - 1;
  const Vec v = es.eigenvectors().col(top);
  const Vec v1 = v.head(n);
  const Vec v2 = v.tail(n);
  Subgradient g;
  g.f = es.eigenvalues()(top);
  const Vec tv2 = pr.T * v2;
  if (pr.mode == Mode::Lipschitz) {
    // v^T F v = 2 v1^T P (G v1 + T v2) + gamma^2 beta |v1|^2 - beta |v2|^2
    const Vec w = pr.G * v1 + tv2;
    g.dP = v1 * w.transpose() + w * v1.transpose();
    g.d1 = pr.gamma * pr.gamma * v1.squaredNorm() - v2.squaredNorm();
  } else {
    const double k = z.m2 * pr.b - z.m1;
    const Vec w = pr.G * v1 + k * tv2;
    g.dP = v1 * w.transpose() + w * v1.transpose();
    const double cross = 2.0 * v1.dot(z.P * tv2);
    g.d1 = 2.0 * pr.rho * v1.squaredNorm() - cross - 2.0 * v2.squaredNorm();
    g.d2 = 2.0 * pr.a * v1.squaredNorm() + pr.b * cross;
  }
  if (pr.fix1) {
    g.d1 = 0.0;
  }
  if (pr.fix2 || pr.mode == Mode::Lipschitz) {
    g.d2 = 0.0;
  }
  return g;
}

void project(const Problem& pr, Point& z) {
  Eigen::SelfAdjointEigenSolver<Mat> es(numlin::symmetrize(z.P));
  Vec ev = es.eigenvalues().cwiseMax(pr.eps);
  z.P = numlin::symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  if (!pr.fix1) {
    z.m1 = std::max(z.m1, pr.eps);
  }
  if (!pr.fix2) {
    z.m2 = std::max(z.m2, pr.eps);
  }
}

double objective(const Problem& pr, const Point& z) { return numlin::definiteness_margin(assemble(pr, z)); }

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(std::pow(10.0, lo + (hi - lo) * i / std::max(1, count - 1)));
  }
  return out;
}

// Best scaled copy of `shape` over the scale grid and the free-multiplier grid.
Point coarse_start(const Problem& pr, const Mat& shape, const Point& fixed) {
  const std::vector<double> scales = logspace(-4.0, 6.0, 41);
  const std::vector<double> mults = logspace(-3.0, 4.0, 15);
  const std::vector<double> m1s = pr.fix1 ? std::vector<double>{fixed.m1} : mults;
  std::vector<double> m2s = pr.mode == Mode::Lipschitz ? std::vector<double>{fixed.m2}
                            : pr.fix2                  ? std::vector<double>{fixed.m2}
                                                       : mults;
  Point best{shape, fixed.m1, fixed.m2};
  double best_f = std::numeric_limits<double>::infinity();
  for (double s : scales) {
    for (double m1 : m1s) {
      for (double m2 : m2s) {
        Point z{s * shape, m1, m2};
        const double f = objective(pr, z);
        if (f < best_f) {
          best_f = f;
          best = z;
        }
      }
      // mu1 = b mu2 removes the off-diagonal coupling.
      if (pr.mode == Mode::OneSided && pr.b > 0.0 && !pr.fix1 && !pr.fix2) {
        for (double m2 : m2s) {
          Point z{s * shape, pr.b * m2, m2};
          const double f = objective(pr, z);
          if (f < best_f) {
            best_f = f;
            best = z;
          }
        }
      }
    }
  }
  return best;
}

struct SearchResult {
  Point point;
  double margin = std::numeric_limits<double>::infinity();
};

SearchResult descend(const Problem& pr, Point z, int max_iters, double tol) {
  project(pr, z);
  SearchResult best{z, objective(pr, z)};
  const double target = -2.0 * tol;
  for (int k = 0; k < max_iters && best.margin >= -tol; ++k) {
    const Subgradient g = subgradient(pr, z);
    if (g.f < best.margin) {
      best = {z, g.f};
      if (best.margin < -tol) {
        break;
      }
    }
    const double gnorm2 = g.dP.squaredNorm() + g.d1 * g.d1 + g.d2 * g.d2;
    if (gnorm2 <= 0.0) {
      break;
    }
    // Polyak step towards the target level, capped relative to the iterate.
    const double zscale = std::sqrt(z.P.squaredNorm() + z.m1 * z.m1 + z.m2 * z.m2);
    double step = (g.f - target) / gnorm2;
    step = std::min(step, 0.5 * zscale / (std::sqrt(gnorm2) * std::sqrt(1.0 + k / 50.0)));
    z.P -= step * g.dP;
    z.m1 -= step * g.d1;
    z.m2 -= step * g.d2;
    project(pr, z);
  }
  const double f = objective(pr, z);
  if (f < best.margin) {
    best = {z, f};
  }
  return best;
}

// ---- equilibrium falsification --------------------------------------------

struct EqProblem {
  const Mat* G;
  Mat NC;  // N C
  Mat M;   // C^T theta C
  Eigen::Index n;
};

// Unknowns (s, r): G s + r^2 q(s) N C s = 0 and |s|^2 = 1, q(s) = s^T M s.
int eq_f(const gsl_vector* x, void* params, gsl_vector* f) {
  const auto& p = *static_cast<const EqProblem*>(params);
  const Eigen::Map<const Vec> s(x->data, p.n);
  const double r = gsl_vector_get(x, static_cast<std::size_t>(p.n));
  const double q = s.dot(p.M * s);
  const Vec res = *p.G * s + r * r * q * (p.NC * s);
  for (Eigen::Index i = 0; i < p.n; ++i) {
    gsl_vector_set(f, static_cast<std::size_t>(i), res(i));
  }
  gsl_vector_set(f, static_cast<std::size_t>(p.n), s.squaredNorm() - 1.0);
  return GSL_SUCCESS;
}

int eq_df(const gsl_vector* x, void* params, gsl_matrix* jac) {
  const auto& p = *static_cast<const EqProblem*>(params);
  const Eigen::Map<const Vec> s(x->data, p.n);
  const double r = gsl_vector_get(x, static_cast<std::size_t>(p.n));
  const double q = s.dot(p.M * s);
  const Vec ncs = p.NC * s;
  const Mat ds = *p.G + r * r * (ncs * (2.0 * p.M * s).transpose() + q * p.NC);
  const Vec dr = 2.0 * r * q * ncs;
  for (Eigen::Index i = 0; i < p.n; ++i) {
    for (Eigen::Index j = 0; j < p.n; ++j) {
      gsl_matrix_set(jac, static_cast<std::size_t>(i), static_cast<std::size_t>(j), ds(i, j));
    }
    gsl_matrix_set(jac, static_cast<std::size_t>(i), static_cast<std::size_t>(p.n), dr(i));
    gsl_matrix_set(jac, static_cast<std::size_t>(p.n), static_cast<std::size_t>(i), 2.0 * s(i));
  }
  gsl_matrix_set(jac, static_cast<std::size_t>(p.n), static_cast<std::size_t>(p.n), 0.0);
  return GSL_SUCCESS;
}

struct WorkspaceDeleter {
  void operator()(gsl_multifit_nlinear_workspace* w) const { gsl_multifit_nlinear_free(w); }
};

struct EqRestart {
  Vec v;
  double residual = std::numeric_limits<double>::infinity();
  long iterations = 0;
};

// Least-squares r^2 >= 0 for a fixed unit direction.
double best_r2(const Mat& G, const EqProblem& p, const Vec& s) {
  const Vec a = G * s;
  const Vec b = s.dot(p.M * s) * (p.NC * s);
  const double bb = b.squaredNorm();
  if (bb == 0.0) {
    return 0.0;
  }
  return std::max(0.0, -a.dot(b) / bb);
}

EqRestart refine(const Mat& G, const Mat& N, const Mat& C, const Mat& theta, const EqProblem& p,
                 const Vec& s0, int max_iters) {
  const std::size_t dim = static_cast<std::size_t>(p.n + 1);
  gsl_multifit_nlinear_fdf fdf;
  fdf.f = &eq_f;
  fdf.df = &eq_df;
  fdf.fvv = nullptr;
  fdf.n = dim;
  fdf.p = dim;
  fdf.params = const_cast<EqProblem*>(&p);

  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  std::unique_ptr<gsl_multifit_nlinear_workspace, WorkspaceDeleter> w(
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, dim, dim));

  const Vec s = s0.normalized();
  gsl_vector* x0 = gsl_vector_alloc(dim);
  for (Eigen::Index i = 0; i < p.n; ++i) {
    gsl_vector_set(x0, static_cast<std::size_t>(i), s(i));
  }
  gsl_vector_set(x0, static_cast<std::size_t>(p.n), std::sqrt(best_r2(G, p, s)));
  gsl_multifit_nlinear_init(x0, &fdf, w.get());
  gsl_vector_free(x0);

  int info = 0;
  gsl_multifit_nlinear_driver(static_cast<std::size_t>(max_iters), 1e-15, 1e-15, 1e-15, nullptr,
                              nullptr, &info, w.get());

  const gsl_vector* x = gsl_multifit_nlinear_position(w.get());
  Vec dir(p.n);
  for (Eigen::Index i = 0; i < p.n; ++i) {
    dir(i) = gsl_vector_get(x, static_cast<std::size_t>(i));
  }
  EqRestart out;
  out.iterations = static_cast<long>(gsl_multifit_nlinear_niter(w.get()));
  if (!dir.allFinite() || dir.norm() == 0.0) {
    return out;
  }
  dir.normalize();
  const double r = std::abs(gsl_vector_get(x, static_cast<std::size_t>(p.n)));
  // A vanishing radius is only a kernel direction of G; test it at unit length
  // so that the trivial equilibrium is never reported.
  out.v = (r > 1e-4 && std::isfinite(r)) ? Vec(r * dir) : dir;
  out.residual = equilibrium_residual(G, N, C, theta, out.v);
  return out;
}

}  // namespace

// ---- LMI blocks -----------------------------------------------------------

LmiBlock assemble_lmi_lipschitz(const Mat& P, double beta, double gamma, const Mat& G, const Mat& E,
                                const Mat& C) {
  require_dims(P, G, E, C);
  Problem pr{Mode::Lipschitz, G, t_matrix(E, C)};
  pr.gamma = gamma;
  LmiBlock out;
  out.block = assemble(pr, Point{P, beta, 0.0});
  out.margin = numlin::definiteness_margin(out.block);
  return out;
}

LmiBlock assemble_lmi_osl(const Mat& P, double mu1, double mu2, double rho, double a, double b,
                          const Mat& G, const Mat& E, const Mat& C) {
  require_dims(P, G, E, C);
  Problem pr{Mode::OneSided, G, t_matrix(E, C)};
  pr.rho = rho;
  pr.a = a;
  pr.b = b;
  LmiBlock out;
  out.block = assemble(pr, Point{P, mu1, mu2});
  out.margin = numlin::definiteness_margin(out.block);
  return out;
}

double verify_lmi_lipschitz(const Mat& P, double beta, double gamma, const Mat& G, const Mat& E,
                            const Mat& C) {
  require_spd(P, "P");
  if (!(beta > 0.0) || !(gamma > 0.0)) {
    throw InvalidInput("beta and gamma must be positive");
  }
  return assemble_lmi_lipschitz(P, beta, gamma, G, E, C).margin;
}

double verify_lmi_osl(const Mat& P, double mu1, double mu2, double rho, double a, double b,
                      const Mat& G, const Mat& E, const Mat& C) {
  require_spd(P, "P");
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) {
    throw InvalidInput("mu1 and mu2 must be positive");
  }
  return assemble_lmi_osl(P, mu1, mu2, rho, a, b, G, E, C).margin;
}

double verify_lmi(const LipschitzSpec& spec, const Mat& P, const Multipliers& mult, const Mat& G,
                  const Mat& E, const Mat& C) {
  if (const auto* lip = std::get_if<Lipschitz>(&spec)) {
    const auto* m = std::get_if<LipschitzMultiplier>(&mult);
    if (m == nullptr) {
      throw InvalidCertificate("Lipschitz certificate needs beta");
    }
    return verify_lmi_lipschitz(P, m->beta, lip->gamma, G, E, C);
  }
  const auto& osl = std::get<OneSidedLipschitz>(spec);
  const auto* m = std::get_if<OneSidedMultipliers>(&mult);
  if (m == nullptr) {
    throw InvalidCertificate("one-sided Lipschitz certificate needs mu1 and mu2");
  }
  return verify_lmi_osl(P, m->mu1, m->mu2, osl.rho, osl.a, osl.b, G, E, C);
}

// ---- cubic gain and N condition -------------------------------------------

Mat cubic_gain(const Mat& P, const Mat& C, const Mat& theta, double alpha) {
  require_spd(P, "P");
  if (!(alpha > 0.0)) {
    throw InvalidInput("alpha must be positive");
  }
  if (C.cols() != P.rows() || theta.rows() != C.rows() || theta.cols() != C.rows()) {
    throw DimensionError("cubic gain: C and theta dimensions do not match P");
  }
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) {
    throw InvalidCertificate("P is singular or indefinite");
  }
  return -alpha * llt.solve(C.transpose() * theta);
}

NConditionReport verify_N_condition(const Mat& P, const Mat& N, const Mat& C) {
  const Eigen::Index n = P.rows();
  if (P.cols() != n || N.rows() != n || C.cols() != n || N.cols() != C.rows()) {
    throw DimensionError("N condition: inconsistent dimensions");
  }
  NConditionReport r;
  const Mat pnc = P * N * C;
  r.matrix = pnc + pnc.transpose();
  r.margin = numlin::definiteness_margin(r.matrix);
  const double scale = scale_of(r.matrix);
  if (r.margin < -1e-12 * scale) {
    r.classification = NClass::Definite;
  } else if (r.margin <= 1e-10 * scale) {
    const Mat basis = numlin::range_basis(C.transpose());
    const bool definite_on_range =
        basis.cols() > 0 &&
        numlin::definiteness_margin(basis.transpose() * r.matrix * basis) < -1e-12 * scale;
    r.classification = definite_on_range ? NClass::SemidefinitePass : NClass::Fail;
  } else {
    r.classification = NClass::Fail;
  }
  return r;
}

NConditionReport verify_N_condition(const Mat& P, const Mat& N, const Mat& C, const Mat& theta,
                                    double alpha) {
  NConditionReport r = verify_N_condition(P, N, C);
  r.identity_residual = numlin::max_abs(r.matrix + 2.0 * alpha * C.transpose() * theta * C);
  return r;
}

const char* to_string(NClass c) {
  switch (c) {
    case NClass::Definite:
      return "definite";
    case NClass::SemidefinitePass:
      return "semidefinite-pass";
    case NClass::Fail:
      return "fail";
  }
  return "?";
}

// ---- equilibrium uniqueness -----------------------------------------------

double equilibrium_residual(const Mat& G, const Mat& N, const Mat& C, const Mat& theta, const Vec& v) {
  const Vec cv = C * v;
  const double q = cv.dot(theta * cv);
  return (G * v + q * (N * cv)).norm() / v.norm();
}

EquilibriumVerdict check_equilibrium_uniqueness(const Mat& G, const Mat& N, const Mat& C,
                                                const Mat& theta, const EquilibriumOptions& opts) {
  const Eigen::Index n = G.rows();
  if (G.cols() != n || N.rows() != n || C.cols() != n || N.cols() != C.rows() ||
      theta.rows() != C.rows() || theta.cols() != C.rows()) {
    throw DimensionError("equilibrium check: inconsistent dimensions");
  }

  if (opts.P && opts.alpha) {
    // With N = -alpha P^{-1} C^T theta, v^T P (G v + q N C v) = v^T P G v - alpha q^2,
    // which is negative for v != 0 whenever P G + G^T P < 0.
    bool guaranteed = false;
    try {
      const Mat expected = cubic_gain(*opts.P, C, theta, *opts.alpha);
      const bool theta_psd = numlin::max_abs(theta - theta.transpose()) <= 1e-12 * scale_of(theta) &&
                             numlin::definiteness_margin(-theta) <= 1e-12 * scale_of(theta);
      const Mat lyap = *opts.P * G + G.transpose() * *opts.P;
      guaranteed = theta_psd && numlin::max_abs(expected - N) <= 1e-9 * scale_of(expected) &&
                   numlin::definiteness_margin(lyap) < 0.0;
    } catch (const Error&) {
      guaranteed = false;
    }
    if (guaranteed) {
      return GuaranteedByGainFormula{};
    }
  }

  gsl_set_error_handler_off();
  EqProblem p{&G, N * C, C.transpose() * theta * C, n};
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullV);
  const Vec smallest = svd.matrixV().col(n - 1);

  const auto results = run_restarts<EqRestart>(opts.restarts, opts.policy, [&](int r) {
    Vec s0 = smallest;
    if (r > 0) {
      auto rng = restart_rng(opts.seed, r);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        s0(i) = normal(rng);
      }
      if (s0.norm() == 0.0) {
        s0 = smallest;
      }
    }
    return refine(G, N, C, theta, p, s0, opts.max_iters);
  });

  NoCounterexampleFound none;
  none.restarts = opts.restarts;
  none.best_residual = std::numeric_limits<double>::infinity();
  for (const auto& res : results) {
    none.evaluations += res.iterations;
    if (res.v.size() == n && res.residual <= kCounterexampleTol) {
      return Counterexample{res.v, res.residual};
    }
    none.best_residual = std::min(none.best_residual, res.residual);
  }
  return none;
}

// ---- certificate search ---------------------------------------------------

Certificate search_P(const LipschitzSpec& spec, const Mat& G, const Mat& E, const Mat& C,
                     const SearchOptions& opts) {
  const Eigen::Index n = G.rows();
  require_dims(Mat::Identity(n, n), G, E, C);
  numlin::require_finite(G, "G");

  Problem pr{Mode::Lipschitz, G, t_matrix(E, C)};
  pr.eps = opts.eps;
  Point fixed;
  if (const auto* lip = std::get_if<Lipschitz>(&spec)) {
    if (!(lip->gamma > 0.0)) {
      throw InvalidInput("gamma must be positive");
    }
    pr.gamma = lip->gamma;
    if (opts.beta) {
      if (!(*opts.beta > 0.0)) {
        throw InvalidInput("fixed beta must be positive");
      }
      pr.fix1 = true;
      fixed.m1 = *opts.beta;
    }
    pr.fix2 = true;
    fixed.m2 = 0.0;
  } else {
    const auto& osl = std::get<OneSidedLipschitz>(spec);
    pr.mode = Mode::OneSided;
    pr.rho = osl.rho;
    pr.a = osl.a;
    pr.b = osl.b;
    if (opts.mu1) {
      if (!(*opts.mu1 > 0.0)) {
        throw InvalidInput("fixed mu1 must be positive");
      }
      pr.fix1 = true;
      fixed.m1 = *opts.mu1;
    }
    if (opts.mu2) {
      if (!(*opts.mu2 > 0.0)) {
        throw InvalidInput("fixed mu2 must be positive");
      }
      pr.fix2 = true;
      fixed.m2 = *opts.mu2;
    }
  }

  std::optional<Mat> lyapunov;
  try {
    const Mat sol = numlin::solve_lyapunov(G, Mat::Identity(n, n));
    if (numlin::sym_eig_extremes(sol).min > 0.0) {
      lyapunov = sol / sol.trace() * static_cast<double>(n);
    }
  } catch (const InputError&) {
  }

  const auto results = run_restarts<SearchResult>(opts.restarts, opts.policy, [&](int r) {
    Mat shape = Mat::Identity(n, n);
    if (r == 1 && lyapunov) {
      shape = *lyapunov;
    } else if (r >= 2) {
      auto rng = restart_rng(opts.seed, r);
      std::normal_distribution<double> normal(0.0, 1.0);
      Mat m(n, n);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = normal(rng);
      }
      shape = m * m.transpose() / static_cast<double>(n) + 0.1 * Mat::Identity(n, n);
      if (lyapunov && r % 2 == 0) {
        shape = 0.5 * (shape / shape.trace() * static_cast<double>(n)) + 0.5 * *lyapunov;
      }
      shape *= static_cast<double>(n) / shape.trace();
    }
    return descend(pr, coarse_start(pr, shape, fixed), opts.max_iters, opts.tol);
  });

  // Deterministic reduction: best margin, ties to the lowest restart.
  const SearchResult* best = nullptr;
  for (const auto& res : results) {
    if (best == nullptr || res.margin < best->margin) {
      best = &res;
    }
  }

  Certificate cert;
  cert.P = numlin::symmetrize(best->point.P);
  if (pr.mode == Mode::Lipschitz) {
    cert.multipliers = LipschitzMultiplier{best->point.m1};
  } else {
    cert.multipliers = OneSidedMultipliers{best->point.m1, best->point.m2};
  }
  double margin = std::numeric_limits<double>::infinity();
  try {
    margin = verify_lmi(spec, cert.P, cert.multipliers, G, E, C);
  } catch (const VerificationError&) {
  }
  if (!(margin < -opts.tol)) {
    throw SearchFailure("certificate search exhausted its budget; best LMI margin " +
                        std::to_string(best->margin) + " (this does not prove infeasibility)");
  }
  cert.lmi_margin = margin;
  return cert;
}

}  // namespace cubic_observer::cert
