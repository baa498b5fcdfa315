#include "doctest.h"

#include <random>

#include <Eigen/Eigenvalues>

#include "cubic_observer/cert.hpp"
#include "cubic_observer/errors.hpp"
#include "cubic_observer/model.hpp"
#include "oracles.hpp"

using namespace cubic_observer;
using oracle::max_abs;

namespace {

double max_eig(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Block of the Lipschitz condition, built without the library.
Mat lipschitz_block(const Mat& P, double beta, double gamma, const Mat& G, const Mat& E, const Mat& C) {
  const Eigen::Index n = P.rows();
  const Mat T = Mat::Identity(n, n) - E * C;
  Mat b(2 * n, 2 * n);
  b.topLeftCorner(n, n) = P * G + G.transpose() * P + gamma * gamma * beta * Mat::Identity(n, n);
  b.topRightCorner(n, n) = P * T;
  b.bottomLeftCorner(n, n) = T.transpose() * P;
  b.bottomRightCorner(n, n) = -beta * Mat::Identity(n, n);
  return b;
}

Mat osl_block(const Mat& P, double mu1, double mu2, double rho, double a, double b, const Mat& G,
              const Mat& E, const Mat& C) {
  const Eigen::Index n = P.rows();
  const Mat T = Mat::Identity(n, n) - E * C;
  const double k = mu2 * b - mu1;
  Mat m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = P * G + G.transpose() * P + 2.0 * (mu1 * rho + mu2 * a) * Mat::Identity(n, n);
  m.topRightCorner(n, n) = k * P * T;
  m.bottomLeftCorner(n, n) = k * T.transpose() * P;
  m.bottomRightCorner(n, n) = -2.0 * mu1 * Mat::Identity(n, n);
  return m;
}

Mat stable_matrix(std::mt19937_64& rng, Eigen::Index n) {
  Mat g = oracle::random_matrix(rng, n, n);
  Eigen::EigenSolver<Mat> es(g, false);
  const double abscissa = es.eigenvalues().real().maxCoeff();
  return g - (abscissa + 0.5) * Mat::Identity(n, n);
}

}  // namespace

TEST_CASE("example certificate satisfies the Lipschitz condition") {
  const auto ex = example_system();
  const auto& o = ex.observer;
  const Mat& P = ex.certificate.P;
  const double margin = cert::verify_lmi_lipschitz(P, 100.0, 1.0, o.G, o.E, ex.nominal.C);
  CHECK(margin < 0.0);
  CHECK(margin == doctest::Approx(max_eig(lipschitz_block(P, 100.0, 1.0, o.G, o.E, ex.nominal.C))));
  const auto blk = cert::assemble_lmi_lipschitz(P, 100.0, 1.0, o.G, o.E, ex.nominal.C);
  CHECK(max_abs(blk.block - lipschitz_block(P, 100.0, 1.0, o.G, o.E, ex.nominal.C)) <= 1e-12);
  CHECK(cert::verify_lmi(ex.lipschitz, P, ex.certificate.multipliers, o.G, o.E, ex.nominal.C) ==
        doctest::Approx(margin));
}

TEST_CASE("Lipschitz block special cases") {
  const Mat I2 = Mat::Identity(2, 2);
  const Mat E = Mat::Zero(2, 1);
  Mat C(1, 2);
  C << 0.3, -1.2;
  CHECK(cert::verify_lmi_lipschitz(I2, 1.0, 0.1, -I2, E, C) < 0.0);
  CHECK(cert::verify_lmi_lipschitz(I2, 1.0, 3.0, -I2, E, C) > 0.0);
  CHECK_THROWS_AS(cert::verify_lmi_lipschitz(I2, 1.0, 0.0, -I2, E, C), InvalidInput);
  CHECK_THROWS_AS(cert::verify_lmi_lipschitz(I2, -1.0, 1.0, -I2, E, C), InvalidInput);
  Mat indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  CHECK_THROWS_AS(cert::verify_lmi_lipschitz(indefinite, 1.0, 1.0, -I2, E, C), InvalidCertificate);
}

TEST_CASE("Lipschitz margin is nondecreasing in gamma") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat P = oracle::random_spd(rng, 3);
    const Mat G = stable_matrix(rng, 3);
    const Mat E = oracle::random_matrix(rng, 3, 2);
    const Mat C = oracle::random_matrix(rng, 2, 3);
    double prev = -std::numeric_limits<double>::infinity();
    for (double gamma = 0.05; gamma < 5.0; gamma *= 1.3) {
      const double m = cert::verify_lmi_lipschitz(P, 2.0, gamma, G, E, C);
      CHECK(m >= prev - 1e-12 * std::max(1.0, std::abs(m)));
      prev = m;
    }
  }
}

TEST_CASE("one-sided block") {
  const Mat I2 = Mat::Identity(2, 2);
  const Mat E = Mat::Zero(2, 1);
  const Mat C = Mat::Ones(1, 2);
  const auto blk = cert::assemble_lmi_osl(I2, 1.0, 1.0, 0.0, 0.0, 0.0, -I2, E, C);
  CHECK(blk.margin == doctest::Approx(-1.0));
  CHECK(max_abs(blk.block - osl_block(I2, 1.0, 1.0, 0.0, 0.0, 0.0, -I2, E, C)) <= 1e-14);

  // mu1 = mu2 b removes the coupling; the diagonal then decides.
  std::mt19937_64 rng(8);
  const Mat P = oracle::random_spd(rng, 2);
  const Mat G = stable_matrix(rng, 2);
  const double lam = max_eig(P * G + G.transpose() * P);
  const double mu2 = 1.0;
  const double b = 2.0;
  const double mu1 = mu2 * b;
  const double rho = 0.1;
  const double a = -0.5 * lam - mu1 * rho - 0.3;  // mu1 rho + mu2 a < -lam / 2
  const double m = cert::verify_lmi_osl(P, mu1, mu2, rho, a, b, G, E, C);
  CHECK(m < 0.0);
  CHECK(m == doctest::Approx(max_eig(osl_block(P, mu1, mu2, rho, a, b, G, E, C))));
  CHECK_THROWS_AS(cert::verify_lmi_osl(P, 0.0, mu2, rho, a, b, G, E, C), InvalidInput);
}

TEST_CASE("cubic gain examples") {
  const auto ex = example_system();
  const Mat N = cert::cubic_gain(ex.certificate.P, ex.nominal.C, Mat::Identity(1, 1), 1.0);
  // reported to two significant figures
  CHECK(N(0, 0) == doctest::Approx(-0.017).epsilon(0.05));
  CHECK(N(1, 0) == doctest::Approx(0.0017).epsilon(0.05));
  CHECK(cert::cubic_gain(ex.certificate.P, ex.nominal.C, Mat::Zero(1, 1), 1.0).isZero());
  const Mat I2 = Mat::Identity(2, 2);
  CHECK(max_abs(cert::cubic_gain(I2, I2, I2, 2.0) + 2.0 * I2) <= 1e-15);
  CHECK_THROWS_AS(cert::cubic_gain(Mat::Zero(2, 2), ex.nominal.C, Mat::Identity(1, 1), 1.0),
                  InvalidCertificate);
  CHECK_THROWS_AS(cert::cubic_gain(I2, ex.nominal.C, Mat::Identity(1, 1), 0.0), InvalidInput);
}

TEST_CASE("gain condition on the example is semidefinite") {
  const auto ex = example_system();
  const auto rep = cert::verify_N_condition(ex.certificate.P, ex.observer.N, ex.nominal.C,
                                            ex.observer.theta, ex.observer.alpha);
  Mat expected(2, 2);
  expected << -2, 0, 0, 0;
  CHECK(max_abs(rep.matrix - expected) <= 1e-9);
  CHECK(rep.classification == cert::NClass::SemidefinitePass);
  REQUIRE(rep.identity_residual);
  CHECK(*rep.identity_residual <= 1e-10);
}

TEST_CASE("gain condition classes") {
  const Mat I2 = Mat::Identity(2, 2);
  const auto zero = cert::verify_N_condition(I2, Mat::Zero(2, 1), Mat::Ones(1, 2));
  CHECK(zero.matrix.isZero());
  CHECK(zero.margin == 0.0);
  CHECK(zero.classification == cert::NClass::Fail);

  std::mt19937_64 rng(4);
  const Mat P = oracle::random_spd(rng, 3);
  const Mat C = oracle::random_matrix(rng, 3, 3);
  const Mat theta = oracle::random_spd(rng, 3);
  const Mat N = cert::cubic_gain(P, C, theta, 0.7);
  const auto strict = cert::verify_N_condition(P, N, C);
  CHECK(strict.margin < 0.0);
  CHECK(strict.classification == cert::NClass::Definite);

  const auto bad = cert::verify_N_condition(I2, Mat::Ones(2, 1), Mat::Ones(1, 2));
  CHECK(bad.classification == cert::NClass::Fail);
}

TEST_CASE("gain identity over random draws") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int ny = std::uniform_int_distribution<int>(1, n)(rng);
    const int rank = std::uniform_int_distribution<int>(0, ny)(rng);
    const Mat P = oracle::random_spd(rng, n);
    const Mat C = oracle::random_matrix(rng, ny, n);
    const Mat theta = oracle::random_psd(rng, ny, rank);
    const double alpha = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const Mat N = cert::cubic_gain(P, C, theta, alpha);
    const Mat lhs = P * N * C + C.transpose() * N.transpose() * P;
    const Mat rhs = -2.0 * alpha * C.transpose() * theta * C;
    CHECK(max_abs(lhs - rhs) <= 1e-10 * std::max(1.0, max_abs(rhs)));
  }
}

TEST_CASE("equilibrium verdicts") {
  const auto ex = example_system();
  const auto& o = ex.observer;
  const Mat& C = ex.nominal.C;

  cert::EquilibriumOptions with_p;
  with_p.P = ex.certificate.P;
  with_p.alpha = 1.0;
  CHECK(std::holds_alternative<GuaranteedByGainFormula>(
      cert::check_equilibrium_uniqueness(o.G, o.N, C, o.theta, with_p)));

  // Without the certificate the search must not find anything either.
  const auto searched = cert::check_equilibrium_uniqueness(o.G, o.N, C, o.theta);
  CHECK(std::holds_alternative<NoCounterexampleFound>(searched));

  // A gain that is not the formula's loses the guarantee.
  cert::EquilibriumOptions tampered = with_p;
  CHECK_FALSE(std::holds_alternative<GuaranteedByGainFormula>(
      cert::check_equilibrium_uniqueness(o.G, -o.N, C, o.theta, tampered)));
}

TEST_CASE("linear kernel is found when theta is zero") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 5)(rng);
    const int ny = std::uniform_int_distribution<int>(1, n)(rng);
    Mat G = oracle::random_matrix(rng, n, n);
    Vec v0 = oracle::random_matrix(rng, n, 1);
    v0.normalize();
    G -= (G * v0) * v0.transpose();  // G v0 = 0
    const Mat N = oracle::random_matrix(rng, n, ny);
    const Mat C = oracle::random_matrix(rng, ny, n);
    const auto verdict = cert::check_equilibrium_uniqueness(G, N, C, Mat::Zero(ny, ny));
    REQUIRE(std::holds_alternative<Counterexample>(verdict));
    const Vec v = std::get<Counterexample>(verdict).v;
    CHECK((G * v).norm() <= 1e-8 * v.norm());
    CHECK(std::abs(std::abs(v.normalized().dot(v0)) - 1.0) <= 1e-6);
  }
}

TEST_CASE("nonsingular G with zero theta has no counterexample") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat G = stable_matrix(rng, 3);
    cert::EquilibriumOptions opts;
    opts.restarts = 16;
    const auto v = cert::check_equilibrium_uniqueness(G, oracle::random_matrix(rng, 3, 1),
                                                      oracle::random_matrix(rng, 1, 3), Mat::Zero(1, 1), opts);
    CHECK(std::holds_alternative<NoCounterexampleFound>(v));
  }
}

TEST_CASE("planted nonzero equilibrium is found") {
  // G = -I, C = I, theta = I, N = I: G v + |v|^2 v = 0 on the unit sphere.
  const Mat I2 = Mat::Identity(2, 2);
  const auto verdict = cert::check_equilibrium_uniqueness(-I2, I2, I2, I2);
  REQUIRE(std::holds_alternative<Counterexample>(verdict));
  CHECK(std::get<Counterexample>(verdict).v.norm() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("every counterexample is a genuine equilibrium") {
  std::mt19937_64 rng(33);
  int found = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 4)(rng);
    const int ny = std::uniform_int_distribution<int>(1, n)(rng);
    const Mat G = oracle::random_matrix(rng, n, n);
    const Mat N = oracle::random_matrix(rng, n, ny);
    const Mat C = oracle::random_matrix(rng, ny, n);
    const Mat theta = oracle::random_psd(rng, ny, ny);
    cert::EquilibriumOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    opts.restarts = 16;
    const auto verdict = cert::check_equilibrium_uniqueness(G, N, C, theta, opts);
    if (const auto* ce = std::get_if<Counterexample>(&verdict)) {
      ++found;
      const Vec& v = ce->v;
      const Vec cv = C * v;
      const double q = cv.dot(theta * cv);
      CHECK((G * v + q * (N * cv)).norm() <= 1e-8 * v.norm());
      CHECK(v.norm() > 0.0);
    }
  }
  MESSAGE("counterexamples found: " << found);
}

TEST_CASE("search_P certifies the example") {
  const auto ex = example_system();
  const auto& o = ex.observer;
  cert::SearchOptions opts;
  opts.seed = 1;
  const Certificate c = cert::search_P(ex.lipschitz, o.G, o.E, ex.nominal.C, opts);
  const double beta = std::get<LipschitzMultiplier>(c.multipliers).beta;
  CHECK(max_eig(lipschitz_block(c.P, beta, 1.0, o.G, o.E, ex.nominal.C)) < -1e-6);
  CHECK(max_eig(-c.P) < 0.0);
  REQUIRE(c.lmi_margin);
  CHECK(*c.lmi_margin < -opts.tol);

  cert::SearchOptions fixed = opts;
  fixed.beta = 100.0;
  const Certificate c100 = cert::search_P(ex.lipschitz, o.G, o.E, ex.nominal.C, fixed);
  CHECK(std::get<LipschitzMultiplier>(c100.multipliers).beta == 100.0);
  CHECK(max_eig(lipschitz_block(c100.P, 100.0, 1.0, o.G, o.E, ex.nominal.C)) < 0.0);
}

TEST_CASE("search_P one-sided mode") {
  const auto ex = example_system();
  const auto& o = ex.observer;
  const OneSidedLipschitz spec{0.5, -0.2, 1.0};
  cert::SearchOptions opts;
  opts.restarts = 4;
  const Certificate c = cert::search_P(spec, o.G, o.E, ex.nominal.C, opts);
  const auto m = std::get<OneSidedMultipliers>(c.multipliers);
  CHECK(max_eig(osl_block(c.P, m.mu1, m.mu2, 0.5, -0.2, 1.0, o.G, o.E, ex.nominal.C)) < -1e-6);
}

TEST_CASE("search_P rejects impossible and degenerate requests") {
  const Mat I2 = Mat::Identity(2, 2);
  cert::SearchOptions opts;
  opts.restarts = 2;
  opts.max_iters = 300;
  CHECK_THROWS_AS(cert::search_P(Lipschitz{1.0}, I2, Mat::Zero(2, 1), Mat::Ones(1, 2), opts), SearchFailure);
  CHECK_THROWS_AS(cert::search_P(Lipschitz{0.0}, -I2, Mat::Zero(2, 1), Mat::Ones(1, 2), opts), InvalidInput);
}
