#pragma once

// Shared test systems. These build inputs for the library; the expected
// values they are checked against come from oracles.hpp.

#include <random>
#include <string>

#include "cubic_observer/design_uio.hpp"
#include "cubic_observer/model.hpp"
#include "cubic_observer/sim.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace cubic_observer;

struct LinearCase {
  PlantModel plant;
  ObserverParams obs;
  sim::SimConfig cfg;
};

// Random 3-state plant with one unknown input, no state nonlinearity in f_L,
// theta = 0, and a stable observer. The estimation error then obeys e' = G e.
// `time_scale` speeds up A, G and J together (and shortens the horizon), so
// RK4 truncation error rises above round-off at small steps.
inline LinearCase random_linear_case(std::mt19937_64& rng, double time_scale = 1.0) {
  LinearCase c;
  PlantModel& p = c.plant;
  p.A = oracle::random_matrix(rng, 3, 3, 0.5);
  p.C = oracle::random_matrix(rng, 2, 3);
  p.D = oracle::random_matrix(rng, 3, 1);
  p.n_u = 1;
  const expr::Dims d = p.dims();
  p.f_u = {expr::parse("0.5*u1", d), expr::parse("0", d), expr::parse("cos(u1)", d)};
  p.f_g = {expr::parse("tanh(x1)*x2 + u1", d)};
  p.f_L = {expr::parse("0", d), expr::parse("0", d), expr::parse("0", d)};

  const Mat E = design::compute_E(p.C, p.D);
  const Mat T = Mat::Identity(3, 3) - E * p.C;
  design::StabilizeOptions opts;
  opts.policy = ExecPolicy::Serial;
  const Mat L = design::stabilize_L(T, p.A, p.C, 0.5, opts);
  const auto des = design::design_GJ(p.A, p.C, E, L, p.D);
  c.obs = ObserverParams{time_scale * des.G, time_scale * des.J, E, Mat::Zero(3, 2), Mat::Zero(2, 2), 1.0};
  p.A *= time_scale;

  c.cfg.h = 0.001;
  c.cfg.t_end = std::round(2000.0 / time_scale) / 1000.0;
  c.cfg.x0 = oracle::random_matrix(rng, 3, 1) * 0.1;
  c.cfg.xhat0 = c.cfg.x0 + oracle::random_matrix(rng, 3, 1);
  c.cfg.input = sim::parse_input("0.3*sin(2*t)", 1);
  return c;
}

// Relative error of the simulated final estimation error against exp(G t) e0.
inline double linear_oracle_error(const LinearCase& c, double h) {
  sim::SimConfig cfg = c.cfg;
  cfg.h = h;
  const auto r = sim::simulate(c.plant, c.plant, c.obs, cfg);
  const Eigen::Index last = r.x.cols() - 1;
  const Vec e0 = r.x.col(0) - r.xhat.col(0);
  const Vec expected = oracle::expm(c.obs.G * r.t.back()) * e0;
  const Vec got = r.x.col(last) - r.xhat.col(last);
  return (got - expected).norm() / expected.norm();
}

}  // namespace fixture
