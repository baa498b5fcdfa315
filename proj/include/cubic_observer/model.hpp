#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cubic_observer/exprlang.hpp"
#include "cubic_observer/numlin.hpp"

namespace cubic_observer {

// x' = A x + f_u(U, Y) + D f_g(x, U, Y) + f_L(x, U, Y),  y = C x
//
// U stacks the input at each delay in `delta`, Y the output at each delay in
// `tau`. Expressions address them through delay slots (see exprlang.hpp).
struct PlantModel {
  Mat A;
  Mat C;
  Mat D;
  int n_u = 0;
  std::vector<double> delta;
  std::vector<double> tau;
  std::vector<expr::Expr> f_u;  // n entries, no state references
  std::vector<expr::Expr> f_g;  // n_g entries
  std::vector<expr::Expr> f_L;  // n entries

  int n() const { return static_cast<int>(A.rows()); }
  int n_y() const { return static_cast<int>(C.rows()); }
  int n_g() const { return static_cast<int>(D.cols()); }

  expr::Dims dims(bool allow_state = true) const;
};

struct Lipschitz {
  double gamma = 1.0;
};

struct OneSidedLipschitz {
  double rho = 0.0;
  double a = 0.0;
  double b = 0.0;
};

using LipschitzSpec = std::variant<Lipschitz, OneSidedLipschitz>;

// w' = G w + J y + T f_u + T f_L(xhat) - ((y - C xhat)^T theta (y - C xhat)) N (y - C xhat)
// xhat = w + E y,  T = I - E C
struct ObserverParams {
  Mat G;
  Mat J;
  Mat E;
  Mat N;
  Mat theta;
  double alpha = 1.0;
};

struct LipschitzMultiplier {
  double beta = 1.0;
};

struct OneSidedMultipliers {
  double mu1 = 1.0;
  double mu2 = 1.0;
};

using Multipliers = std::variant<LipschitzMultiplier, OneSidedMultipliers>;

// Equilibrium-uniqueness outcomes.
struct GuaranteedByGainFormula {};

struct NoCounterexampleFound {
  int restarts = 0;
  long evaluations = 0;
  double best_residual = 0.0;
};

struct Counterexample {
  Vec v;
  double residual = 0.0;
};

using EquilibriumVerdict = std::variant<GuaranteedByGainFormula, NoCounterexampleFound, Counterexample>;

std::string describe(const EquilibriumVerdict& verdict);

// Margins and the verdict are filled in by verification; nothing read from a
// file is trusted.
struct Certificate {
  Mat P;
  Multipliers multipliers;
  std::optional<double> lmi_margin;
  std::optional<double> n_margin;
  std::optional<EquilibriumVerdict> equilibrium;
};

struct Violation {
  std::string name;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

// Every dimension mismatch and invariant violation, empty when valid.
ValidationReport validate(const PlantModel& plant, const ObserverParams& obs);
ValidationReport validate(const PlantModel& plant);

// The two-state worked example: nominal and perturbed plants, an observer that
// satisfies the structural conditions, and a Lyapunov certificate.
struct ExampleSystem {
  PlantModel nominal;
  PlantModel uncertain;
  ObserverParams observer;
  Certificate certificate;
  LipschitzSpec lipschitz;
};

ExampleSystem example_system();

struct Config {
  PlantModel plant;
  LipschitzSpec lipschitz;
  std::optional<ObserverParams> observer;
  std::optional<Certificate> certificate;
};

// JSON document I/O. Errors carry the offending field path.
Config config_from_json(const std::string& text);
std::string config_to_json(const Config& cfg);
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& cfg);

// "[1 0; 0 1]" / "[10;-3]" row syntax. Rows split on ';', entries on
// whitespace or ','.
Mat parse_matrix_literal(const std::string& text);

bool structurally_equal(const PlantModel& a, const PlantModel& b);
bool structurally_equal(const ObserverParams& a, const ObserverParams& b);

}  // namespace cubic_observer
