#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cubic_observer/model.hpp"
#include "cubic_observer/parallel.hpp"

namespace cubic_observer::sim {

// Values used for t < 0. Analytic: inputs come from the input expressions at
// negative times and outputs hold y(0). Zero: both are zero.
enum class Prehistory { Analytic, Zero };

inline constexpr const char* kDefaultInput = "0.001*sin(t)";

struct SimConfig {
  double h = 0.01;
  double t_end = 20.0;
  Vec x0;
  Vec xhat0;
  std::vector<expr::Expr> input;  // one expression in t per input channel
  Prehistory prehistory = Prehistory::Analytic;
  bool cubic_enabled = true;
};

// Comma-separated input expressions in `t`, one per channel.
std::vector<expr::Expr> parse_input(const std::string& text, int n_u);

// Defaults for the worked example: x0 = 0, xhat0 = -5, default input.
SimConfig example_config(const PlantModel& plant);

// Ring buffer of grid samples of a vector signal. Index k is the sample at
// t = k h; indices below zero return the prehistory value.
class HistoryBuffer {
 public:
  HistoryBuffer(Eigen::Index dim, long depth, Vec before_start);

  void push(const Vec& sample);
  long count() const { return count_; }
  long depth() const { return depth_; }
  const Vec& at(long k) const;

 private:
  std::vector<Vec> ring_;
  long depth_;
  long count_ = 0;
  Vec before_start_;
};

struct SimResult {
  std::vector<double> t;
  Mat x;     // n x K, one column per grid point
  Mat xhat;
  Mat w;
  Mat y;
  std::vector<double> jo;
};

// RK4 on the coupled plant (`truth`) and cubic observer (built from
// `design`). Throws ConfigError for delays that are not multiples of h,
// EvalError (with time stamp) and DivergenceError.
SimResult simulate(const PlantModel& truth, const PlantModel& design, const ObserverParams& obs,
                   const SimConfig& cfg);

// Trapezoidal integral of |x - xhat|^2 over the grid.
std::vector<double> cumulative_error(const SimResult& result);

struct Comparison {
  double jo_cubic = 0.0;
  double jo_linear = 0.0;
  double ratio = 0.0;  // jo_cubic / jo_linear
  SimResult cubic;
  SimResult linear;
};

Comparison compare_cubic_linear(const PlantModel& truth, const PlantModel& design,
                                const ObserverParams& obs, const SimConfig& cfg,
                                ExecPolicy policy = ExecPolicy::Parallel);

void write_trajectory_csv(std::ostream& out, const SimResult& result);
void write_trajectory_csv(const std::filesystem::path& path, const SimResult& result);

struct Reproduction {
  Comparison nominal;
  Comparison uncertain;
  bool all_finite = false;
};

// Both scenarios of the worked example (matched plant, and perturbed plant
// with the nominal observer). Writes four trajectory CSVs and summary.txt when
// out_dir is non-empty.
Reproduction reproduce_example(const std::filesystem::path& out_dir, ExecPolicy policy = ExecPolicy::Parallel,
                               double h = 0.01, double t_end = 20.0);

std::string summary_text(const Reproduction& rep);

}  // namespace cubic_observer::sim
