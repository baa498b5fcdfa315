#include "cubic_observer/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cubic_observer/errors.hpp"

namespace cubic_observer::sim {

namespace {

long delay_steps(double delay, double h, const std::string& field) {
  const double ratio = delay / h;
  const double steps = std::round(ratio);
  if (std::abs(steps * h - delay) > 1e-9 * std::max(1.0, delay)) {
    throw ConfigError(field, "delay not a multiple of step (" + std::to_string(delay) + " vs h = " +
                                 std::to_string(h) + ")");
  }
  return static_cast<long>(steps);
}

// Per-model view of delays as grid steps.
struct DelaySteps {
  std::vector<long> delta;
  std::vector<long> tau;
};

DelaySteps steps_for(const PlantModel& m, double h, const char* which) {
  DelaySteps s;
  for (std::size_t i = 0; i < m.delta.size(); ++i) {
    s.delta.push_back(delay_steps(m.delta[i], h, std::string(which) + ".delta[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < m.tau.size(); ++i) {
    s.tau.push_back(delay_steps(m.tau[i], h, std::string(which) + ".tau[" + std::to_string(i) + "]"));
  }
  return s;
}

class Integrator {
 public:
  Integrator(const PlantModel& truth, const PlantModel& design, const ObserverParams& obs,
             const SimConfig& cfg)
      : truth_(truth),
        design_(design),
        obs_(obs),
        cfg_(cfg),
        truth_steps_(steps_for(truth, cfg.h, "truth")),
        design_steps_(steps_for(design, cfg.h, "design")),
        T_(Mat::Identity(design.n(), design.n()) - obs.E * design.C) {
    long depth = 1;
    for (long m : truth_steps_.tau) {
      depth = std::max(depth, m + 2);
    }
    for (long m : design_steps_.tau) {
      depth = std::max(depth, m + 2);
    }
    y0_ = truth.C * cfg.x0;
    const Vec before = cfg.prehistory == Prehistory::Zero ? Vec::Zero(y0_.size()) : y0_;
    history_.emplace(y0_.size(), depth, before);
    truth_u_.resize(truth.delta.size() + 1);
    truth_y_.resize(truth.tau.size() + 1);
    design_u_.resize(design.delta.size() + 1);
    design_y_.resize(design.tau.size() + 1);
  }

  SimResult run() {
    const double h = cfg_.h;
    const long steps = static_cast<long>(std::floor(cfg_.t_end / h + 1e-9));
    const Eigen::Index n = truth_.n();
    const Eigen::Index ny = truth_.n_y();

    SimResult res;
    res.t.resize(static_cast<std::size_t>(steps + 1));
    res.x.resize(n, steps + 1);
    res.xhat.resize(n, steps + 1);
    res.w.resize(n, steps + 1);
    res.y.resize(ny, steps + 1);

    Vec x = cfg_.x0;
    Vec w = cfg_.xhat0 - obs_.E * y0_;
    auto store = [&](long k) {
      const Vec y = truth_.C * x;
      res.t[static_cast<std::size_t>(k)] = static_cast<double>(k) * h;
      res.x.col(k) = x;
      res.w.col(k) = w;
      res.y.col(k) = y;
      res.xhat.col(k) = w + obs_.E * y;
    };
    store(0);
    history_->push(y0_);

    Vec k1x, k1w, k2x, k2w, k3x, k3w, k4x, k4w;
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * h;
      rhs(k, 0.0, t, x, w, k1x, k1w);
      rhs(k, 0.5, t + 0.5 * h, x + 0.5 * h * k1x, w + 0.5 * h * k1w, k2x, k2w);
      rhs(k, 0.5, t + 0.5 * h, x + 0.5 * h * k2x, w + 0.5 * h * k2w, k3x, k3w);
      rhs(k, 1.0, t + h, x + h * k3x, w + h * k3w, k4x, k4w);
      x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
      if (!x.allFinite() || !w.allFinite()) {
        std::ostringstream os;
        os << "simulation diverged at step " << (k + 1) << " (t = " << (k + 1) * h << ")";
        throw DivergenceError(os.str(), k + 1, static_cast<double>(k + 1) * h);
      }
      store(k + 1);
      history_->push(res.y.col(k + 1));
    }
    res.jo = cumulative_error(res);
    return res;
  }

 private:
  double input_at(std::size_t channel, double t) const {
    if (t < 0.0 && cfg_.prehistory == Prehistory::Zero) {
      return 0.0;
    }
    expr::EvalEnv env;
    env.t = t;
    return expr::eval(cfg_.input[channel], env);
  }

  Vec input_vector(double t) const {
    Vec u(static_cast<Eigen::Index>(cfg_.input.size()));
    for (std::size_t i = 0; i < cfg_.input.size(); ++i) {
      u(static_cast<Eigen::Index>(i)) = input_at(i, t);
    }
    return u;
  }

  // Output delayed by m grid steps at stage offset c (0, 1/2 or 1) of step k.
  Vec delayed_output(long k, double c, long m, const Vec& y_now) const {
    if (m == 0) {
      return y_now;
    }
    if (k < m) {
      // whole step maps into t <= 0; the prehistory is taken as the left limit at 0
      return history_->at(-1);
    }
    if (c == 0.0) {
      return history_->at(k - m);
    }
    if (c == 1.0) {
      return history_->at(k - m + 1);
    }
    return 0.5 * (history_->at(k - m) + history_->at(k - m + 1));
  }

  void fill_slots(const PlantModel& model, const DelaySteps& ds, long k, double c, double t,
                  const Vec& y_now, std::vector<Vec>& u, std::vector<Vec>& y) const {
    u[0] = input_vector(t);
    for (std::size_t i = 0; i < model.delta.size(); ++i) {
      if (cfg_.prehistory == Prehistory::Zero && k < ds.delta[i]) {
        u[i + 1] = Vec::Zero(static_cast<Eigen::Index>(cfg_.input.size()));
      } else {
        u[i + 1] = input_vector(t - model.delta[i]);
      }
    }
    y[0] = y_now;
    for (std::size_t j = 0; j < ds.tau.size(); ++j) {
      y[j + 1] = delayed_output(k, c, ds.tau[j], y_now);
    }
  }

  static Vec eval_all(const std::vector<expr::Expr>& fs, const expr::EvalEnv& env) {
    Vec out(static_cast<Eigen::Index>(fs.size()));
    for (std::size_t i = 0; i < fs.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = expr::eval(fs[i], env);
    }
    return out;
  }

  void rhs(long k, double c, double t, const Vec& x, const Vec& w, Vec& dx, Vec& dw) {
    try {
      const Vec y = truth_.C * x;

      fill_slots(truth_, truth_steps_, k, c, t, y, truth_u_, truth_y_);
      expr::EvalEnv env{std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                        truth_u_, truth_y_, t};
      dx = truth_.A * x + eval_all(truth_.f_u, env) + truth_.D * eval_all(truth_.f_g, env) +
           eval_all(truth_.f_L, env);

      const Vec xhat = w + obs_.E * y;
      fill_slots(design_, design_steps_, k, c, t, y, design_u_, design_y_);
      expr::EvalEnv denv{std::span<const double>(xhat.data(), static_cast<std::size_t>(xhat.size())),
                         design_u_, design_y_, t};
      dw = obs_.G * w + obs_.J * y + T_ * (eval_all(design_.f_u, denv) + eval_all(design_.f_L, denv));
      if (cfg_.cubic_enabled) {
        const Vec ce = y - design_.C * xhat;
        const double q = ce.dot(obs_.theta * ce);
        dw -= q * (obs_.N * ce);
      }
    } catch (const EvalError& e) {
      std::ostringstream os;
      os << "at t = " << t << ": " << e.what();
      throw EvalError(os.str());
    }
  }

  const PlantModel& truth_;
  const PlantModel& design_;
  const ObserverParams& obs_;
  const SimConfig& cfg_;
  DelaySteps truth_steps_;
  DelaySteps design_steps_;
  Mat T_;
  Vec y0_;
  std::optional<HistoryBuffer> history_;
  std::vector<Vec> truth_u_, truth_y_, design_u_, design_y_;
};

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

}  // namespace

// ---- HistoryBuffer ----------------------------------------------------------

HistoryBuffer::HistoryBuffer(Eigen::Index dim, long depth, Vec before_start)
    : ring_(static_cast<std::size_t>(std::max(1L, depth)), Vec::Zero(dim)),
      depth_(std::max(1L, depth)),
      before_start_(std::move(before_start)) {
  if (before_start_.size() != dim) {
    throw DimensionError("history prehistory value has the wrong dimension");
  }
}

void HistoryBuffer::push(const Vec& sample) {
  ring_[static_cast<std::size_t>(count_ % depth_)] = sample;
  ++count_;
}

const Vec& HistoryBuffer::at(long k) const {
  if (k < 0) {
    return before_start_;
  }
  if (k >= count_ || k < count_ - depth_) {
    throw InvalidInput("history sample " + std::to_string(k) + " is not retained");
  }
  return ring_[static_cast<std::size_t>(k % depth_)];
}

// ---- configuration -------------------------------------------------------------

std::vector<expr::Expr> parse_input(const std::string& text, int n_u) {
  expr::Dims dims;
  dims.allow_state = false;
  dims.allow_time = true;
  std::vector<expr::Expr> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    out.push_back(expr::parse(part, dims));
  }
  if (static_cast<int>(out.size()) != n_u) {
    throw ConfigError("input", "expected " + std::to_string(n_u) + " input expressions, got " +
                                   std::to_string(out.size()));
  }
  return out;
}

SimConfig example_config(const PlantModel& plant) {
  SimConfig cfg;
  cfg.x0 = Vec::Zero(plant.n());
  cfg.xhat0 = Vec::Constant(plant.n(), -5.0);
  std::string input;
  for (int i = 0; i < plant.n_u; ++i) {
    input += (i ? "," : "") + std::string(kDefaultInput);
  }
  cfg.input = parse_input(input, plant.n_u);
  return cfg;
}

// ---- simulation ------------------------------------------------------------------

SimResult simulate(const PlantModel& truth, const PlantModel& design, const ObserverParams& obs,
                   const SimConfig& cfg) {
  if (!(cfg.h > 0.0) || !std::isfinite(cfg.h)) {
    throw ConfigError("step", "step size must be positive");
  }
  if (!(cfg.h <= cfg.t_end) || !std::isfinite(cfg.t_end)) {
    throw ConfigError("t_end", "horizon must be finite and at least one step");
  }
  for (const PlantModel* m : {&truth, &design}) {
    const ValidationReport report = validate(*m, obs);
    if (!report.empty()) {
      throw ConfigError(report.front().name, report.front().message);
    }
  }
  if (truth.n() != design.n() || truth.n_y() != design.n_y() || truth.n_u != design.n_u) {
    throw DimensionError("truth and design plants have different dimensions");
  }
  if (cfg.x0.size() != truth.n() || cfg.xhat0.size() != truth.n()) {
    throw ConfigError("x0", "initial states must have dimension " + std::to_string(truth.n()));
  }
  if (static_cast<int>(cfg.input.size()) != truth.n_u) {
    throw ConfigError("input", "expected " + std::to_string(truth.n_u) + " input expressions");
  }
  return Integrator(truth, design, obs, cfg).run();
}

std::vector<double> cumulative_error(const SimResult& result) {
  const std::size_t count = result.t.size();
  std::vector<double> jo(count, 0.0);
  if (count == 0) {
    return jo;
  }
  double prev = (result.x.col(0) - result.xhat.col(0)).squaredNorm();
  for (std::size_t k = 1; k < count; ++k) {
    const double cur =
        (result.x.col(static_cast<Eigen::Index>(k)) - result.xhat.col(static_cast<Eigen::Index>(k))).squaredNorm();
    jo[k] = jo[k - 1] + 0.5 * (result.t[k] - result.t[k - 1]) * (prev + cur);
    prev = cur;
  }
  return jo;
}

Comparison compare_cubic_linear(const PlantModel& truth, const PlantModel& design,
                                const ObserverParams& obs, const SimConfig& cfg, ExecPolicy policy) {
  auto runs = run_restarts<SimResult>(2, policy, [&](int i) {
    SimConfig c = cfg;
    c.cubic_enabled = i == 0;
    return simulate(truth, design, obs, c);
  });
  Comparison out;
  out.cubic = std::move(runs[0]);
  out.linear = std::move(runs[1]);
  out.jo_cubic = out.cubic.jo.back();
  out.jo_linear = out.linear.jo.back();
  out.ratio = out.jo_linear > 0.0 ? out.jo_cubic / out.jo_linear : 1.0;
  return out;
}

void write_trajectory_csv(std::ostream& out, const SimResult& r) {
  const Eigen::Index n = r.x.rows();
  const Eigen::Index ny = r.y.rows();
  out << 't';
  for (Eigen::Index i = 1; i <= n; ++i) {
    out << ",x" << i;
  }
  for (Eigen::Index i = 1; i <= n; ++i) {
    out << ",xhat" << i;
  }
  for (Eigen::Index i = 1; i <= ny; ++i) {
    out << ",y" << i;
  }
  out << ",Jo\n";
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    std::string line = format_number(r.t[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      line += ',' + format_number(r.x(i, col));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      line += ',' + format_number(r.xhat(i, col));
    }
    for (Eigen::Index i = 0; i < ny; ++i) {
      line += ',' + format_number(r.y(i, col));
    }
    line += ',' + format_number(r.jo[k]);
    out << line << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const SimResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError(path.string(), "cannot open output file");
  }
  write_trajectory_csv(out, result);
  if (!out) {
    throw ConfigError(path.string(), "write failed");
  }
}

Reproduction reproduce_example(const std::filesystem::path& out_dir, ExecPolicy policy, double h,
                               double t_end) {
  const ExampleSystem ex = example_system();
  SimConfig cfg = example_config(ex.nominal);
  cfg.h = h;
  cfg.t_end = t_end;

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto probe = out_dir / ".write_probe";
    std::ofstream test(probe);
    if (ec || !test) {
      throw ConfigError(out_dir.string(), "output directory is not writable");
    }
    test.close();
    std::filesystem::remove(probe, ec);
  }

  // Four independent runs: {nominal, uncertain} x {cubic, linear}.
  auto runs = run_restarts<SimResult>(4, policy, [&](int i) {
    SimConfig c = cfg;
    c.cubic_enabled = i % 2 == 0;
    const PlantModel& truth = i < 2 ? ex.nominal : ex.uncertain;
    return simulate(truth, ex.nominal, ex.observer, c);
  });

  auto pack = [](SimResult cubic, SimResult linear) {
    Comparison c;
    c.jo_cubic = cubic.jo.back();
    c.jo_linear = linear.jo.back();
    c.ratio = c.jo_linear > 0.0 ? c.jo_cubic / c.jo_linear : 1.0;
    c.cubic = std::move(cubic);
    c.linear = std::move(linear);
    return c;
  };
  Reproduction rep;
  rep.nominal = pack(std::move(runs[0]), std::move(runs[1]));
  rep.uncertain = pack(std::move(runs[2]), std::move(runs[3]));
  rep.all_finite = std::isfinite(rep.nominal.jo_cubic) && std::isfinite(rep.nominal.jo_linear) &&
                   std::isfinite(rep.uncertain.jo_cubic) && std::isfinite(rep.uncertain.jo_linear);

  if (!out_dir.empty()) {
    write_trajectory_csv(out_dir / "nominal_cubic.csv", rep.nominal.cubic);
    write_trajectory_csv(out_dir / "nominal_linear.csv", rep.nominal.linear);
    write_trajectory_csv(out_dir / "uncertain_cubic.csv", rep.uncertain.cubic);
    write_trajectory_csv(out_dir / "uncertain_linear.csv", rep.uncertain.linear);
    std::ofstream summary(out_dir / "summary.txt", std::ios::binary);
    summary << summary_text(rep);
    if (!summary) {
      throw ConfigError((out_dir / "summary.txt").string(), "write failed");
    }
  }
  return rep;
}

std::string summary_text(const Reproduction& rep) {
  std::ostringstream os;
  os << "jo_cubic_nominal=" << format_number(rep.nominal.jo_cubic) << '\n'
     << "jo_linear_nominal=" << format_number(rep.nominal.jo_linear) << '\n'
     << "ratio_nominal=" << format_number(rep.nominal.ratio) << '\n'
     << "jo_cubic_uncertain=" << format_number(rep.uncertain.jo_cubic) << '\n'
     << "jo_linear_uncertain=" << format_number(rep.uncertain.jo_linear) << '\n'
     << "ratio_uncertain=" << format_number(rep.uncertain.ratio) << '\n';
  return os.str();
}

}  // namespace cubic_observer::sim
