// cubic-observer: design, certify and simulate cubic observers.
//
// Exit codes: 0 ok, 1 verification failed, 2 bad input, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cubic_observer/cert.hpp"
#include "cubic_observer/design_uio.hpp"
#include "cubic_observer/errors.hpp"
#include "cubic_observer/model.hpp"
#include "cubic_observer/sim.hpp"

namespace co = cubic_observer;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kVerification = 1;
constexpr int kInput = 2;
constexpr int kNumerical = 3;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw co::ConfigError(path.string(), "cannot write output file");
  }
}

co::Vec vector_flag(const std::string& text, Eigen::Index n, const char* name) {
  const co::Mat m = co::parse_matrix_literal(text);
  if (m.size() != n || (m.cols() != 1 && m.rows() != 1)) {
    throw co::ConfigError(name, "expected a vector of length " + std::to_string(n));
  }
  return Eigen::Map<const co::Vec>(m.data(), n);
}

// ---- design -------------------------------------------------------------------

struct DesignArgs {
  std::string config;
  std::string L;
  double margin = 0.0;
  std::string out;
  std::uint64_t seed = 0;
};

int run_design(const DesignArgs& a) {
  co::Config cfg = co::load_config(a.config);
  const co::PlantModel& p = cfg.plant;
  const co::Mat E = co::design::compute_E(p.C, p.D);
  co::Mat L;
  if (!a.L.empty()) {
    L = co::parse_matrix_literal(a.L);
  } else {
    co::design::StabilizeOptions opts;
    opts.seed = a.seed;
    const co::Mat T = co::Mat::Identity(p.n(), p.n()) - E * p.C;
    L = co::design::stabilize_L(T, p.A, p.C, a.margin, opts);
  }
  const auto d = co::design::design_GJ(p.A, p.C, E, L, p.D);

  const int ny = p.n_y();
  cfg.observer = co::ObserverParams{d.G, d.J, d.E, co::Mat::Zero(p.n(), ny), co::Mat::Identity(ny, ny), 1.0};
  cfg.certificate.reset();

  std::cout << "E =\n" << d.E << "\nG =\n" << d.G << "\nJ =\n" << d.J << "\nL =\n" << L << "\n";
  std::cout << "residual_sylvester = " << d.residual_sylvester << "\n";
  std::cout << "residual_decoupling = " << *d.residual_decoupling << "\n";
  std::cout << "spectral_abscissa_G = " << co::numlin::spectral_abscissa(d.G) << "\n";

  if (!a.out.empty()) {
    json doc = json::parse(co::config_to_json(cfg));
    doc["design"] = {{"residual_sylvester", d.residual_sylvester},
                     {"residual_decoupling", *d.residual_decoupling}};
    doc["design"]["L"] = json::array();
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < L.cols(); ++c) {
        row.push_back(L(r, c));
      }
      doc["design"]["L"].push_back(row);
    }
    write_text(a.out, doc.dump(2) + "\n");
  }
  if (d.residual_sylvester > co::design::kStructuralTol || *d.residual_decoupling > co::design::kStructuralTol) {
    std::cerr << "structural residuals exceed " << co::design::kStructuralTol << "\n";
    return kVerification;
  }
  return kOk;
}

// ---- certify ------------------------------------------------------------------

struct CertifyArgs {
  std::string config;
  bool search = false;
  bool check_only = false;
  std::optional<double> alpha;
  std::string out;
  std::uint64_t seed = 0;
};

int run_certify(const CertifyArgs& a) {
  co::Config cfg = co::load_config(a.config);
  if (!cfg.observer) {
    throw co::ConfigError("observer", "certification needs an observer block");
  }
  co::ObserverParams& obs = *cfg.observer;
  const co::Mat& C = cfg.plant.C;
  if (a.alpha) {
    if (!(*a.alpha > 0.0)) {
      throw co::ConfigError("--alpha", "must be positive");
    }
    obs.alpha = *a.alpha;
  }

  co::Certificate cert;
  if (a.search) {
    co::cert::SearchOptions opts;
    opts.seed = a.seed;
    cert = co::cert::search_P(cfg.lipschitz, obs.G, obs.E, C, opts);
    obs.N = co::cert::cubic_gain(cert.P, C, obs.theta, obs.alpha);
  } else {
    if (!cfg.certificate) {
      throw co::ConfigError("certificate", "--check-only needs a certificate block");
    }
    cert = *cfg.certificate;
  }

  bool ok = true;
  const double lmi = co::cert::verify_lmi(cfg.lipschitz, cert.P, cert.multipliers, obs.G, obs.E, C);
  cert.lmi_margin = lmi;
  std::cout << "lmi_margin = " << lmi << (lmi < 0.0 ? "" : "  (FAIL)") << "\n";
  ok = ok && lmi < 0.0;

  const auto nrep = co::cert::verify_N_condition(cert.P, obs.N, C, obs.theta, obs.alpha);
  cert.n_margin = nrep.margin;
  std::cout << "n_margin = " << nrep.margin << "  [" << co::cert::to_string(nrep.classification) << "]\n";
  if (nrep.identity_residual) {
    std::cout << "gain_identity_residual = " << *nrep.identity_residual << "\n";
  }
  if (nrep.classification == co::cert::NClass::SemidefinitePass) {
    std::cerr << "warning: gain condition holds only semidefinitely (rank(C) < n); "
                 "negative definite on range(C^T)\n";
  }
  ok = ok && nrep.classification != co::cert::NClass::Fail;

  co::cert::EquilibriumOptions eq;
  eq.seed = a.seed;
  eq.P = cert.P;
  eq.alpha = obs.alpha;
  const auto verdict = co::cert::check_equilibrium_uniqueness(obs.G, obs.N, C, obs.theta, eq);
  cert.equilibrium = verdict;
  std::cout << "equilibrium = " << co::describe(verdict) << "\n";
  ok = ok && !std::holds_alternative<co::Counterexample>(verdict);

  if (a.search) {
    std::cout << "P =\n" << cert.P << "\nN =\n" << obs.N << "\n";
    if (!a.out.empty()) {
      cfg.certificate = cert;
      co::save_config(a.out, cfg);
    }
  }
  return ok ? kOk : kVerification;
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string truth;
  double t_end = 20.0;
  double step = 0.01;
  std::string input = co::sim::kDefaultInput;
  bool no_cubic = false;
  std::string out;
  std::string x0;
  std::string xhat0;
  std::string prehistory = "analytic";
};

int run_simulate(const SimulateArgs& a) {
  const co::Config cfg = co::load_config(a.config);
  if (!cfg.observer) {
    throw co::ConfigError("observer", "simulation needs an observer block");
  }
  const co::PlantModel truth = a.truth.empty() ? cfg.plant : co::load_config(a.truth).plant;

  co::sim::SimConfig sc = co::sim::example_config(cfg.plant);
  sc.h = a.step;
  sc.t_end = a.t_end;
  sc.cubic_enabled = !a.no_cubic;
  sc.prehistory = a.prehistory == "zero" ? co::sim::Prehistory::Zero : co::sim::Prehistory::Analytic;
  std::string input = a.input;
  if (cfg.plant.n_u > 1 && input.find(',') == std::string::npos) {
    for (int i = 1; i < cfg.plant.n_u; ++i) {
      input += "," + a.input;
    }
  }
  sc.input = co::sim::parse_input(cfg.plant.n_u == 0 ? "" : input, cfg.plant.n_u);
  if (!a.x0.empty()) {
    sc.x0 = vector_flag(a.x0, cfg.plant.n(), "--x0");
  }
  if (!a.xhat0.empty()) {
    sc.xhat0 = vector_flag(a.xhat0, cfg.plant.n(), "--xhat0");
  }

  const auto result = co::sim::simulate(truth, cfg.plant, *cfg.observer, sc);
  if (a.out.empty() || a.out == "-") {
    co::sim::write_trajectory_csv(std::cout, result);
  } else {
    co::sim::write_trajectory_csv(std::filesystem::path(a.out), result);
    std::cout << "Jo(" << result.t.back() << ") = " << result.jo.back() << "\n";
  }
  return kOk;
}

// ---- reproduce ----------------------------------------------------------------

struct ReproduceArgs {
  std::string out = "reproduction";
  bool serial = false;
};

int run_reproduce(const ReproduceArgs& a) {
  const auto rep = co::sim::reproduce_example(a.out, a.serial ? co::ExecPolicy::Serial : co::ExecPolicy::Parallel);
  std::cout << co::sim::summary_text(rep);
  if (!rep.all_finite || !(rep.uncertain.ratio < 1.0)) {
    std::cerr << "uncertain-model ratio is not below 1\n";
    return kVerification;
  }
  return kOk;
}

// ---- export-example -------------------------------------------------------------

int run_export(const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto ex = co::example_system();
  co::save_config(std::filesystem::path(dir) / "nominal.json",
                  co::Config{ex.nominal, ex.lipschitz, ex.observer, ex.certificate});
  co::save_config(std::filesystem::path(dir) / "uncertain.json",
                  co::Config{ex.uncertain, ex.lipschitz, std::nullopt, std::nullopt});
  co::save_config(std::filesystem::path(dir) / "plant.json",
                  co::Config{ex.nominal, ex.lipschitz, std::nullopt, std::nullopt});
  return kOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const co::VerificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerification;
  } catch (const co::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const co::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design, certify and simulate cubic observers"};
  app.require_subcommand(1);

  DesignArgs design;
  auto* cmd_design = app.add_subcommand("design", "Compute E, G, J from a plant config");
  cmd_design->add_option("--config", design.config, "plant config (JSON)")->required()->check(CLI::ExistingFile);
  auto* opt_l = cmd_design->add_option("--L", design.L, "gain L as a matrix literal, e.g. \"[10;-3]\"");
  auto* opt_m = cmd_design->add_option("--auto-margin", design.margin, "search L for this stability margin");
  opt_l->excludes(opt_m);
  cmd_design->add_option("--out", design.out, "write the config with an observer block");
  cmd_design->add_option("--seed", design.seed, "seed for the L search");

  CertifyArgs certify;
  auto* cmd_cert = app.add_subcommand("certify", "Verify or search an LMI certificate");
  cmd_cert->add_option("--config", certify.config, "config with observer block")->required()->check(CLI::ExistingFile);
  auto* opt_search = cmd_cert->add_flag("--search-P", certify.search, "search for P and compute N");
  auto* opt_check = cmd_cert->add_flag("--check-only", certify.check_only, "verify the stored certificate");
  opt_search->excludes(opt_check);
  cmd_cert->add_option("--alpha", certify.alpha, "gain scale alpha");
  auto* opt_cout = cmd_cert->add_option("--out", certify.out, "write the certified config (--search-P)");
  opt_cout->excludes(opt_check);
  cmd_cert->add_option("--seed", certify.seed, "seed for the searches");

  SimulateArgs simulate;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate plant and observer, write a trajectory CSV");
  cmd_sim->add_option("--config", simulate.config, "design config with observer block")->required()->check(CLI::ExistingFile);
  cmd_sim->add_option("--truth", simulate.truth, "plant config used as the true system")->check(CLI::ExistingFile);
  cmd_sim->add_option("--t-end", simulate.t_end, "horizon in seconds")->capture_default_str();
  cmd_sim->add_option("--step", simulate.step, "RK4 step")->capture_default_str();
  cmd_sim->add_option("--input", simulate.input, "input expressions in t, comma separated")->capture_default_str();
  cmd_sim->add_flag("--no-cubic", simulate.no_cubic, "drop the cubic correction");
  cmd_sim->add_option("--out", simulate.out, "CSV path (default stdout)");
  cmd_sim->add_option("--x0", simulate.x0, "plant initial state, e.g. \"[0;0]\"");
  cmd_sim->add_option("--xhat0", simulate.xhat0, "initial estimate, e.g. \"[-5;-5]\"");
  cmd_sim->add_option("--prehistory", simulate.prehistory, "values before t = 0")
      ->check(CLI::IsMember({"analytic", "zero"}))
      ->capture_default_str();

  ReproduceArgs reproduce;
  auto* cmd_rep = app.add_subcommand("reproduce", "Run the worked example, nominal and uncertain");
  cmd_rep->add_option("--out", reproduce.out, "output directory")->capture_default_str();
  cmd_rep->add_flag("--serial", reproduce.serial, "run the four simulations serially");

  std::string export_dir;
  auto* cmd_export = app.add_subcommand("export-example", "Write the worked example as config files");
  cmd_export->add_option("--out", export_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  if (*cmd_design) {
    if (design.L.empty() && opt_m->count() == 0) {
      std::cerr << "error: design needs --L or --auto-margin\n";
      return kInput;
    }
    return guarded([&] { return run_design(design); });
  }
  if (*cmd_cert) {
    if (!certify.search && !certify.check_only) {
      std::cerr << "error: certify needs --search-P or --check-only\n";
      return kInput;
    }
    return guarded([&] { return run_certify(certify); });
  }
  if (*cmd_sim) {
    return guarded([&] { return run_simulate(simulate); });
  }
  if (*cmd_rep) {
    return guarded([&] { return run_reproduce(reproduce); });
  }
  return guarded([&] { return run_export(export_dir); });
}
