#include "cubic_observer/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cubic_observer/cert.hpp"
#include "cubic_observer/errors.hpp"

namespace cubic_observer {

using json = nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string dims_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_shape(ValidationReport& report, const char* name, const Mat& m, Eigen::Index rows,
                 Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    report.push_back({std::string(name) + "-dims", std::string(name) + " is " + dims_str(m) +
                                                       ", expected " + std::to_string(rows) + "x" +
                                                       std::to_string(cols)});
  } else if (!m.allFinite()) {
    report.push_back({std::string(name) + "-finite", std::string(name) + " has non-finite entries"});
  }
}

void check_exprs(ValidationReport& report, const char* name, const std::vector<expr::Expr>& fs,
                 std::size_t expected, const expr::Dims& dims) {
  if (fs.size() != expected) {
    report.push_back({std::string(name) + "-size", std::string(name) + " has " +
                                                       std::to_string(fs.size()) + " entries, expected " +
                                                       std::to_string(expected)});
  }
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (const auto& r : expr::collect_refs(fs[i])) {
      int dim = 0;
      int slots = 0;
      switch (r.kind) {
        case expr::VarKind::State:
          dim = dims.n;
          break;
        case expr::VarKind::Input:
          dim = dims.n_u;
          slots = dims.n_delta;
          break;
        case expr::VarKind::Output:
          dim = dims.n_y;
          slots = dims.n_tau;
          break;
        case expr::VarKind::Time:
          report.push_back({std::string(name) + "-time",
                            std::string(name) + "[" + std::to_string(i) + "] references t"});
          continue;
      }
      if (r.index < 1 || r.index > dim || r.delay_slot < 0 || r.delay_slot > slots) {
        report.push_back({std::string(name) + "-range",
                          std::string(name) + "[" + std::to_string(i) + "] has an out-of-range reference"});
      }
    }
  }
}

// ---- JSON helpers ---------------------------------------------------------

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(path + key, "missing field");
  }
  return obj.at(key);
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ConfigError(path, "expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw ConfigError(path, "number is not finite");
  }
  return v;
}

int read_dim(const json& obj, const std::string& key) {
  const json& j = field(obj, key, "");
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(key, "expected a non-negative integer");
  }
  return static_cast<int>(j.get<long long>());
}

Mat read_matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError(path, "expected an array of " + std::to_string(rows) + " rows");
  }
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(row_path, "expected " + std::to_string(cols) + " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = read_number(row[static_cast<std::size_t>(c)], row_path + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

json write_matrix(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> read_delays(const json& j, const std::string& path) {
  if (!j.is_array()) {
    throw ConfigError(path, "expected an array");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const double d = read_number(j[i], p);
    if (d < 0.0) {
      throw ConfigError(p, "delay must be non-negative");
    }
    out.push_back(d);
  }
  return out;
}

std::vector<expr::Expr> read_exprs(const json& j, const std::string& path, std::size_t count,
                                   const expr::Dims& dims) {
  if (!j.is_array() || j.size() != count) {
    throw ConfigError(path, "expected an array of " + std::to_string(count) + " expression strings");
  }
  std::vector<expr::Expr> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_string()) {
      throw ConfigError(p, "expected an expression string");
    }
    const std::string text = j[i].get<std::string>();
    try {
      out.push_back(expr::parse(text, dims));
    } catch (const RangeError& e) {
      if (!dims.allow_state) {
        expr::Dims with_state = dims;
        with_state.allow_state = true;
        bool state_ref = false;
        try {
          state_ref = expr::parse(text, with_state).references(expr::VarKind::State);
        } catch (const InputError&) {
        }
        if (state_ref) {
          throw ConfigError(p, "f_u must not reference state");
        }
      }
      throw ConfigError(p, e.what());
    } catch (const InputError& e) {
      throw ConfigError(p, e.what());
    }
  }
  return out;
}

json write_exprs(const std::vector<expr::Expr>& fs) {
  json arr = json::array();
  for (const auto& f : fs) {
    arr.push_back(expr::print(f));
  }
  return arr;
}

}  // namespace

expr::Dims PlantModel::dims(bool allow_state) const {
  expr::Dims d;
  d.n = n();
  d.n_u = n_u;
  d.n_y = n_y();
  d.n_delta = static_cast<int>(delta.size());
  d.n_tau = static_cast<int>(tau.size());
  d.allow_state = allow_state;
  return d;
}

std::string describe(const EquilibriumVerdict& verdict) {
  return std::visit(Overloaded{
                        [](const GuaranteedByGainFormula&) {
                          return std::string("guaranteed by the cubic gain formula");
                        },
                        [](const NoCounterexampleFound& v) {
                          std::ostringstream os;
                          os << "no counterexample found (" << v.restarts << " restarts, "
                             << v.evaluations << " iterations, best residual " << v.best_residual << ")";
                          return os.str();
                        },
                        [](const Counterexample& c) {
                          std::ostringstream os;
                          os << "counterexample v = [" << c.v.transpose() << "], residual " << c.residual;
                          return os.str();
                        },
                    },
                    verdict);
}

ValidationReport validate(const PlantModel& plant) {
  ValidationReport report;
  const Eigen::Index n = plant.A.rows();
  if (plant.A.rows() != plant.A.cols() || n == 0) {
    report.push_back({"A-dims", "A must be square and non-empty, got " + dims_str(plant.A)});
  } else if (!plant.A.allFinite()) {
    report.push_back({"A-finite", "A has non-finite entries"});
  }
  if (plant.C.rows() == 0) {
    report.push_back({"C-dims", "C must have at least one row"});
  }
  check_shape(report, "C", plant.C, plant.C.rows(), n);
  check_shape(report, "D", plant.D, n, plant.D.cols());
  if (plant.n_u < 0) {
    report.push_back({"n_u", "input dimension must be non-negative"});
  }
  for (std::size_t i = 0; i < plant.delta.size(); ++i) {
    if (!(plant.delta[i] >= 0.0) || !std::isfinite(plant.delta[i])) {
      report.push_back({"delta-negative", "delta[" + std::to_string(i) + "] must be non-negative"});
    }
  }
  for (std::size_t i = 0; i < plant.tau.size(); ++i) {
    if (!(plant.tau[i] >= 0.0) || !std::isfinite(plant.tau[i])) {
      report.push_back({"tau-negative", "tau[" + std::to_string(i) + "] must be non-negative"});
    }
  }
  const expr::Dims dims = plant.dims();
  check_exprs(report, "f_u", plant.f_u, static_cast<std::size_t>(n), dims);
  check_exprs(report, "f_g", plant.f_g, static_cast<std::size_t>(plant.D.cols()), dims);
  check_exprs(report, "f_L", plant.f_L, static_cast<std::size_t>(n), dims);
  for (std::size_t i = 0; i < plant.f_u.size(); ++i) {
    if (plant.f_u[i].references(expr::VarKind::State)) {
      report.push_back({"f_u-state", "f_u must not reference state (f_u[" + std::to_string(i) + "])"});
    }
  }
  return report;
}

ValidationReport validate(const PlantModel& plant, const ObserverParams& obs) {
  ValidationReport report = validate(plant);
  const Eigen::Index n = plant.A.rows();
  const Eigen::Index ny = plant.C.rows();
  check_shape(report, "G", obs.G, n, n);
  check_shape(report, "J", obs.J, n, ny);
  check_shape(report, "E", obs.E, n, ny);
  check_shape(report, "N", obs.N, n, ny);
  check_shape(report, "theta", obs.theta, ny, ny);
  if (obs.theta.rows() == ny && obs.theta.cols() == ny && obs.theta.allFinite()) {
    const double scale = std::max(1.0, numlin::max_abs(obs.theta));
    if (numlin::max_abs(obs.theta - obs.theta.transpose()) > 1e-12 * scale) {
      report.push_back({"theta-symmetry", "theta must be symmetric"});
    } else if (numlin::definiteness_margin(-obs.theta) > 1e-12 * scale) {
      report.push_back({"theta-psd", "theta must be positive semidefinite"});
    }
  }
  if (!(obs.alpha > 0.0) || !std::isfinite(obs.alpha)) {
    report.push_back({"alpha-positive", "alpha must be positive"});
  }
  return report;
}

ExampleSystem example_system() {
  auto row_major = [](Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> v) {
    Mat m(rows, cols);
    auto it = v.begin();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = *it++;
      }
    }
    return m;
  };

  ExampleSystem ex;
  PlantModel& nom = ex.nominal;
  nom.A = row_major(2, 2, {-2, -10, 0, -1});
  nom.C = row_major(1, 2, {1, 0});
  nom.D = row_major(2, 1, {-1, 1});
  nom.n_u = 1;
  nom.delta = {1.0};
  nom.tau = {};
  const expr::Dims d = nom.dims();
  nom.f_u = {expr::parse("u1@1", d), expr::parse("u1", d)};
  nom.f_L = {expr::parse("x1*cos(u1)", d), expr::parse("sin(x2)", d)};
  nom.f_g = {expr::parse("x2*x1", d)};

  PlantModel& unc = ex.uncertain;
  unc = nom;
  unc.A = row_major(2, 2, {-0.9, -8.9, 1.1, 0.1});
  unc.delta = {2.0};

  ex.certificate.P = row_major(2, 2, {59.0535, 1.7898, 1.7898, 17.8858});
  ex.certificate.multipliers = LipschitzMultiplier{100.0};
  ex.lipschitz = Lipschitz{1.0};

  ObserverParams& obs = ex.observer;
  obs.E = row_major(2, 1, {1, -1});
  obs.J = row_major(2, 1, {0, 9});
  obs.G = row_major(2, 2, {-10, 0, 1, -11});
  obs.theta = Mat::Identity(1, 1);
  obs.alpha = 1.0;
  obs.N = cert::cubic_gain(ex.certificate.P, nom.C, obs.theta, obs.alpha);
  return ex;
}

Config config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("<document>", "expected a JSON object");
  }
  const int n = read_dim(doc, "n");
  const int n_u = read_dim(doc, "n_u");
  const int n_y = read_dim(doc, "n_y");
  const int n_g = read_dim(doc, "n_g");
  if (n == 0 || n_y == 0) {
    throw ConfigError(n == 0 ? "n" : "n_y", "must be positive");
  }

  Config cfg;
  PlantModel& p = cfg.plant;
  p.A = read_matrix(field(doc, "A", ""), "A", n, n);
  p.C = read_matrix(field(doc, "C", ""), "C", n_y, n);
  p.D = n_g == 0 && field(doc, "D", "").empty() ? Mat(n, 0) : read_matrix(field(doc, "D", ""), "D", n, n_g);
  p.n_u = n_u;
  p.delta = read_delays(field(doc, "delta", ""), "delta");
  p.tau = read_delays(field(doc, "tau", ""), "tau");
  p.f_u = read_exprs(field(doc, "f_u", ""), "f_u", static_cast<std::size_t>(n), p.dims(false));
  p.f_g = read_exprs(field(doc, "f_g", ""), "f_g", static_cast<std::size_t>(n_g), p.dims());
  p.f_L = read_exprs(field(doc, "f_L", ""), "f_L", static_cast<std::size_t>(n), p.dims());

  const json& lip = field(doc, "lipschitz", "");
  if (lip.contains("gamma")) {
    const double gamma = read_number(lip.at("gamma"), "lipschitz.gamma");
    if (!(gamma > 0.0)) {
      throw ConfigError("lipschitz.gamma", "must be positive");
    }
    cfg.lipschitz = Lipschitz{gamma};
  } else if (lip.contains("rho")) {
    cfg.lipschitz = OneSidedLipschitz{read_number(field(lip, "rho", "lipschitz."), "lipschitz.rho"),
                                      read_number(field(lip, "a", "lipschitz."), "lipschitz.a"),
                                      read_number(field(lip, "b", "lipschitz."), "lipschitz.b")};
  } else {
    throw ConfigError("lipschitz", "expected {\"gamma\"} or {\"rho\",\"a\",\"b\"}");
  }

  if (doc.contains("observer")) {
    const json& o = doc.at("observer");
    ObserverParams obs;
    obs.G = read_matrix(field(o, "G", "observer."), "observer.G", n, n);
    obs.J = read_matrix(field(o, "J", "observer."), "observer.J", n, n_y);
    obs.E = read_matrix(field(o, "E", "observer."), "observer.E", n, n_y);
    obs.N = read_matrix(field(o, "N", "observer."), "observer.N", n, n_y);
    obs.theta = read_matrix(field(o, "theta", "observer."), "observer.theta", n_y, n_y);
    obs.alpha = read_number(field(o, "alpha", "observer."), "observer.alpha");
    for (const auto& v : validate(p, obs)) {
      throw ConfigError("observer." + v.name, v.message);
    }
    cfg.observer = std::move(obs);
  }

  if (doc.contains("certificate")) {
    const json& c = doc.at("certificate");
    Certificate cert;
    cert.P = read_matrix(field(c, "P", "certificate."), "certificate.P", n, n);
    if (c.contains("beta")) {
      const double beta = read_number(c.at("beta"), "certificate.beta");
      if (!(beta > 0.0)) {
        throw ConfigError("certificate.beta", "must be positive");
      }
      cert.multipliers = LipschitzMultiplier{beta};
    } else {
      const double mu1 = read_number(field(c, "mu1", "certificate."), "certificate.mu1");
      const double mu2 = read_number(field(c, "mu2", "certificate."), "certificate.mu2");
      if (!(mu1 > 0.0) || !(mu2 > 0.0)) {
        throw ConfigError("certificate", "mu1 and mu2 must be positive");
      }
      cert.multipliers = OneSidedMultipliers{mu1, mu2};
    }
    cfg.certificate = std::move(cert);
  }

  for (const auto& v : validate(p)) {
    throw ConfigError(v.name, v.message);
  }
  return cfg;
}

std::string config_to_json(const Config& cfg) {
  const PlantModel& p = cfg.plant;
  json doc;
  doc["n"] = p.n();
  doc["n_u"] = p.n_u;
  doc["n_y"] = p.n_y();
  doc["n_g"] = p.n_g();
  doc["A"] = write_matrix(p.A);
  doc["C"] = write_matrix(p.C);
  doc["D"] = write_matrix(p.D);
  doc["delta"] = p.delta;
  doc["tau"] = p.tau;
  doc["f_u"] = write_exprs(p.f_u);
  doc["f_g"] = write_exprs(p.f_g);
  doc["f_L"] = write_exprs(p.f_L);
  doc["lipschitz"] = std::visit(Overloaded{
                                    [](const Lipschitz& l) { return json{{"gamma", l.gamma}}; },
                                    [](const OneSidedLipschitz& o) {
                                      return json{{"rho", o.rho}, {"a", o.a}, {"b", o.b}};
                                    },
                                },
                                cfg.lipschitz);
  if (cfg.observer) {
    const ObserverParams& o = *cfg.observer;
    doc["observer"] = json{{"G", write_matrix(o.G)},         {"J", write_matrix(o.J)},
                           {"E", write_matrix(o.E)},         {"N", write_matrix(o.N)},
                           {"theta", write_matrix(o.theta)}, {"alpha", o.alpha}};
  }
  if (cfg.certificate) {
    const Certificate& c = *cfg.certificate;
    json cj{{"P", write_matrix(c.P)}};
    std::visit(Overloaded{
                   [&](const LipschitzMultiplier& m) { cj["beta"] = m.beta; },
                   [&](const OneSidedMultipliers& m) {
                     cj["mu1"] = m.mu1;
                     cj["mu2"] = m.mu2;
                   },
               },
               c.multipliers);
    doc["certificate"] = std::move(cj);
  }
  return doc.dump(2) + "\n";
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path.string(), "cannot open configuration file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError(path.string(), "cannot write configuration file");
  }
  out << config_to_json(cfg);
  if (!out) {
    throw ConfigError(path.string(), "write failed");
  }
}

Mat parse_matrix_literal(const std::string& text) {
  std::string body = text;
  const auto first = body.find_first_not_of(" \t");
  const auto last = body.find_last_not_of(" \t");
  if (first == std::string::npos || body[first] != '[' || body[last] != ']') {
    throw InvalidInput("matrix literal must look like [a b; c d], got '" + text + "'");
  }
  body = body.substr(first + 1, last - first - 1);
  std::vector<std::vector<double>> rows;
  std::stringstream rs(body);
  std::string row;
  while (std::getline(rs, row, ';')) {
    for (char& ch : row) {
      if (ch == ',') {
        ch = ' ';
      }
    }
    std::istringstream es(row);
    std::vector<double> vals;
    std::string tok;
    while (es >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v)) {
        throw InvalidInput("bad matrix entry '" + tok + "' in '" + text + "'");
      }
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty() || rows.front().empty()) {
    throw InvalidInput("empty matrix literal '" + text + "'");
  }
  const std::size_t cols = rows.front().size();
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw InvalidInput("ragged matrix literal '" + text + "'");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

bool structurally_equal(const PlantModel& a, const PlantModel& b) {
  auto same = [](const Mat& x, const Mat& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.A, b.A) && same(a.C, b.C) && same(a.D, b.D) && a.n_u == b.n_u &&
         a.delta == b.delta && a.tau == b.tau && a.f_u == b.f_u && a.f_g == b.f_g && a.f_L == b.f_L;
}

bool structurally_equal(const ObserverParams& a, const ObserverParams& b) {
  auto same = [](const Mat& x, const Mat& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.G, b.G) && same(a.J, b.J) && same(a.E, b.E) && same(a.N, b.N) &&
         same(a.theta, b.theta) && a.alpha == b.alpha;
}

}  // namespace cubic_observer
