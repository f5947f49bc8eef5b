#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "output.hpp"
#include "ratlanczos/ratlanczos.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ratlanczos;
using cli::CsvWriter;
using cli::jnum;

namespace {

constexpr const char* kOutDirEnv = "RATLANCZOS_OUT_DIR";

std::set<const CLI::Option*>& flag_options() {
  static std::set<const CLI::Option*> flags;
  return flags;
}

template <typename... Args>
CLI::Option* add_flag(CLI::App* app, Args&&... args) {
  CLI::Option* opt = app->add_flag(std::forward<Args>(args)...);
  flag_options().insert(opt);
  return opt;
}

struct Common {
  std::string out_dir;
  std::string name;
  double tol = 0.0;
  Index lag = 1;
  Index max_m = 50;
  std::string method = "lanczos";
  bool compare = false;
  std::string shifts = "default";
  bool cyclic = false;
  Index oracle_limit = 3000;
};

void add_common(CLI::App* app, Common& c, double tol, Index lag, Index max_m) {
  c.tol = tol;
  c.lag = lag;
  c.max_m = max_m;
  app->add_option("--out-dir", c.out_dir, "Output directory (default: $RATLANCZOS_OUT_DIR or ./out)");
  app->add_option("--name", c.name, "Stem of the output files (default: subcommand name)");
  app->add_option("--tol", c.tol, "Stopping tolerance")->capture_default_str();
  app->add_option("--lag", c.lag, "Stopping lag s")->capture_default_str();
  app->add_option("--max-m", c.max_m, "Maximum number of iterations")->capture_default_str();
  app->add_option("--method", c.method, "lanczos | arnoldi")
      ->check(CLI::IsMember({"lanczos", "arnoldi", "qless-lanczos", "rational-arnoldi"}))
      ->capture_default_str();
  add_flag(app, "--compare", c.compare, "Run both Q-less Lanczos and rational Arnoldi");
  app->add_option("--shifts", c.shifts, "Comma-separated poles (inf allowed) or 'default'")->capture_default_str();
  add_flag(app, "--cyclic", c.cyclic, "Cycle through the given poles");
  app->add_option("--oracle-limit", c.oracle_limit, "Largest n for dense oracles")->capture_default_str();
}

fs::path output_dir(const Common& c) {
  fs::path dir;
  if (!c.out_dir.empty()) {
    dir = c.out_dir;
  } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    dir = env;
  } else {
    dir = "out";
  }
  fs::create_directories(dir);
  return dir;
}

std::string stem(const Common& c, const std::string& sub) { return c.name.empty() ? sub : c.name; }

ShiftSequence parse_shifts(const std::string& text, bool cyclic) {
  if (text.empty() || text == "default") return {};
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw InvalidArgument("bad shift '" + tok + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw InvalidArgument("--shifts: no poles given");
  return ShiftSequence::from_values(vals, cyclic);
}

json shifts_json(const ShiftSequence& s) {
  json arr = json::array();
  for (const Shift& x : s.poles()) {
    if (x.is_infinite()) arr.push_back("inf");
    else arr.push_back(x.value());
  }
  return {{"poles", arr}, {"cyclic", s.cyclic()}};
}

std::vector<Method> methods(const Common& c) {
  if (c.compare) return {Method::qless_lanczos, Method::arnoldi};
  return {method_from_string(c.method)};
}

json config_echo(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string key = opt->get_lnames().front();
    if (key == "help") continue;
    if (flag_options().count(opt) != 0) {
      j[key] = opt->count() > 0 && opt->as<bool>();
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) j[key] = r.front();
      else j[key] = r;
    } else {
      j[key] = opt->get_default_str();
    }
  }
  return j;
}

json base_summary(const CLI::App* app, const std::string& cmd) {
  return {{"command", cmd}, {"status", "ok"}, {"config", config_echo(app)}};
}

/// u^T f(A) v from the dense eigendecomposition, or NaN above the size limit.
double dense_bilinear(const SparseSym& a, const Vector& u, const Vector& v, const ScalarFunction& f, Index limit) {
  if (a.size() > limit) return std::numeric_limits<double>::quiet_NaN();
  const SymEig e = sym_eig(a.to_dense());
  Vector fl(e.values.size());
  for (Index i = 0; i < fl.size(); ++i) {
    if (!f.in_domain(e.values(i))) throw DomainError("oracle: eigenvalue outside the domain of " + f.name, e.values(i));
    fl(i) = f(e.values(i));
  }
  return (e.vectors.transpose() * u).dot(fl.cwiseProduct(e.vectors.transpose() * v));
}

// ---------------------------------------------------------------- sources

struct MatrixSource {
  std::string matrix;
  bool normalize = false;
  std::string generator = "laplacian";
  Index nbar = 30;
  Index n = 900;
  double lam1 = 0.01, lamn = 100.0, rho = 0.45;
  double phi = 20.0, delta = 0.02;
  std::uint64_t points_seed = 1;
};

void add_matrix_source(CLI::App* app, MatrixSource& s) {
  app->add_option("--matrix", s.matrix, "Matrix Market file (symmetric)");
  add_flag(app, "--normalize", s.normalize, "Apply D^-1/2 A D^-1/2 - 2I to --matrix");
  app->add_option("--generator", s.generator, "laplacian | strakos | gp")
      ->check(CLI::IsMember({"laplacian", "strakos", "gp"}))
      ->capture_default_str();
  app->add_option("--nbar", s.nbar, "Grid size of the Laplacian")->capture_default_str();
  app->add_option("--n", s.n, "Size for strakos / gp")->capture_default_str();
  app->add_option("--lam1", s.lam1)->capture_default_str();
  app->add_option("--lamn", s.lamn)->capture_default_str();
  app->add_option("--rho", s.rho)->capture_default_str();
  app->add_option("--phi", s.phi, "GP precision parameter")->capture_default_str();
  app->add_option("--delta", s.delta, "GP neighbourhood radius")->capture_default_str();
  app->add_option("--points-seed", s.points_seed, "Seed of the GP point cloud")->capture_default_str();
}

SparseSym load_matrix(const MatrixSource& s) {
  if (!s.matrix.empty()) {
    const io::MtxData d = io::read_matrix_market(s.matrix);
    SparseSym a = io::to_sparse_sym(d);
    return s.normalize ? normalize_adjacency(a) : a;
  }
  if (s.generator == "laplacian") return laplacian2d(s.nbar);
  if (s.generator == "strakos") return strakos(s.n, s.lam1, s.lamn, s.rho);
  return gp_precision_matrix(uniform_points(s.n, s.points_seed), s.phi, s.delta);
}

// ---------------------------------------------------------------- biform

struct BiformArgs {
  Common common;
  MatrixSource source;
  std::string f = "exp";
  std::string strategy = "quadratic";
  std::string stopping = "iterate-difference";
  Index u_index = 1, v_index = 1;
  std::optional<std::uint64_t> random_seed;
};

int run_biform(const CLI::App* app, const BiformArgs& args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "biform");
  const SparseSym a = load_matrix(args.source);
  const Index n = a.size();
  Vector u, v;
  if (args.random_seed) {
    std::mt19937_64 gen(*args.random_seed);
    std::normal_distribution<double> nd;
    u.resize(n);
    v.resize(n);
    for (Index i = 0; i < n; ++i) u(i) = nd(gen);
    for (Index i = 0; i < n; ++i) v(i) = nd(gen);
    if (args.strategy == "quadratic") u = v;
  } else {
    if (args.u_index < 1 || args.u_index > n || args.v_index < 1 || args.v_index > n) {
      throw InvalidArgument("biform: --u-index/--v-index must lie in [1, n]");
    }
    u = Vector::Unit(n, args.u_index - 1);
    v = Vector::Unit(n, args.v_index - 1);
  }
  FormRequest req;
  req.f = ScalarFunction::by_name(args.f);
  req.strategy = form_strategy_from_string(args.strategy);
  req.stopping = stopping_rule_from_string(args.stopping);
  req.tol = c.tol;
  req.lag = c.lag;
  req.max_m = c.max_m;
  ShiftSequence shifts = parse_shifts(c.shifts, c.cyclic);
  if (shifts.empty()) shifts = default_shifts(a);
  const double oracle = dense_bilinear(a, u, v, req.f, c.oracle_limit);

  CsvWriter csv(dir / (base + ".csv"), "biform", {"method", "iteration", "value", "error", "bound"});
  json summary = base_summary(app, "biform");
  summary["n"] = n;
  summary["nnz"] = a.nnz();
  summary["shifts"] = shifts_json(shifts);
  summary["oracle"] = jnum(oracle);
  ShiftedSolverCache solver(a);
  for (Method m : methods(c)) {
    req.method = m;
    cli::Stopwatch t;
    const FormResult r = bilinear_form(a, u, v, shifts, req, solver);
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      csv.cell(to_string(m)).cell(static_cast<long long>(i + 1)).cell(r.history[i]);
      csv.cell(std::abs(r.history[i] - oracle)).cell(r.bound_history[i]);
      csv.end_row();
    }
    summary["runs"][to_string(m)] = {{"value", r.value},
                                     {"error", jnum(std::abs(r.value - oracle))},
                                     {"iterations", r.iterations},
                                     {"converged", r.converged},
                                     {"termination", to_string(r.termination)},
                                     {"wall_seconds", t.seconds()}};
    summary["final_value"] = r.value;
    summary["iterations"] = r.iterations;
    summary["termination"] = to_string(r.termination);
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "biform: value " << CsvWriter::number(summary["final_value"].get<double>()) << " after "
            << summary["iterations"].get<Index>() << " iterations -> " << (dir / (base + ".csv")).string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- trace

struct TraceArgs {
  Common common;
  MatrixSource source;
  std::string f = "log";
  Index probes = 1;
  Index p = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int run_trace(const CLI::App* app, TraceArgs args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "trace");
  const SparseSym a = load_matrix(args.source);
  TraceRequest req;
  req.f = ScalarFunction::by_name(args.f);
  req.num_probes = args.probes;
  req.block = args.p;
  req.seed = args.seed;
  req.shifts = parse_shifts(c.shifts, c.cyclic);
  if (req.shifts.empty()) req.shifts = default_shifts(a);
  req.tol = c.tol;
  req.lag = c.lag;
  req.max_m = c.max_m;
  req.threads = args.threads;

  double oracle = std::numeric_limits<double>::quiet_NaN();
  if (a.size() <= c.oracle_limit) {
    const SymEig e = sym_eig(a.to_dense());
    oracle = 0.0;
    for (Index i = 0; i < e.values.size(); ++i) oracle += req.f(e.values(i));
  }
  CsvWriter csv(dir / (base + ".csv"), "trace", {"method", "iteration", "estimate", "error"});
  json summary = base_summary(app, "trace");
  summary["n"] = a.size();
  summary["nnz"] = a.nnz();
  summary["shifts"] = shifts_json(req.shifts);
  summary["oracle"] = jnum(oracle);
  for (Method m : methods(c)) {
    req.method = m;
    cli::Stopwatch t;
    const TraceResult r = hutchinson_trace(a, req);
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      csv.cell(to_string(m)).cell(static_cast<long long>(i + 1)).cell(r.history[i]);
      csv.cell(std::abs(r.history[i] - oracle));
      csv.end_row();
    }
    const Index its = *std::max_element(r.iterations.begin(), r.iterations.end());
    json terms = json::array();
    for (Termination t : r.terminations) terms.push_back(to_string(t));
    summary["runs"][to_string(m)] = {{"estimate", r.estimate},
                                     {"stderr", r.stderr_},
                                     {"error", jnum(std::abs(r.estimate - oracle))},
                                     {"iterations", its},
                                     {"group_iterations", r.iterations},
                                     {"group_terminations", terms},
                                     {"converged", r.converged},
                                     {"wall_seconds", t.seconds()}};
    summary["final_value"] = r.estimate;
    summary["iterations"] = its;
    summary["termination"] = terms.size() == 1 ? terms.front() : json(r.converged ? "converged" : "mixed");
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "trace: estimate " << CsvWriter::number(summary["final_value"].get<double>()) << " in "
            << summary["iterations"].get<Index>() << " iterations -> " << (dir / (base + ".csv")).string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- control

struct SystemSource {
  std::string system;
  std::string generator = "pair";
  Index nbar = 30;
};

void add_system_source(CLI::App* app, SystemSource& s, const std::string& default_generator) {
  s.generator = default_generator;
  app->add_option("--system", s.system, "System descriptor file");
  app->add_option("--generator", s.generator, "pair (2x2 analytic system) | laplacian")
      ->check(CLI::IsMember({"pair", "laplacian"}))
      ->capture_default_str();
  app->add_option("--nbar", s.nbar, "Grid size of the Laplacian system")->capture_default_str();
}

LtiSystem load_system(const SystemSource& s, std::optional<ParametricIO>* param = nullptr) {
  if (!s.system.empty()) {
    io::SystemDescriptor d = io::read_system_descriptor(s.system);
    if (param != nullptr) *param = d.param;
    return d.sys;
  }
  if (s.generator == "pair") {
    LtiSystem sys;
    sys.A = SparseSym::diagonal(Vector::LinSpaced(2, -1.0, -2.0), Definiteness::negative);
    sys.B = Vector::Unit(2, 0);
    sys.C = Vector::Unit(2, 0).transpose();
    sys.x0 = Vector::Ones(2);
    return sys;
  }
  return laplacian_lqr_system(s.nbar);
}

ControlOptions control_options(const Common& c) {
  ControlOptions o;
  o.tol = c.tol;
  o.lag = c.lag;
  o.max_m = c.max_m;
  return o;
}

/// ||Sigma||_{H2} from the dense controllability Gramian after the mass transform.
double dense_h2(const LtiSystem& sys_in, Index limit) {
  if (sys_in.n() > limit) return std::numeric_limits<double>::quiet_NaN();
  const LtiSystem sys = mass_transform(sys_in);
  const Matrix p = lyap_sym(sys.A.to_dense(), sys.B * sys.B.transpose());
  return std::sqrt(std::max(0.0, (sys.C * p * sys.C.transpose()).trace()));
}

void h2_rows(CsvWriter& csv, Method m, const H2Result& r, double oracle) {
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const double change = i < r.change_history.size() ? r.change_history[i] : std::numeric_limits<double>::quiet_NaN();
    csv.cell(to_string(m)).cell(static_cast<long long>(i + 1)).cell(r.history[i]).cell(change);
    csv.cell(std::abs(r.history[i] - oracle));
    csv.end_row();
  }
}

json h2_json(const H2Result& r, double oracle, double seconds) {
  return {{"norm", r.norm},
          {"error", jnum(std::abs(r.norm - oracle))},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"termination", to_string(r.termination)},
          {"seed", r.seed},
          {"warnings", r.warnings},
          {"wall_seconds", seconds}};
}

struct H2Args {
  Common common;
  SystemSource source;
};

int run_h2(const CLI::App* app, const H2Args& args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "h2");
  const LtiSystem sys = load_system(args.source);
  ShiftSequence shifts = parse_shifts(c.shifts, c.cyclic);
  if (shifts.empty()) shifts = default_shifts(mass_transform(sys).A);
  const double oracle = dense_h2(sys, c.oracle_limit);
  CsvWriter csv(dir / (base + ".csv"), "h2", {"method", "iteration", "norm", "change", "error"});
  json summary = base_summary(app, "h2");
  summary["n"] = sys.n();
  summary["shifts"] = shifts_json(shifts);
  summary["oracle"] = jnum(oracle);
  for (Method m : methods(c)) {
    ControlOptions o = control_options(c);
    o.method = m;
    cli::Stopwatch t;
    const H2Result r = h2_norm(sys, shifts, o);
    h2_rows(csv, m, r, oracle);
    summary["runs"][to_string(m)] = h2_json(r, oracle, t.seconds());
    summary["final_value"] = r.norm;
    summary["iterations"] = r.iterations;
    summary["termination"] = to_string(r.termination);
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "h2: norm " << CsvWriter::number(summary["final_value"].get<double>()) << " after "
            << summary["iterations"].get<Index>() << " iterations -> " << (dir / (base + ".csv")).string() << "\n";
  return 0;
}

struct H2ParamArgs {
  Common common;
  SystemSource source;
  Index nodes = 5;
  double mu0 = 0.0, mu1 = 1.0;
};

/// Default parametric family on the Laplacian: B(mu) = B1 + mu B2.
ParametricIO default_parametric(const LtiSystem& sys, Index nbar, const H2ParamArgs& args) {
  ParametricIO pio;
  pio.B1 = sys.B;
  pio.B2 = indicator(nbar, {0.4, 0.6, 0.4, 0.6});
  pio.b = [](double mu) { return Matrix::Constant(1, 1, mu); };
  pio.C1 = sys.C;
  const Index k = std::max<Index>(args.nodes, 2);
  const double h = (args.mu1 - args.mu0) / static_cast<double>(k - 1);
  for (Index i = 0; i < k; ++i) {
    pio.nodes.push_back(args.mu0 + h * static_cast<double>(i));
    pio.weights.push_back(i == 0 || i == k - 1 ? 0.5 * h : h);
  }
  return pio;
}

double dense_h2_param(const SparseSym& a, const ParametricIO& pio, Index limit) {
  if (a.size() > limit) return std::numeric_limits<double>::quiet_NaN();
  const Matrix ad = a.to_dense();
  double total = 0.0;
  for (std::size_t i = 0; i < pio.nodes.size(); ++i) {
    Matrix b = pio.B1;
    if (pio.B2.size() != 0) b += pio.B2 * pio.b(pio.nodes[i]);
    Matrix cm = pio.C1;
    if (pio.C2.size() != 0 && pio.c) cm += pio.c(pio.nodes[i]) * pio.C2;
    const Matrix p = lyap_sym(ad, b * b.transpose());
    total += pio.weights[i] * (cm * p * cm.transpose()).trace();
  }
  return std::sqrt(total);
}

int run_h2param(const CLI::App* app, const H2ParamArgs& args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "h2param");
  SystemSource src = args.source;
  std::optional<ParametricIO> param;
  LtiSystem sys;
  if (!src.system.empty()) {
    sys = load_system(src, &param);
    if (!param) throw InvalidArgument("h2param: descriptor has no parametric blocks (nodes/weights)");
    if (sys.E.size() != 0) throw InvalidArgument("h2param: mass matrices are not supported for parametric systems");
  } else {
    src.generator = "laplacian";
    sys = load_system(src);
    param = default_parametric(sys, src.nbar, args);
  }
  ShiftSequence shifts = parse_shifts(c.shifts, c.cyclic);
  if (shifts.empty()) shifts = default_shifts(sys.A);
  const double oracle = dense_h2_param(sys.A, *param, c.oracle_limit);
  CsvWriter csv(dir / (base + ".csv"), "h2param", {"method", "iteration", "norm", "change", "error"});
  json summary = base_summary(app, "h2param");
  summary["n"] = sys.n();
  summary["nodes"] = param->nodes;
  summary["weights"] = param->weights;
  summary["shifts"] = shifts_json(shifts);
  summary["oracle"] = jnum(oracle);
  for (Method m : methods(c)) {
    ControlOptions o = control_options(c);
    o.method = m;
    cli::Stopwatch t;
    const H2Result r = h2_param_norm(sys.A, *param, shifts, o);
    h2_rows(csv, m, r, oracle);
    summary["runs"][to_string(m)] = h2_json(r, oracle, t.seconds());
    summary["final_value"] = r.norm;
    summary["iterations"] = r.iterations;
    summary["termination"] = to_string(r.termination);
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "h2param: norm " << CsvWriter::number(summary["final_value"].get<double>()) << " after "
            << summary["iterations"].get<Index>() << " iterations -> " << (dir / (base + ".csv")).string() << "\n";
  return 0;
}

struct LqrArgs {
  Common common;
  SystemSource source;
  std::vector<double> times{0.0, 0.1, 1.0};
};

int run_lqr(const CLI::App* app, const LqrArgs& args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "lqr");
  const LtiSystem sys = load_system(args.source);
  ShiftSequence shifts = parse_shifts(c.shifts, c.cyclic);
  if (shifts.empty()) shifts = default_shifts(mass_transform(sys).A);
  CsvWriter csv(dir / (base + ".csv"), "lqr", {"method", "iteration", "metric"});
  CsvWriter ucsv(dir / (base + "_control.csv"), "lqr-control", {"method", "t", "component", "u"});
  json summary = base_summary(app, "lqr");
  summary["n"] = sys.n();
  summary["shifts"] = shifts_json(shifts);
  std::vector<std::vector<Vector>> controls;
  for (Method m : methods(c)) {
    ControlOptions o = control_options(c);
    o.method = m;
    cli::Stopwatch t;
    const LqrResult r = lqr_reduce(sys, shifts, o);
    for (std::size_t i = 0; i < r.metric_history.size(); ++i) {
      csv.cell(to_string(m)).cell(static_cast<long long>(i + 1)).cell(r.metric_history[i]);
      csv.end_row();
    }
    std::vector<Vector> us;
    json ujs = json::array();
    for (double tt : args.times) {
      const Vector u = eval_control(r.controller, tt);
      for (Index k = 0; k < u.size(); ++k) {
        ucsv.cell(to_string(m)).cell(tt).cell(static_cast<long long>(k + 1)).cell(u(k));
        ucsv.end_row();
      }
      us.push_back(u);
      ujs.push_back({{"t", tt}, {"u", std::vector<double>(u.data(), u.data() + u.size())}});
    }
    controls.push_back(us);
    summary["runs"][to_string(m)] = {{"iterations", r.iterations},
                                     {"converged", r.converged},
                                     {"termination", to_string(r.termination)},
                                     {"final_metric", r.metric_history.empty() ? json(nullptr) : jnum(r.metric_history.back())},
                                     {"closed_loop_abscissa", jnum(closed_loop_abscissa(r.controller))},
                                     {"control", ujs},
                                     {"warnings", r.warnings},
                                     {"wall_seconds", t.seconds()}};
    summary["iterations"] = r.iterations;
    summary["termination"] = to_string(r.termination);
    summary["final_value"] = r.metric_history.empty() ? json(nullptr) : jnum(r.metric_history.back());
  }
  if (controls.size() == 2) {
    json diff = json::array();
    for (std::size_t i = 0; i < args.times.size(); ++i) {
      const double den = controls[1][i].norm();
      const double rel = den > 0.0 ? (controls[0][i] - controls[1][i]).norm() / den : (controls[0][i] - controls[1][i]).norm();
      diff.push_back({{"t", args.times[i]}, {"relative_difference", rel}});
    }
    summary["lanczos_vs_arnoldi"] = diff;
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "lqr: " << summary["iterations"].get<Index>() << " iterations, termination "
            << summary["termination"].get<std::string>() << " -> " << (dir / (base + ".csv")).string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- fpa

struct FpaArgs {
  Common common;
  Index n = 900;
  double lam1 = 0.01, lamn = 100.0, rho = 0.45;
  Index steps = 30;
  std::string f = "sqrt";
  std::uint64_t seed = 1;
};

int run_fpa(const CLI::App* app, const FpaArgs& args) {
  cli::Stopwatch clock;
  const Common& c = args.common;
  const fs::path dir = output_dir(c);
  const std::string base = stem(c, "fpa");
  const Vector lam = strakos_spectrum(args.n, args.lam1, args.lamn, args.rho);
  const SparseSym a = SparseSym::diagonal(lam, Definiteness::positive);
  const ScalarFunction f = ScalarFunction::by_name(args.f);
  std::mt19937_64 gen(args.seed);
  std::normal_distribution<double> nd;
  Vector v(args.n);
  for (Index i = 0; i < args.n; ++i) v(i) = nd(gen);
  v.normalize();
  Vector flam(args.n);
  for (Index i = 0; i < args.n; ++i) flam(i) = f(lam(i));
  const double exact = v.cwiseProduct(v).dot(flam);
  ShiftSequence shifts = parse_shifts(c.shifts, c.cyclic);
  if (shifts.empty()) shifts = default_shifts(a);

  CsvWriter csv(dir / (base + ".csv"), "fpa",
                {"method", "iteration", "orth_loss", "ritz_value", "ritz_residual", "component_product", "quad_value",
                 "quad_error", "true_error"});
  CsvWriter comp(dir / (base + "_components.csv"), "fpa-components",
                 {"method", "ell", "abs_fJe1", "abs_q1Q", "product"});
  json summary = base_summary(app, "fpa");
  summary["n"] = args.n;
  summary["exact"] = exact;
  summary["shifts"] = shifts_json(shifts);
  for (Method m : methods(c)) {
    cli::Stopwatch t;
    Matrix q, j;
    Index steps = 0;
    std::string term;
    if (m == Method::qless_lanczos) {
      LanczosOptions lo;
      lo.retain_basis = true;
      const LanczosResult r = run(a, v, shifts, std::min<Index>(args.steps, args.n), lo);
      q = r.basis;
      j = r.J;
      steps = r.steps;
      term = to_string(r.termination);
    } else {
      const ArnoldiResult r = arnoldi_run(a, v, shifts, std::min<Index>(args.steps, args.n));
      q = r.Q;
      j = r.J;
      steps = r.steps;
      term = to_string(r.termination);
    }
    double max_product = 0.0, final_error = 0.0, max_orth = 0.0;
    for (Index k = 1; k <= steps; ++k) {
      const Matrix qk = q.leftCols(k);
      const Matrix jk = j.topLeftCorner(k, k);
      const Matrix fj = dense_matfun(jk, f);
      const RitzPair rp = largest_ritz(a, qk, jk);
      const double prod = component_products(qk, jk, f).maxCoeff();
      const double quad = fj(0, 0);
      const double true_val = (qk.transpose() * qk.col(0)).dot(fj.col(0));
      const double ol = orth_loss(qk);
      csv.cell(to_string(m)).cell(static_cast<long long>(k)).cell(ol).cell(rp.value).cell(rp.residual);
      csv.cell(prod).cell(quad).cell(std::abs(quad - exact)).cell(std::abs(true_val - exact));
      csv.end_row();
      max_product = prod;
      final_error = std::abs(quad - exact);
      max_orth = std::max(max_orth, ol);
    }
    const Matrix qk = q.leftCols(steps);
    const Matrix jk = j.topLeftCorner(steps, steps);
    const Vector fe1 = dense_matfun(jk, f).col(0);
    const Vector inner = qk.transpose() * qk.col(0);
    for (Index l = 0; l < steps; ++l) {
      comp.cell(to_string(m)).cell(static_cast<long long>(l + 1)).cell(std::abs(fe1(l))).cell(std::abs(inner(l)));
      comp.cell(std::abs(fe1(l)) * std::abs(inner(l)));
      comp.end_row();
    }
    summary["runs"][to_string(m)] = {{"iterations", steps},
                                     {"termination", term},
                                     {"final_quad_error", final_error},
                                     {"final_component_product", max_product},
                                     {"max_orth_loss", max_orth},
                                     {"wall_seconds", t.seconds()}};
    summary["iterations"] = steps;
    summary["termination"] = term;
    summary["final_value"] = final_error;
  }
  summary["wall_seconds"] = clock.seconds();
  cli::write_json(dir / (base + ".json"), summary);
  std::cout << "fpa: " << summary["iterations"].get<Index>() << " iterations, final error "
            << CsvWriter::number(summary["final_value"].get<double>()) << " -> " << (dir / (base + ".csv")).string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- normalize

struct NormalizeArgs {
  std::string input, output;
  bool symmetric = false;
};

int run_normalize(const NormalizeArgs& args) {
  io::MtxData d = io::read_matrix_market(args.input);
  if (d.rows != d.cols) throw DimensionError("normalize: matrix is not square");
  std::vector<Triplet> entries = d.entries;
  if (args.symmetric && d.symmetry == io::MtxSymmetry::general) {
    entries.clear();
    for (const Triplet& t : d.entries) {
      entries.emplace_back(t.row(), t.col(), 0.5 * t.value());
      entries.emplace_back(t.col(), t.row(), 0.5 * t.value());
    }
  }
  const SparseSym a = SparseSym::from_triplets(d.rows, entries);
  const SparseSym out = normalize_adjacency(a);
  io::write_matrix_market_file(args.output, out);
  std::cout << "normalize: wrote " << args.output << " (n = " << out.size() << ", nnz = " << out.nnz() << ")\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::vector<std::string> configs;
  unsigned workers = 2;
  std::string out_dir;
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) out += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
  return out + "'";
}

int run_sweep(const SweepArgs& args, const std::string& self) {
  Common probe;
  probe.out_dir = args.out_dir;
  const fs::path root = output_dir(probe);
  std::vector<int> codes(args.configs.size(), -1);
  std::atomic<std::size_t> next{0};
  std::mutex print;
  auto worker = [&] {
    for (std::size_t i = next++; i < args.configs.size(); i = next++) {
      const fs::path cfg = args.configs[i];
      const fs::path out = root / cfg.stem();
      fs::create_directories(out);
      const std::string cmd = shell_quote(self) + " --config " + shell_quote(cfg.string()) + " --out-dir " +
                              shell_quote(out.string()) + " > " + shell_quote((out / "log.txt").string()) + " 2>&1";
      const int rc = std::system(cmd.c_str());
      codes[i] = rc;
      std::lock_guard<std::mutex> lock(print);
      std::cout << "sweep: " << cfg.string() << " -> " << out.string() << (rc == 0 ? " ok" : " FAILED") << "\n";
    }
  };
  std::vector<std::thread> pool;
  const unsigned used = std::max(1u, std::min<unsigned>(args.workers, static_cast<unsigned>(args.configs.size())));
  for (unsigned t = 0; t < used; ++t) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  json summary = {{"command", "sweep"}, {"workers", used}};
  int failures = 0;
  for (std::size_t i = 0; i < args.configs.size(); ++i) {
    summary["runs"].push_back({{"config", args.configs[i]}, {"exit_code", codes[i]}});
    if (codes[i] != 0) ++failures;
  }
  summary["status"] = failures == 0 ? "ok" : "error";
  cli::write_json(root / "sweep.json", summary);
  return failures == 0 ? 0 : 1;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const IndefiniteShiftError*>(&e)) return "IndefiniteShiftError";
  if (dynamic_cast<const RankDeficiencyError*>(&e)) return "RankDeficiencyError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const InstabilityError*>(&e)) return "InstabilityError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const OverflowError*>(&e)) return "OverflowError";
  if (dynamic_cast<const SingularPivotError*>(&e)) return "SingularPivotError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "Error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rational Krylov (Q-less Lanczos / rational Arnoldi) experiments for matrix functions and control"};
  app.set_config("--config", "", "INI/TOML configuration file; subcommand options go in a [subcommand] section");
  app.require_subcommand(1);
  std::string top_out;
  app.add_option("--out-dir", top_out, "Output directory; overrides any value from --config");

  BiformArgs biform;
  CLI::App* s_biform = app.add_subcommand("biform", "Bilinear form u^T f(A) v");
  add_common(s_biform, biform.common, 1e-10, 1, 50);
  add_matrix_source(s_biform, biform.source);
  s_biform->add_option("--f", biform.f, "exp | log | sqrt | inv | identity")->capture_default_str();
  s_biform->add_option("--strategy", biform.strategy, "quadratic | polarization | oblique | block2x2")
      ->capture_default_str();
  s_biform->add_option("--stopping", biform.stopping, "iterate-difference | residual-bound | both")
      ->capture_default_str();
  s_biform->add_option("--u-index", biform.u_index, "u = e_i (1-based)")->capture_default_str();
  s_biform->add_option("--v-index", biform.v_index, "v = e_j (1-based)")->capture_default_str();
  s_biform->add_option("--random-vectors", biform.random_seed, "Use seeded Gaussian u, v instead of unit vectors");

  TraceArgs trace;
  trace.source.generator = "gp";
  trace.source.n = 1000;
  CLI::App* s_trace = app.add_subcommand("trace", "Hutchinson estimate of tr f(A) (default: log-det of a GP precision matrix)");
  add_common(s_trace, trace.common, 1e-10, 1, 50);
  add_matrix_source(s_trace, trace.source);
  s_trace->add_option("--f", trace.f, "Scalar function")->capture_default_str();
  s_trace->add_option("--probes", trace.probes, "Number of probe groups")->capture_default_str();
  s_trace->add_option("--p", trace.p, "Probes per group (block size)")->capture_default_str();
  s_trace->add_option("--seed", trace.seed, "Probe seed")->capture_default_str();
  s_trace->add_option("--threads", trace.threads, "Worker threads over probe groups")->capture_default_str();

  H2Args h2;
  CLI::App* s_h2 = app.add_subcommand("h2", "H2 norm via projected Lyapunov equations");
  add_common(s_h2, h2.common, 1e-10, 1, 100);
  add_system_source(s_h2, h2.source, "pair");

  H2ParamArgs h2p;
  CLI::App* s_h2p = app.add_subcommand("h2param", "H2 x L2 norm of an affinely parametrized system");
  add_common(s_h2p, h2p.common, 1e-10, 1, 100);
  add_system_source(s_h2p, h2p.source, "laplacian");
  s_h2p->add_option("--nodes", h2p.nodes, "Trapezoid nodes for the generated family")->capture_default_str();
  s_h2p->add_option("--mu0", h2p.mu0)->capture_default_str();
  s_h2p->add_option("--mu1", h2p.mu1)->capture_default_str();

  LqrArgs lqr;
  CLI::App* s_lqr = app.add_subcommand("lqr", "Reduced LQR feedback via projected Riccati equations");
  add_common(s_lqr, lqr.common, 1e-8, 4, 100);
  add_system_source(s_lqr, lqr.source, "laplacian");
  s_lqr->add_option("--times", lqr.times, "Times at which u_m(t) is reported")->delimiter(',')->capture_default_str();

  FpaArgs fpa;
  CLI::App* s_fpa = app.add_subcommand("fpa", "Finite-precision study on the Strakos matrix");
  add_common(s_fpa, fpa.common, 1e-10, 1, 50);
  s_fpa->add_option("--n", fpa.n)->capture_default_str();
  s_fpa->add_option("--lam1", fpa.lam1)->capture_default_str();
  s_fpa->add_option("--lamn", fpa.lamn)->capture_default_str();
  s_fpa->add_option("--rho", fpa.rho)->capture_default_str();
  s_fpa->add_option("--steps", fpa.steps, "Iterations j")->capture_default_str();
  s_fpa->add_option("--f", fpa.f)->capture_default_str();
  s_fpa->add_option("--seed", fpa.seed, "Seed of the start vector")->capture_default_str();

  NormalizeArgs norm;
  CLI::App* s_norm = app.add_subcommand("normalize", "Write D^-1/2 A D^-1/2 - 2I of an adjacency matrix");
  s_norm->add_option("input", norm.input, "Input Matrix Market file")->required();
  s_norm->add_option("output", norm.output, "Output Matrix Market file")->required();
  add_flag(s_norm, "--symmetric", norm.symmetric, "Symmetrize a general input as (A + A^T)/2");

  SweepArgs sweep;
  CLI::App* s_sweep = app.add_subcommand("sweep", "Run several config files on a worker pool");
  s_sweep->add_option("configs", sweep.configs, "Config files")->required();
  s_sweep->add_option("--workers", sweep.workers, "Parallel workers")->capture_default_str();
  s_sweep->add_option("--out-dir", sweep.out_dir, "Root output directory; each config gets a subdirectory");

  for (CLI::App* sub : {s_biform, s_trace, s_h2, s_h2p, s_lqr, s_fpa, s_norm}) sub->configurable();

  CLI11_PARSE(app, argc, argv);

  for (Common* c : {&biform.common, &trace.common, &h2.common, &h2p.common, &lqr.common, &fpa.common})
    if (!top_out.empty()) c->out_dir = top_out;

  CLI::App* active = nullptr;
  std::string name;
  Common* common = nullptr;
  try {
    if (s_biform->parsed()) {
      active = s_biform, name = "biform", common = &biform.common;
      return run_biform(s_biform, biform);
    }
    if (s_trace->parsed()) {
      active = s_trace, name = "trace", common = &trace.common;
      return run_trace(s_trace, trace);
    }
    if (s_h2->parsed()) {
      active = s_h2, name = "h2", common = &h2.common;
      return run_h2(s_h2, h2);
    }
    if (s_h2p->parsed()) {
      active = s_h2p, name = "h2param", common = &h2p.common;
      return run_h2param(s_h2p, h2p);
    }
    if (s_lqr->parsed()) {
      active = s_lqr, name = "lqr", common = &lqr.common;
      return run_lqr(s_lqr, lqr);
    }
    if (s_fpa->parsed()) {
      active = s_fpa, name = "fpa", common = &fpa.common;
      return run_fpa(s_fpa, fpa);
    }
    if (s_norm->parsed()) return run_normalize(norm);
    if (s_sweep->parsed()) {
      std::error_code ec;
      fs::path self = fs::read_symlink("/proc/self/exe", ec);
      if (ec) self = fs::absolute(argv[0]);
      return run_sweep(sweep, self.string());
    }
  } catch (const std::exception& e) {
    json err = {{"command", name}, {"status", "error"}, {"error", error_type(e)}, {"message", e.what()}};
    if (active != nullptr) err["config"] = config_echo(active);
    std::cerr << err.dump() << "\n";
    if (common != nullptr) {
      try {
        cli::write_json(output_dir(*common) / (stem(*common, name) + ".json"), err);
      } catch (...) {
      }
    }
    return 1;
  }
  return 0;
}
