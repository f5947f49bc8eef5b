// Acceptance checks: one PASS/FAIL line per criterion.
// Usage: ratlanczos_acceptance [cli-executable configs-dir work-dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include "test_util.hpp"

using namespace ratlanczos;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " -- " << detail << std::endl;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double spectral_norm(const Matrix& a) { return sym_eig(a).values.cwiseAbs().maxCoeff(); }

// 1. ||J_m - Q_m^T A Q_m||_max <= 1e-10 ||A||_2 on 100 random instances, scalar and block.
void criterion_qless() {
  std::mt19937_64 gen(1001);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0, worst_block = 0.0, worst_block_orth = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = 110 + static_cast<Index>(gen() % 191);
    const Index m = 5 + static_cast<Index>(gen() % 21);
    const Index p = 1 + static_cast<Index>(gen() % 4);
    const Matrix a = random_spd(gen, n, 1e-2, 1e2);
    const SparseSym s = sparse(a, Definiteness::positive);
    const double anorm = spectral_norm(a);
    std::vector<double> poles;
    std::uniform_real_distribution<double> ud(std::log(1e-2), std::log(1e2));
    for (Index i = 0; i < m; ++i) poles.push_back(gen() % 5 == 0 ? std::numeric_limits<double>::infinity() : -std::exp(ud(gen)));
    const ShiftSequence xi = ShiftSequence::from_values(poles);
    ShiftedSolverCache solver(s);

    LanczosOptions lo;
    lo.retain_basis = true;
    const LanczosResult r = run(s, random_vector(gen, n), xi, m, lo, solver);
    const Matrix q = r.basis.leftCols(r.steps);
    worst = std::max(worst, max_abs(r.J - q.transpose() * a * q) / anorm);

    BlockLanczosOptions bo;
    bo.retain_basis = true;
    const BlockLanczosResult b = block_run(s, random_matrix(gen, n, p), xi, m, bo, solver);
    const Index k = b.steps * b.block_size;
    const Matrix qb = b.basis.leftCols(k);
    const double dev = max_abs(b.J - qb.transpose() * a * qb) / anorm;
    if (dev > worst_block) {
      worst_block = dev;
      worst_block_orth = orth_loss(qb);
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-10 && worst_block <= 1e-10 && secs < 30.0, "Q-less correctness",
         "max ||J - Q^T A Q||_max / ||A|| scalar " + fmt(worst) + ", block " + fmt(worst_block) + " (tol 1e-10; orth loss of that basis " +
             fmt(worst_block_orth) + "), " +
             fmt(secs) + " s (limit 30)");
}

Matrix poly_eval(const Vector& coef, const Matrix& x) {
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (Index d = coef.size() - 1; d >= 0; --d) acc = acc * x + coef(d) * Matrix::Identity(x.rows(), x.cols());
  return acc;
}

Matrix denom_inverse(const ShiftSequence& xi, Index k, const Matrix& x) {
  const Index n = x.rows();
  Matrix out = Matrix::Identity(n, n);
  for (Index i = 1; i <= k; ++i) out = out * (Matrix::Identity(n, n) - x * xi.at(i).inverse());
  return out.inverse();
}

// 2. v^T p(A) q(A)^{-2} v = ||v||^2 e_1^T p(J) q(J)^{-2} e_1 for deg p <= 2m - 1.
void criterion_moments() {
  std::mt19937_64 gen(1002);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = 20 + static_cast<Index>(gen() % 41);
    const Index m = 2 + static_cast<Index>(gen() % 5);
    const Matrix a = random_spd(gen, n, 0.1, 2.0);
    const Vector v = random_vector(gen, n);
    const ShiftSequence xi = random_negative_shifts(gen, m, 0.2, 5.0);
    const LanczosResult r = run(sparse(a, Definiteness::positive), v, xi, m);
    const Matrix qa = denom_inverse(xi, m - 1, a);
    const Matrix qj = denom_inverse(xi, m - 1, r.J);
    for (int k = 0; k < 10; ++k) {
      const Vector coef = random_vector(gen, 2 * m);
      const double lhs = v.dot(poly_eval(coef, a) * qa * qa * v);
      const double rhs = v.squaredNorm() * (poly_eval(coef, r.J) * qj * qj)(0, 0);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst <= 1e-8 && secs < 10.0, "moment matching",
         "max relative deviation " + fmt(worst) + " over 500 polynomials (tol 1e-8), " + fmt(secs) + " s (limit 10)");
}

// 3. Residual bound >= true residual at every step, f = exp, tau = 1.
void criterion_bound() {
  std::mt19937_64 gen(1003);
  int violations = 0, checks = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = 40 + static_cast<Index>(gen() % 61);
    const Index m = 4 + static_cast<Index>(gen() % 17);
    const Matrix a = -random_spd(gen, n, 0.05, 30.0);
    const SparseSym s = sparse(a, Definiteness::negative);
    const Vector v = random_vector(gen, n);
    std::vector<double> poles;
    std::uniform_real_distribution<double> ud(std::log(0.05), std::log(30.0));
    for (Index i = 0; i < m; ++i) poles.push_back(std::exp(ud(gen)));
    const ShiftSequence xi = inst % 2 == 0 ? ShiftSequence::from_values(poles) : default_shifts(s);
    const double a_norm = spectral_norm(a);
    ShiftedSolverCache solver(s);
    LanczosOptions opts;
    opts.retain_basis = true;
    RationalLanczos lz(s, v, solver, opts, m);
    for (Index j = 1; j <= m; ++j) {
      if (!lz.step(xi.at(j))) break;
      const double bound = residual_bound(lz, ScalarFunction::exp(), 1.0, a_norm);
      const double truth = true_residual(s, lz.basis(), lz.projected(), lz.start_factor(), ScalarFunction::exp(), 1.0);
      ++checks;
      if (bound < truth) ++violations;
      if (truth > 0.0) min_ratio = std::min(min_ratio, bound / truth);
    }
  }
  report(3, violations == 0, "residual bound domination",
         std::to_string(violations) + " violations in " + std::to_string(checks) + " steps, min bound/true " +
             fmt(min_ratio));
}

// 4. All-infinite poles reproduce the classical three-term Lanczos coefficients.
void criterion_polynomial() {
  std::mt19937_64 gen(1004);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = 30 + static_cast<Index>(gen() % 71);
    const Index m = 3 + static_cast<Index>(gen() % 10);
    const Matrix a = random_spd(gen, n, 0.1, 10.0);
    const double anorm = spectral_norm(a);
    const Vector v = random_vector(gen, n);
    const LanczosResult r = run(sparse(a, Definiteness::positive), v, ShiftSequence::all_infinite(static_cast<std::size_t>(m)), m);
    Vector q_prev = Vector::Zero(n), q = v.normalized();
    double b_prev = 0.0;
    for (Index j = 0; j < r.steps; ++j) {
      Vector w = a * q - b_prev * q_prev;
      const double al = q.dot(w);
      w -= al * q;
      const double be = w.norm();
      worst = std::max(worst, std::abs(r.alpha[static_cast<std::size_t>(j)] - al) / anorm);
      worst = std::max(worst, std::abs(r.beta[static_cast<std::size_t>(j + 1)] - be) / anorm);
      q_prev = q;
      q = w / be;
      b_prev = be;
    }
  }
  report(4, worst <= 1e-12, "polynomial-limit degeneration",
         "max |coefficient difference| / ||A|| " + fmt(worst) + " (tol 1e-12)");
}

// 5. GP log-det: Krylov error below the sampling error within 6 +- 2 iterations
// and final error vs dense log-det within 3 stderr.
void criterion_trace() {
  const auto t0 = std::chrono::steady_clock::now();
  const SparseSym a = gp_precision_matrix(uniform_points(1000, 1), 20.0, 0.02);
  TraceRequest req;
  req.f = ScalarFunction::log();
  req.num_probes = 1;
  req.block = 20;
  req.seed = 0;
  req.tol = 1e-10;
  req.max_m = 50;
  const TraceResult r = hutchinson_trace(a, req);
  const double secs = seconds_since(t0);
  const SymEig e = sym_eig(a.to_dense());
  Vector logl(e.values.size());
  for (Index i = 0; i < logl.size(); ++i) logl(i) = std::log(e.values(i));
  const double exact = logl.sum();
  const Matrix z = rademacher_block(a.size(), 20, 0, 0);
  const Matrix vz = e.vectors.transpose() * z;
  const double sample_mean = (vz.array().square().colwise() * logl.array()).sum() / 20.0;
  Index floor_it = -1;
  for (std::size_t j = 0; j < r.history.size(); ++j) {
    if (std::abs(r.history[j] - sample_mean) <= 0.01 * r.stderr_) {
      floor_it = static_cast<Index>(j + 1);
      break;
    }
  }
  const double err = std::abs(r.estimate - exact);
  const bool pass = floor_it >= 4 && floor_it <= 8 && err <= 3.0 * r.stderr_ && secs < 30.0;
  report(5, pass, "trace regime (GP n=1000, p=20)",
         "floor reached at iteration " + std::to_string(floor_it) + " (6+-2), nnz " + std::to_string(a.nnz()) +
             ", |estimate - logdet| " + fmt(err) + " vs 3 stderr " + fmt(3.0 * r.stderr_) + ", " + fmt(secs) +
             " s (limit 30)");
}

// 6. LQR on the nbar = 200 Laplacian setup.
void criterion_lqr() {
  const auto t0 = std::chrono::steady_clock::now();
  const LtiSystem sys = laplacian_lqr_system(200);
  ControlOptions o;
  o.tol = 1e-8;
  o.lag = 4;
  o.max_m = 100;
  const ShiftSequence xi = default_shifts(sys.A);
  const LqrResult lz = lqr_reduce(sys, xi, o);
  o.method = Method::arnoldi;
  const LqrResult ar = lqr_reduce(sys, xi, o);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (double t : {0.0, 0.1, 1.0}) {
    const Vector ul = eval_control(lz.controller, t);
    const Vector ua = eval_control(ar.controller, t);
    worst = std::max(worst, (ul - ua).norm() / ua.norm());
  }
  const bool count_ok = lz.converged && lz.iterations >= 20 && lz.iterations <= 35;
  const bool pass = count_ok && lz.iterations == ar.iterations && worst <= 1e-6 && secs < 120.0;
  report(6, pass, "LQR regime (nbar=200)",
         "iterations Lanczos " + std::to_string(lz.iterations) + " / Arnoldi " + std::to_string(ar.iterations) +
             " (range 20-35: " + (count_ok ? "met" : "not met") + "), final metric " +
             fmt(lz.metric_history.empty() ? 0.0 : lz.metric_history.back()) + ", controller mismatch " + fmt(worst) +
             " (tol 1e-6), " + fmt(secs) + " s (limit 120)");
}

// 7. Strakos matrix, f = sqrt, j = 30.
void criterion_fpa() {
  bool pass = true;
  std::ostringstream detail;
  for (double rho : {0.45, 0.85}) {
    const Index n = 900, steps = 30;
    const Vector lam = strakos_spectrum(n, 0.01, 100.0, rho);
    const SparseSym a = SparseSym::diagonal(lam, Definiteness::positive);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = nd(gen);
    v.normalize();
    const double exact = v.cwiseProduct(v).dot(lam.cwiseSqrt());
    LanczosOptions lo;
    lo.retain_basis = true;
    const LanczosResult r = run(a, v, default_shifts(a), steps, lo);
    const double quad_err = std::abs(dense_matfun(r.J, ScalarFunction::sqrt())(0, 0) - exact);
    const double orth = orth_loss(r.basis.leftCols(r.steps));
    const Matrix q = r.basis.leftCols(r.steps);
    const double prod = component_products(q, r.J, ScalarFunction::sqrt()).maxCoeff();
    const bool ok = prod <= 1e-12 && quad_err <= 1e-9 && (rho != 0.45 || orth > 1e-4);
    pass = pass && ok;
    detail << "rho " << rho << ": product " << fmt(prod) << ", quad error " << fmt(quad_err) << ", orth loss "
           << fmt(orth) << "; ";
  }
  report(7, pass, "finite-precision study (Strakos n=900)", detail.str() + "tols 1e-12 / 1e-9 / orth > 1e-4 at 0.45");
}

// 8. H2 substitutes: analytic 2x2, Galerkin residual, parametric cross-check.
void criterion_h2() {
  LtiSystem pair;
  pair.A = SparseSym::diagonal(Vector::LinSpaced(2, -1.0, -2.0), Definiteness::negative);
  pair.B = Vector::Unit(2, 0);
  pair.C = Vector::Unit(2, 0).transpose();
  ControlOptions o;
  o.tol = 1e-12;
  o.max_m = 10;
  const double analytic = std::abs(h2_norm(pair, ShiftSequence{}, o).norm - std::sqrt(0.5));

  std::mt19937_64 gen(1008);
  double galerkin = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    LtiSystem sys;
    const Index n = 30 + static_cast<Index>(gen() % 31);
    sys.A = sparse(-random_spd(gen, n, 0.1, 10.0), Definiteness::negative);
    sys.B = random_matrix(gen, n, 1 + static_cast<Index>(gen() % 3));
    sys.C = random_matrix(gen, 1 + static_cast<Index>(gen() % 3), n);
    ControlOptions go;
    go.tol = 1e-14;
    go.max_m = 6;
    go.retain_basis = true;
    const H2Result r = h2_norm(sys, ShiftSequence{}, go);
    const Matrix a = sys.A.to_dense();
    const Matrix q = r.basis.leftCols(r.J.rows());
    const Matrix x = q * r.Y * q.transpose();
    const Matrix rhs = r.seed == "C^T" ? Matrix(sys.C.transpose() * sys.C) : Matrix(sys.B * sys.B.transpose());
    const Matrix res = q.transpose() * (a * x + x * a + rhs) * q;
    galerkin = std::max(galerkin, res.norm() / (2.0 * a.norm() * x.norm() + rhs.norm()));
  }

  LtiSystem base;
  const Index n = 60;
  base.A = sparse(-random_spd(gen, n, 0.1, 10.0), Definiteness::negative);
  ParametricIO pio;
  pio.B1 = random_matrix(gen, n, 2);
  pio.B2 = random_matrix(gen, n, 2);
  pio.C1 = random_matrix(gen, 2, n);
  const Matrix b0 = random_matrix(gen, 2, 2);
  pio.b = [b0](double) { return b0; };
  pio.nodes = {0.5};
  pio.weights = {1.0};
  base.B = pio.B1 + pio.B2 * b0;
  base.C = pio.C1;
  ControlOptions po;
  po.tol = 1e-13;
  po.max_m = 40;
  const double param = h2_param_norm(base.A, pio, ShiftSequence{}, po).norm;
  const double plain = h2_norm(base, ShiftSequence{}, po).norm;
  const double cross = std::abs(param - plain) / plain;
  report(8, analytic <= 1e-12 && galerkin <= 1e-9 && cross <= 1e-10, "H2 substitutes",
         "|norm - sqrt(1/2)| " + fmt(analytic) + " (tol 1e-12), Galerkin residual " + fmt(galerkin) +
             " (tol 1e-9), parametric vs plain " + fmt(cross) + " (tol 1e-10)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// 9. Every bundled config run twice yields byte-identical CSV files.
void criterion_determinism(int argc, char** argv) {
  if (argc < 4) {
    report(9, false, "determinism", "needs <cli> <configs-dir> <work-dir> arguments");
    return;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];
  const fs::path work = argv[3];
  fs::remove_all(work);
  int files = 0, mismatches = 0, run_failures = 0, config_count = 0;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<fs::path> cfgs;
  for (const auto& entry : fs::directory_iterator(configs))
    if (entry.path().extension() == ".ini") cfgs.push_back(entry.path());
  std::sort(cfgs.begin(), cfgs.end());
  for (const fs::path& cfg : cfgs) {
    ++config_count;
    for (const char* run : {"a", "b"}) {
      const fs::path out = work / run / cfg.stem();
      fs::create_directories(out);
      const std::string cmd = quote(cli) + " --config " + quote(cfg.string()) + " --out-dir " + quote(out.string()) +
                              " > " + quote((out / "log.txt").string()) + " 2>&1";
      if (std::system(cmd.c_str()) != 0) ++run_failures;
    }
    for (const auto& entry : fs::directory_iterator(work / "a" / cfg.stem())) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      const fs::path twin = work / "b" / cfg.stem() / entry.path().filename();
      if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  report(9, run_failures == 0 && mismatches == 0 && files > 0, "determinism",
         std::to_string(config_count) + " configs, " + std::to_string(files) + " CSV files compared, " +
             std::to_string(mismatches) + " differ, " + std::to_string(run_failures) + " failed runs, " + fmt(secs) +
             " s for two passes");
}

template <class F>
void guarded(int id, const char* title, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, false, title, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  guarded(1, "Q-less correctness", criterion_qless);
  guarded(2, "moment matching", criterion_moments);
  guarded(3, "residual bound domination", criterion_bound);
  guarded(4, "polynomial-limit degeneration", criterion_polynomial);
  guarded(5, "trace regime", criterion_trace);
  guarded(6, "LQR regime", criterion_lqr);
  guarded(7, "finite-precision study", criterion_fpa);
  guarded(8, "H2 substitutes", criterion_h2);
  guarded(9, "determinism", [&] { criterion_determinism(argc, argv); });
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
