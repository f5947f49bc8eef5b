#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace ratlanczos;
using namespace testutil;

namespace {

FormRequest request(ScalarFunction f, double tol = 1e-13, Index max_m = 50) {
  FormRequest r;
  r.f = std::move(f);
  r.tol = tol;
  r.max_m = max_m;
  return r;
}

/// Runs exactly m iterations unless the space becomes invariant.
FormRequest fixed_steps(ScalarFunction f, Index m) {
  FormRequest r = request(std::move(f), 1e-300, m);
  r.lag = m > 1 ? m - 1 : 1;
  r.max_m = std::max<Index>(m, 2);
  return r;
}

Matrix poly_eval(const Vector& coef, const Matrix& x) {
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (Index d = coef.size() - 1; d >= 0; --d) acc = acc * x + coef(d) * Matrix::Identity(x.rows(), x.cols());
  return acc;
}

/// prod_{i <= k} (I - X / xi_i)^{-1}.
Matrix denom_inverse(const ShiftSequence& xi, Index k, const Matrix& x) {
  const Index n = x.rows();
  Matrix out = Matrix::Identity(n, n);
  for (Index i = 1; i <= k; ++i) out = out * (Matrix::Identity(n, n) - x * xi.at(i).inverse());
  return out.inverse();
}

}  // namespace

TEST(QuadForm, IdentityAfterOneStepIsExact) {
  std::mt19937_64 gen(60);
  const Matrix a = random_spd(gen, 25);
  const Vector v = random_vector(gen, 25);
  const FormResult r = quad_form(sparse(a, Definiteness::positive), v, ShiftSequence::from_values({-2.0, -3.0}),
                                 fixed_steps(ScalarFunction::identity(), 1));
  EXPECT_NEAR(r.history.front(), v.dot(a * v), 1e-12 * std::abs(v.dot(a * v)));
}

TEST(QuadForm, InvariantSubspaceGivesExactSqrt) {
  Vector d(3);
  d << 1.0, 4.0, 9.0;
  const SparseSym a = SparseSym::diagonal(d, Definiteness::positive);
  const FormResult r = quad_form(a, Vector::Unit(3, 1), ShiftSequence::from_values({-1.0, -2.0}),
                                 request(ScalarFunction::sqrt()));
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.termination, Termination::lucky_breakdown);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 2.0, 1e-15);
}

TEST(QuadForm, StrakosSqrtMatchesDenseOracle) {
  const Vector lam = strakos_spectrum(900, 0.01, 100.0, 0.45);
  const SparseSym a = SparseSym::diagonal(lam, Definiteness::positive);
  std::mt19937_64 gen(61);
  const Vector v = random_vector(gen, 900).normalized();
  const double oracle = v.cwiseProduct(v).dot(lam.cwiseSqrt());
  FormRequest req = request(ScalarFunction::sqrt(), 1e-13, 80);
  const FormResult r = quad_form(a, v, ShiftSequence{}, req);
  EXPECT_LE(std::abs(r.value - oracle), 1e-9) << "iterations " << r.iterations;
}

TEST(QuadForm, ArnoldiAgreesWithLanczos) {
  std::mt19937_64 gen(62);
  const Matrix a = -random_spd(gen, 60, 0.1, 10.0);
  const SparseSym s = sparse(a, Definiteness::negative);
  const Vector v = random_vector(gen, 60);
  FormRequest req = fixed_steps(ScalarFunction::exp(), 8);
  const FormResult lz = quad_form(s, v, ShiftSequence{}, req);
  req.method = Method::arnoldi;
  const FormResult ar = quad_form(s, v, ShiftSequence{}, req);
  EXPECT_EQ(lz.iterations, ar.iterations);
  EXPECT_NEAR(lz.value, ar.value, 1e-11 * std::abs(ar.value));
}

TEST(QuadForm, RequestValidation) {
  const SparseSym a = laplacian2d(4);
  FormRequest bad = request(ScalarFunction::exp());
  bad.tol = 0.0;
  EXPECT_THROW(quad_form(a, Vector::Ones(16), ShiftSequence{}, bad), InvalidArgument);
  bad = request(ScalarFunction::exp(), 1e-8, 5);
  bad.lag = 5;
  EXPECT_THROW(quad_form(a, Vector::Ones(16), ShiftSequence{}, bad), InvalidArgument);
}

TEST(QuadForm, DomainErrorOnRitzValues) {
  const SparseSym a = laplacian2d(4);
  EXPECT_THROW(quad_form(a, Vector::Ones(16), ShiftSequence{}, request(ScalarFunction::log())), DomainError);
}

TEST(QuadForm, MaxIterationsFlagged) {
  std::mt19937_64 gen(63);
  const Matrix a = random_spd(gen, 200, 1.0, 1e4);
  const FormResult r = quad_form(sparse(a, Definiteness::positive), random_vector(gen, 200),
                                 ShiftSequence::all_infinite(3), request(ScalarFunction::sqrt(), 1e-15, 3));
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.termination, Termination::max_iterations);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(BilinearForm, EqualVectorsAllStrategiesAgree) {
  std::mt19937_64 gen(64);
  const Matrix a = random_spd(gen, 50, 0.5, 20.0);
  const SparseSym s = sparse(a, Definiteness::positive);
  const Vector v = random_vector(gen, 50);
  const ShiftSequence xi = random_negative_shifts(gen, 10, 0.5, 20.0);
  const FormRequest base = fixed_steps(ScalarFunction::sqrt(), 10);
  const double ref = quad_form(s, v, xi, base).value;
  for (FormStrategy st : {FormStrategy::quadratic, FormStrategy::polarization, FormStrategy::oblique}) {
    FormRequest req = base;
    req.strategy = st;
    EXPECT_NEAR(bilinear_form(s, v, v, xi, req).value, ref, 1e-12 * std::abs(ref)) << to_string(st);
  }
  FormRequest req = base;
  req.strategy = FormStrategy::block2x2;
  try {
    bilinear_form(s, v, v, xi, req);
    FAIL() << "expected RankDeficiencyError";
  } catch (const RankDeficiencyError& e) {
    EXPECT_NE(std::string(e.what()).find("quadratic"), std::string::npos);
  }
}

TEST(BilinearForm, OrthogonalEigenvectorsGiveZero) {
  const SparseSym a = SparseSym::diagonal(Vector::LinSpaced(2, 1.0, 2.0), Definiteness::positive);
  for (FormStrategy st : {FormStrategy::polarization, FormStrategy::oblique, FormStrategy::block2x2}) {
    FormRequest req = request(ScalarFunction::identity());
    req.strategy = st;
    const FormResult r = bilinear_form(a, Vector::Unit(2, 0), Vector::Unit(2, 1),
                                       ShiftSequence::from_values({-1.0, -2.0, -3.0}), req);
    EXPECT_NEAR(r.value, 0.0, 1e-15) << to_string(st);
  }
}

TEST(BilinearForm, InverseAgainstDenseSolve) {
  std::mt19937_64 gen(65);
  const Matrix a = random_spd(gen, 80, 1.0, 100.0);
  const SparseSym s = sparse(a, Definiteness::positive);
  const Vector u = random_vector(gen, 80);
  const Vector v = random_vector(gen, 80);
  const double oracle = u.dot(a.llt().solve(v));
  for (FormStrategy st : {FormStrategy::polarization, FormStrategy::oblique, FormStrategy::block2x2}) {
    FormRequest req = fixed_steps(ScalarFunction::inv(), 12);
    req.strategy = st;
    const FormResult r = bilinear_form(s, u, v, ShiftSequence{}, req);
    EXPECT_NEAR(r.value, oracle, 1e-8 * std::abs(oracle)) << to_string(st);
  }
}

TEST(BlockQuadForm, EigenvectorBlockExactAfterOneStep) {
  std::mt19937_64 gen(66);
  Vector lam = Vector::LinSpaced(12, 1.0, 12.0);
  const Matrix u = random_orthogonal(gen, 12);
  const Matrix a = symmetrized(u * lam.asDiagonal() * u.transpose());
  const Matrix v = u.leftCols(3);
  const FormResult r = block_quad_form(sparse(a, Definiteness::positive), v, ShiftSequence::from_values({-1.0, -2.0}),
                                       request(ScalarFunction::log()));
  EXPECT_EQ(r.iterations, 1);
  Matrix expect = Matrix::Zero(3, 3);
  for (Index i = 0; i < 3; ++i) expect(i, i) = std::log(lam(i));
  EXPECT_LE((r.block_value - expect).norm(), 1e-13);
  EXPECT_EQ(r.block_value, r.block_value.transpose());
}

TEST(BlockQuadForm, SingleColumnMatchesQuadForm) {
  std::mt19937_64 gen(67);
  const Matrix a = random_spd(gen, 40, 0.1, 10.0);
  const SparseSym s = sparse(a, Definiteness::positive);
  const Vector v = 3.0 * random_vector(gen, 40);
  const ShiftSequence xi = random_negative_shifts(gen, 6, 0.1, 10.0);
  const FormRequest req = fixed_steps(ScalarFunction::exp(), 6);
  const double q = quad_form(s, v, xi, req).value;
  const FormResult b = block_quad_form(s, Matrix(v), xi, req);
  EXPECT_NEAR(b.block_value(0, 0), q, 1e-12 * std::abs(q));
}

TEST(BlockQuadForm, ExpAgainstDenseOracle) {
  std::mt19937_64 gen(68);
  const Matrix a = random_spd(gen, 100, 0.01, 10.0);
  const Matrix v = random_matrix(gen, 100, 3);
  const Matrix oracle = v.transpose() * dense_matfun(a, ScalarFunction::exp()) * v;
  const FormResult r = block_quad_form(sparse(a, Definiteness::positive), v, ShiftSequence{},
                                       request(ScalarFunction::exp(), 1e-12));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.block_value - oracle).norm(), 1e-8 * oracle.norm());
  EXPECT_THROW(block_quad_form(sparse(a, Definiteness::positive), Matrix(v.col(0).replicate(1, 2)),
                               ShiftSequence{}, request(ScalarFunction::exp())),
               RankDeficiencyError);
}

TEST(ResidualBound, DominatesTrueResidualScalar) {
  std::mt19937_64 gen(69);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 60;
    const bool cyclic = trial % 2 == 1;
    const Index m = cyclic ? 24 : 12;
    const Matrix a = -random_spd(gen, n, 0.1, 50.0);
    const SparseSym s = sparse(a, Definiteness::negative);
    const Vector v = random_vector(gen, n);
    const ShiftSequence xi = cyclic ? default_shifts(s) : ShiftSequence::from_values([&] {
      std::vector<double> vals;
      std::uniform_real_distribution<double> u(std::log(0.1), std::log(50.0));
      for (Index i = 0; i < m; ++i) vals.push_back(std::exp(u(gen)));
      return vals;
    }());
    const double a_norm = estimate_norm(s).norm;
    ShiftedSolverCache solver(s);
    LanczosOptions opts;
    opts.retain_basis = true;
    RationalLanczos lz(s, v, solver, opts, m);
    std::vector<double> bounds, trues;
    for (Index j = 1; j <= m; ++j) {
      if (!lz.step(xi.at(j))) break;
      const double bound = residual_bound(lz, ScalarFunction::exp(), 1.0, a_norm);
      const double truth = true_residual(s, lz.basis(), lz.projected(), lz.start_factor(), ScalarFunction::exp(), 1.0);
      EXPECT_GE(bound, truth) << "trial " << trial << " step " << j;
      bounds.push_back(bound);
      trues.push_back(truth);
    }
    if (cyclic && bounds.size() == 24u) {
      // Same pole one cycle apart.
      EXPECT_LT(bounds[23], bounds[11]);
      EXPECT_LT(trues[23], trues[11]);
    }
  }
}

TEST(ResidualBound, DominatesTrueResidualBlock) {
  std::mt19937_64 gen(70);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 50, m = 8;
    const Matrix a = -random_spd(gen, n, 0.1, 20.0);
    const SparseSym s = sparse(a, Definiteness::negative);
    const Matrix v = random_matrix(gen, n, 2);
    const double a_norm = estimate_norm(s).norm;
    const ShiftSequence xi = default_shifts(s);
    ShiftedSolverCache solver(s);
    BlockLanczosOptions opts;
    opts.retain_basis = true;
    BlockRationalLanczos lz(s, v, solver, opts, m);
    for (Index j = 1; j <= m; ++j) {
      if (!lz.step(xi.at(j))) break;
      const double bound = residual_bound(lz, ScalarFunction::exp(), 1.0, a_norm);
      const double truth = true_residual(s, lz.basis(), lz.projected(), lz.start_factor(), ScalarFunction::exp(), 1.0);
      EXPECT_GE(bound, truth) << "trial " << trial << " step " << j;
    }
  }
}

TEST(ResidualBound, ZeroAtBreakdown) {
  const SparseSym a = SparseSym::diagonal(Vector::LinSpaced(3, -1.0, -3.0), Definiteness::negative);
  Vector v = Vector::Zero(3);
  v(0) = 1.0;
  v(2) = 1.0;
  ShiftedSolverCache solver(a);
  RationalLanczos lz(a, v, solver);
  lz.step(Shift(1.0));
  const bool more = lz.step(Shift(2.0));
  EXPECT_FALSE(more);
  EXPECT_EQ(lz.termination(), Termination::lucky_breakdown);
  EXPECT_EQ(residual_bound(lz, ScalarFunction::exp(), 1.0, 3.0), 0.0);
}

TEST(ResidualBound, StoppingRuleConverges) {
  std::mt19937_64 gen(71);
  const Matrix a = -random_spd(gen, 80, 0.1, 10.0);
  const SparseSym s = sparse(a, Definiteness::negative);
  const Vector u = random_vector(gen, 80);
  const Vector v = random_vector(gen, 80);
  const double oracle = u.dot(dense_matfun(a, ScalarFunction::exp()) * v);
  FormRequest req = request(ScalarFunction::exp(), 1e-10);
  req.strategy = FormStrategy::oblique;
  req.stopping = StoppingRule::residual_bound;
  const FormResult r = bilinear_form(s, u, v, ShiftSequence{}, req);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(std::abs(r.value - oracle), 1e-8 * u.norm() * v.norm());
  for (std::size_t i = 1; i < r.bound_history.size(); ++i) EXPECT_GE(r.bound_history[i], 0.0);
}

TEST(FormsProperty, MomentMatching) {
  std::mt19937_64 gen(72);
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = 20 + static_cast<Index>(gen() % 41);
    const Index m = 2 + static_cast<Index>(gen() % 5);
    const Matrix a = random_spd(gen, n, 0.1, 2.0);
    const Vector v = random_vector(gen, n);
    const ShiftSequence xi = random_negative_shifts(gen, m, 0.2, 5.0);
    const LanczosResult r = run(sparse(a, Definiteness::positive), v, xi, m);
    ASSERT_EQ(r.steps, m);
    const Matrix qa = denom_inverse(xi, m - 1, a);
    const Matrix qj = denom_inverse(xi, m - 1, r.J);
    for (int k = 0; k < 10; ++k) {
      const Vector coef = random_vector(gen, 2 * m);
      const double lhs = v.dot(poly_eval(coef, a) * qa * qa * v);
      const double rhs = v.squaredNorm() * (poly_eval(coef, r.J) * qj * qj)(0, 0);
      EXPECT_LE(std::abs(lhs - rhs), 1e-8 * std::abs(lhs)) << "instance " << inst;
    }
  }
}

TEST(FormsProperty, ExactnessOfRationalInterpolant) {
  std::mt19937_64 gen(73);
  for (int inst = 0; inst < 20; ++inst) {
    const Index n = 40, m = 5;
    const Matrix a = random_spd(gen, n, 0.1, 3.0);
    const Vector v = random_vector(gen, n);
    const ShiftSequence xi = random_negative_shifts(gen, m, 0.2, 5.0);
    LanczosOptions opts;
    opts.retain_basis = true;
    const LanczosResult r = run(sparse(a, Definiteness::positive), v, xi, m, opts);
    const Matrix q = r.basis.leftCols(m);
    const Vector coef = random_vector(gen, m);
    const Vector full = poly_eval(coef, a) * denom_inverse(xi, m - 1, a) * v;
    const Vector red = v.norm() * q * (poly_eval(coef, r.J) * denom_inverse(xi, m - 1, r.J)).col(0);
    EXPECT_LE((full - red).norm(), 1e-9 * std::max(1.0, full.norm())) << inst;
  }
}

TEST(Hutchinson, ProbesAreReproducibleSigns) {
  const Vector z1 = rademacher_probe(50, 7, 3);
  EXPECT_EQ(z1, rademacher_probe(50, 7, 3));
  EXPECT_NE(z1, rademacher_probe(50, 7, 4));
  EXPECT_NE(z1, rademacher_probe(50, 8, 3));
  EXPECT_TRUE((z1.array().abs() == 1.0).all());
  const Matrix b = rademacher_block(50, 4, 7, 2);
  EXPECT_EQ(Vector(b.col(1)), z1);
}

TEST(Hutchinson, ExhaustiveEnsembleIsExact) {
  std::mt19937_64 gen(74);
  for (Index n : {4, 8, 12}) {
    const Matrix a = random_spd(gen, n, 0.5, 5.0);
    const SparseSym s = sparse(a, Definiteness::positive);
    const Index count = Index{1} << n;
    Matrix probes(n, count);
    for (Index k = 0; k < count; ++k)
      for (Index i = 0; i < n; ++i) probes(i, k) = (k >> i) & 1 ? 1.0 : -1.0;
    for (bool identity : {true, false}) {
      TraceRequest req;
      req.f = identity ? ScalarFunction::identity() : ScalarFunction::log();
      req.tol = 1e-14;
      req.max_m = 2 * n;
      const double oracle = identity ? a.trace() : dense_matfun(a, ScalarFunction::log()).trace();
      const TraceResult r = hutchinson_trace(s, probes, req);
      EXPECT_NEAR(r.estimate, oracle, 1e-12 * std::max(1.0, std::abs(oracle))) << n;
      EXPECT_EQ(r.samples.size(), static_cast<std::size_t>(count));
    }
  }
}

TEST(Hutchinson, ThreadCountDoesNotChangeResult) {
  const SparseSym a = gp_precision_matrix(uniform_points(150, 3), 20.0, 0.1);
  TraceRequest req;
  req.num_probes = 6;
  req.block = 3;
  req.seed = 11;
  req.tol = 1e-10;
  const TraceResult one = hutchinson_trace(a, req);
  req.threads = 4;
  const TraceResult four = hutchinson_trace(a, req);
  EXPECT_EQ(one.estimate, four.estimate);
  EXPECT_EQ(one.samples, four.samples);
  EXPECT_EQ(one.history, four.history);
}

TEST(LogDet, Examples) {
  TraceRequest req;
  req.num_probes = 3;
  EXPECT_NEAR(logdet(SparseSym::diagonal(Vector::Ones(5), Definiteness::positive), req).estimate, 0.0, 1e-15);
  Vector d(2);
  d << 2.0, 4.0;
  Matrix probes(2, 4);
  probes << 1, 1, -1, -1, 1, -1, 1, -1;
  const TraceResult r = hutchinson_trace(SparseSym::diagonal(d, Definiteness::positive), probes, req);
  EXPECT_NEAR(r.estimate, std::log(8.0), 1e-12);
}

TEST(LogDet, GaussianProcessWithinThreeStderr) {
  const SparseSym a = gp_precision_matrix(uniform_points(200, 5), 20.0, 0.1);
  const double oracle = sym_eig(a.to_dense()).values.array().log().sum();
  TraceRequest req;
  req.num_probes = 10;
  req.block = 5;
  req.seed = 1;
  req.tol = 1e-10;
  const TraceResult r = logdet(a, req);
  EXPECT_GT(r.stderr_, 0.0);
  EXPECT_LE(std::abs(r.estimate - oracle), 3.0 * r.stderr_);
  const Vector x = Vector::Ones(200);
  EXPECT_NEAR(log_likelihood(a, x, oracle),
              0.5 * oracle - 0.5 * x.dot(a.to_dense() * x) - 100.0 * std::log(2.0 * std::numbers::pi), 1e-9);
}

TEST(GpPrecision, Examples) {
  const SparseSym far = gp_precision_matrix({{0.0, 0.0}, {0.5, 0.0}}, 20.0, 0.1);
  EXPECT_EQ(far.to_dense(), Matrix::Identity(2, 2));
  const SparseSym near = gp_precision_matrix({{0.0, 0.0}, {0.05, 0.0}}, 20.0, 0.1);
  Matrix expect(2, 2);
  expect << 11, -10, -10, 11;
  EXPECT_LE((near.to_dense() - expect).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_THROW(gp_precision_matrix({{0.0, 0.0}}, 0.0, 0.1), InvalidArgument);
}

TEST(GpPrecision, DiagonallyDominantAndDensityGrows) {
  const auto pts = uniform_points(1000, 2024);
  Index prev = 0;
  for (double delta : {0.01, 0.02, 0.04}) {
    const SparseSym a = gp_precision_matrix(pts, 20.0, delta);
    const Matrix d = a.to_dense();
    for (Index i = 0; i < 1000; ++i) {
      const double off = d.row(i).cwiseAbs().sum() - std::abs(d(i, i));
      EXPECT_GT(d(i, i), off);
    }
    EXPECT_GT(a.nnz(), prev);
    prev = a.nnz();
    if (delta == 0.02) {
      // Off-diagonal pair count: order of magnitude of the default benchmark.
      EXPECT_GT(a.nnz() - 1000, 500);
      EXPECT_LT(a.nnz() - 1000, 5000);
    }
  }
}

TEST(Generators, Laplacian) {
  const Matrix l = laplacian2d(3).to_dense();
  EXPECT_EQ(l.rows(), 9);
  EXPECT_DOUBLE_EQ(l(4, 4), -1.0);
  EXPECT_DOUBLE_EQ(l(4, 1), 0.25);
  EXPECT_DOUBLE_EQ(l(4, 3), 0.25);
  EXPECT_DOUBLE_EQ(l(4, 5), 0.25);
  EXPECT_DOUBLE_EQ(l(4, 7), 0.25);
  EXPECT_EQ(l(2, 3), 0.0);
  EXPECT_LT(sym_eig(laplacian2d(10).to_dense()).values.maxCoeff(), 0.0);
  EXPECT_EQ(laplacian2d(200).size(), 40000);
  EXPECT_THROW(laplacian2d(2), InvalidArgument);
}

TEST(Generators, Strakos) {
  const Vector d = strakos_spectrum(900, 0.01, 100.0, 0.45);
  EXPECT_EQ(d(0), 0.01);
  EXPECT_EQ(d(899), 100.0);
  for (Index i = 1; i < 900; ++i) EXPECT_GE(d(i), d(i - 1));
  for (Index i : {1, 100, 880, 898}) {
    const long double ref = 0.01L + static_cast<long double>(i) / 899.0L * (100.0L - 0.01L) *
                                        std::pow(0.45L, static_cast<long double>(899 - i));
    EXPECT_NEAR(d(i), static_cast<double>(ref), 1e-15 * std::max(1.0, std::abs(d(i))));
  }
  EXPECT_THROW(strakos_spectrum(10, 1.0, 1.0, 0.5), InvalidArgument);
  EXPECT_THROW(strakos_spectrum(10, 0.0, 1.0, 1.5), InvalidArgument);
}

TEST(Generators, Indicator) {
  EXPECT_EQ(indicator(10, {0, 1, 0, 1}).sum(), 100.0);
  EXPECT_EQ(indicator(10, {0.5, 0.4, 0, 1}).sum(), 0.0);
  Index count = 0;
  for (Index a = 0; a < 10; ++a)
    for (Index b = 0; b < 10; ++b) {
      const double x = a / 9.0, y = b / 9.0;
      if (x >= 0.2 && x <= 0.8 && y >= 0.2 && y <= 0.8) ++count;
    }
  EXPECT_EQ(indicator(10, {0.2, 0.8, 0.2, 0.8}).sum(), static_cast<double>(count));
  EXPECT_EQ(count, 36);
}

TEST(Generators, NormalizedAdjacency) {
  Matrix adj = Matrix::Zero(4, 4);
  adj(0, 1) = adj(1, 0) = adj(1, 2) = adj(2, 1) = adj(2, 3) = adj(3, 2) = 1.0;
  const Matrix n = normalize_adjacency(SparseSym::from_dense(adj)).to_dense();
  EXPECT_DOUBLE_EQ(n(0, 0), -2.0);
  EXPECT_NEAR(n(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(n(1, 2), 0.5, 1e-15);
  const Vector ev = sym_eig(n).values;
  EXPECT_GE(ev.minCoeff(), -3.0 - 1e-14);
  EXPECT_LE(ev.maxCoeff(), -1.0 + 1e-14);
}

TEST(Diagnostics, ExactArithmeticRegime) {
  const SparseSym a = SparseSym::diagonal(strakos_spectrum(200, 0.1, 10.0, 0.9), Definiteness::positive);
  std::mt19937_64 gen(75);
  const Vector v = random_vector(gen, 200);
  LanczosOptions opts;
  opts.retain_basis = true;
  const LanczosResult r = run(a, v, default_shifts(a), 6, opts);
  const auto rows = diagnostics(a, r, ScalarFunction::sqrt());
  ASSERT_EQ(rows.size(), 6u);
  for (const DiagnosticsRow& row : rows) {
    EXPECT_LE(row.orth_loss, 1e-12);
    EXPECT_LE(row.component_product, 1e-12);
    EXPECT_LE(row.ritz_value, 10.0 + 1e-12);
  }
  EXPECT_NEAR(rows.back().quad_value, v.squaredNorm() * (r.v_norm > 0 ? 1.0 : 0.0) *
                                          (dense_matfun(r.J, ScalarFunction::sqrt())(0, 0)), 1e-12 * v.squaredNorm());
  LanczosResult no_basis = run(a, v, default_shifts(a), 3);
  EXPECT_THROW(diagnostics(a, no_basis, ScalarFunction::sqrt()), InvalidArgument);
  Matrix q = Matrix::Identity(4, 2);
  q(1, 0) = 1e-3;
  EXPECT_GT(orth_loss(q), 0.0);
}
