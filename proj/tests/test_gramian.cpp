#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "support.hpp"
#include "tcs/gramian.hpp"
#include "tcs/ingest.hpp"

using namespace tcs;
using test::Rng;

namespace {

CanonicalSystem leading(const Matrix& a, Index m) { return canonicalize(SystemMatrix(a), TargetSpec::leading(m)); }

GramianOptions quadrature() {
  GramianOptions o;
  o.method = GramianMethod::quadrature;
  return o;
}

void expect_psd_symmetric(const Matrix& w) {
  const double norm = test::max_abs(w);
  EXPECT_LE(test::max_abs(w - w.transpose()), 1e-12 * norm);
  Eigen::SelfAdjointEigenSolver<Matrix> es(w);
  EXPECT_GE(es.eigenvalues().minCoeff(), -kPsdTolerance * es.eigenvalues().maxCoeff());
  EXPECT_GT(w.trace(), 0.0);
}

}  // namespace

TEST(OutputGramian, DiagonalClosedForm) {
  const double a = test::scalar_gramian(-1.0, 1.0), b = test::scalar_gramian(0.5, 1.0);
  EXPECT_NEAR(a, 0.4323324, 1e-7);
  EXPECT_NEAR(b, 1.7182818, 1e-7);
  for (const GramianOptions& opt : {GramianOptions{}, quadrature()}) {
    const GramianSet g = output_gramian_set(leading(test::diagonal(), 2), 1.0, opt);
    const Matrix w = assemble(Vector::Constant(2, 0.5), g);
    EXPECT_NEAR(w(0, 0), 0.5 * a, 1e-10 * a);
    EXPECT_NEAR(w(1, 1), 0.5 * b, 1e-10 * b);
    EXPECT_NEAR(w(0, 1), 0.0, 1e-14);
    EXPECT_NEAR(w(0, 0), 0.216166, 1e-6);
    EXPECT_NEAR(w(1, 1), 0.859141, 1e-6);
  }
}

TEST(OutputGramian, RotorClosedForm) {
  for (double t : {0.5, 1.0, test::kPi, 4.0}) {
    for (const GramianOptions& opt : {GramianOptions{}, quadrature()}) {
      const GramianSet g = output_gramian_set(leading(test::rotor(), 2), t, opt);
      EXPECT_LE(test::rel_diff(g.gramians[0], test::rotor_w1(t)), 1e-10) << "T = " << t;
      EXPECT_LE(test::rel_diff(g.gramians[1], test::rotor_w2(t)), 1e-10) << "T = " << t;
    }
  }
  // At T = 1 the closed forms reduce to simple fractions.
  const GramianSet g = output_gramian_set(leading(test::rotor(), 2), 1.0);
  EXPECT_NEAR(g.gramians[0](0, 1), -0.5, 1e-14);
  EXPECT_NEAR(g.gramians[0](1, 1), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(g.gramians[1](0, 0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(g.gramians[1](0, 1), 3.0 / 8.0, 1e-14);
  EXPECT_NEAR(g.gramians[1](1, 1), 43.0 / 60.0, 1e-14);
}

TEST(OutputGramian, BlockExponentialMatchesIndependentQuadrature) {
  Rng rng(31);
  const Matrix a = test::random_stable(rng, 8);
  const GramianSet g = output_gramian_set(leading(a, 3), 2.0);
  const auto want = test::oracle_gramians(a, 3, 2.0);
  for (Index i = 0; i < 3; ++i)
    EXPECT_LE(test::rel_diff(g.gramians[static_cast<std::size_t>(i)], want[static_cast<std::size_t>(i)]), 1e-8);
}

TEST(OutputGramian, MethodsAgreeOnRandomSystems) {
  Rng rng(32);
  for (int trial = 0; trial < 12; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 11);
    const Index m = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(std::min<Index>(n, 5)));
    const Matrix a = trial % 2 ? test::random_stable(rng, n) : test::random_matrix(rng, n, n, 0.3);
    for (double t : {0.1, 1.0, 10.0}) {
      const CanonicalSystem c = leading(a, m);
      const GramianSet x = output_gramian_set(c, t), y = output_gramian_set(c, t, quadrature());
      for (Index i = 0; i < m; ++i)
        EXPECT_LE(test::rel_diff(x.gramians[static_cast<std::size_t>(i)], y.gramians[static_cast<std::size_t>(i)]), 1e-8)
            << "trial " << trial << " T " << t;
    }
  }
}

TEST(OutputGramian, NonLeadingTargetsUseCanonicalOrder) {
  Rng rng(33);
  const Matrix a = test::random_stable(rng, 6);
  const CanonicalSystem c = canonicalize(SystemMatrix(a), TargetSpec::from_one_based({5, 2}));
  const GramianSet g = output_gramian_set(c, 1.0);
  // Oracle on the original coordinates: rows/cols (4, 1) of the state Gramian of e_4 and e_1.
  const auto full = test::oracle_gramians(a, 6, 1.0);
  const Index idx[2] = {4, 1};
  for (int i = 0; i < 2; ++i) {
    Matrix want(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s) want(r, s) = full[static_cast<std::size_t>(idx[i])](idx[r], idx[s]);
    EXPECT_LE(test::rel_diff(g.gramians[static_cast<std::size_t>(i)], want), 1e-8);
  }
}

TEST(OutputGramian, LongHorizonLaplacianStaysFinite) {
  Rng rng(34);
  Connectivity conn;
  conn.matrix = test::random_connectivity(rng, 20);
  conn.labels = default_labels(20);
  const SystemMatrix sys = build_system(conn);
  const CanonicalSystem c = canonicalize(sys, TargetSpec::leading(5));
  const GramianSet g = output_gramian_set(c, 100.0);
  for (const Matrix& w : g.gramians) {
    EXPECT_TRUE(w.allFinite());
    expect_psd_symmetric(w);
  }
  const GramianSet q = output_gramian_set(c, 100.0, quadrature());
  for (std::size_t i = 0; i < g.gramians.size(); ++i) EXPECT_LE(test::rel_diff(g.gramians[i], q.gramians[i]), 1e-8);
}

TEST(OutputGramian, Invariants) {
  Rng rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 3 + static_cast<Index>(rng() % 8);
    const Matrix a = test::random_matrix(rng, n, n, 0.7);
    const CanonicalSystem c = leading(a, 2);
    std::vector<Matrix> prev;
    for (double t : {0.05, 0.5, 1.0, 3.0}) {
      const GramianSet g = output_gramian_set(c, t);
      for (std::size_t i = 0; i < g.gramians.size(); ++i) {
        expect_psd_symmetric(g.gramians[i]);
        if (!prev.empty()) {
          // Monotone in T.
          Eigen::SelfAdjointEigenSolver<Matrix> es(g.gramians[i] - prev[i]);
          EXPECT_GE(es.eigenvalues().minCoeff(), -kPsdTolerance * test::max_abs(g.gramians[i]));
        }
      }
      prev = g.gramians;
    }
  }
}

TEST(OutputGramian, ParallelMatchesSerialBitwise) {
  Rng rng(36);
  const CanonicalSystem c = leading(test::random_stable(rng, 10), 5);
  GramianOptions par;
  par.jobs = 4;
  const GramianSet x = output_gramian_set(c, 3.0), y = output_gramian_set(c, 3.0, par);
  for (std::size_t i = 0; i < x.gramians.size(); ++i) EXPECT_EQ(x.gramians[i], y.gramians[i]);
}

TEST(OutputGramian, RejectsBadHorizon) {
  const CanonicalSystem c = leading(test::diagonal(), 2);
  EXPECT_THROW(output_gramian_set(c, 0.0), ValidationError);
  EXPECT_THROW(output_gramian_set(c, -1.0), ValidationError);
  EXPECT_THROW(output_gramian_set(c, std::numeric_limits<double>::infinity()), ValidationError);
}

TEST(OutputGramian, QuadratureBudgetExhaustionReportsResidual) {
  GramianOptions o = quadrature();
  o.quadrature_max_intervals = 16;
  o.quadrature_rtol = 1e-15;
  try {
    output_gramian_set(leading(test::random_matrix(*std::make_unique<Rng>(37), 4, 4, 3.0), 2), 5.0, o);
    FAIL() << "expected AccuracyError";
  } catch (const AccuracyError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(ReducedGramian, RotationBlockAtPi) {
  const CanonicalSystem c = leading(test::rotor(), 2);
  for (const GramianOptions& opt : {GramianOptions{}, quadrature()}) {
    const GramianSet g = reduced_gramian_set(c, test::kPi, opt);
    EXPECT_EQ(g.flavor, GramianFlavor::reduced);
    for (const Matrix& w : g.gramians) EXPECT_LE(test::rel_diff(w, Matrix::Identity(2, 2) * test::kPi / 2), 1e-12);
  }
  // Independent oracle on A11 itself.
  const auto want = test::oracle_gramians(c.a11, 2, test::kPi);
  EXPECT_LE(test::rel_diff(want[0], Matrix::Identity(2, 2) * test::kPi / 2), 1e-9);
}

TEST(ReducedGramian, ZeroScalarIntegratesToHorizon) {
  const CanonicalSystem c = leading(Matrix::Zero(1, 1), 1);
  EXPECT_NEAR(reduced_gramian_set(c, 3.0).gramians[0](0, 0), 3.0, 1e-14);
}

TEST(ReducedGramian, EqualsStandaloneFullGramians) {
  Rng rng(38);
  const CanonicalSystem c = leading(test::random_stable(rng, 8), 3);
  const GramianSet red = reduced_gramian_set(c, 1.0);
  const GramianSet alone = output_gramian_set(standalone(c.a11), 1.0);
  const auto oracle = test::oracle_gramians(c.a11, 3, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(red.gramians[i], alone.gramians[i]);
    EXPECT_LE(test::rel_diff(red.gramians[i], oracle[i]), 1e-8);
  }
}

TEST(Assemble, LinearityAndBasisWeights) {
  Rng rng(39);
  const GramianSet g = output_gramian_set(leading(test::random_stable(rng, 6), 3), 1.0);
  EXPECT_EQ(assemble(Vector::Unit(3, 0), g), g.gramians[0]);
  EXPECT_EQ(assemble(Vector::Zero(3), g), Matrix::Zero(3, 3));
  const Vector p = test::random_simplex(rng, 3), q = test::random_simplex(rng, 3);
  EXPECT_LE(test::max_abs(assemble(Vector(2.0 * p + 3.0 * q), g) - 2.0 * assemble(p, g) - 3.0 * assemble(q, g)),
            1e-13);
  EXPECT_THROW(assemble(Vector::Ones(2), g), ValidationError);
}

TEST(OutputControllabilityRank, Examples) {
  const RankResult id = output_controllability_rank(leading(Matrix::Identity(3, 3), 2), {0, 1});
  EXPECT_EQ(id.rank, 2);
  EXPECT_TRUE(id.full_row_rank);

  const RankResult app = output_controllability_rank(leading(test::rotor(), 2), {0, 1});
  EXPECT_TRUE(app.full_row_rank);

  // Brute force: rows of (C B, C A B, C A^2 B) with B = e_1 and A diagonal are
  // (1, -1, 1) and (0, 0, 0).
  const CanonicalSystem ex1 = leading(test::diagonal(), 2);
  Matrix brute(2, 3);
  Vector col = Vector::Unit(3, 0);
  for (int j = 0; j < 3; ++j, col = test::diagonal() * col) brute.col(j) = col.head(2);
  EXPECT_EQ(brute.row(1).norm(), 0.0);
  const RankResult r = output_controllability_rank(ex1, {0});
  EXPECT_EQ(r.rank, 1);
  EXPECT_FALSE(r.full_row_rank);
  EXPECT_LE(r.smallest_singular_value, 1e-14);

  EXPECT_THROW(output_controllability_rank(ex1, {}), ValidationError);
  EXPECT_THROW(output_controllability_rank(ex1, {2}), ValidationError);
}
