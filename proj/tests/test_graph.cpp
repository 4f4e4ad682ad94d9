#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cds/graph.hpp"
#include "cds/graph_io.hpp"
#include "cds/replicator.hpp"
#include "support.hpp"

using namespace cds;
using testing_support::jacobi_lambda_max;

TEST(AffinityMatrix, RejectsAsymmetry) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(AffinityMatrix{m}, InvalidArgument);
}

TEST(AffinityMatrix, RejectsNonzeroDiagonalAndNegatives) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 0.5;
  EXPECT_THROW(AffinityMatrix{d}, InvalidArgument);
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 1) = neg(1, 0) = -1.0;
  EXPECT_THROW(AffinityMatrix{neg}, InvalidArgument);
  Matrix nan = Matrix::Zero(2, 2);
  nan(0, 1) = nan(1, 0) = std::nan("");
  EXPECT_THROW(AffinityMatrix{nan}, InvalidArgument);
}

TEST(AffinityMatrix, PrincipalSubmatrix) {
  const auto a = testing_support::toy_graph();
  const std::vector<Index> idx{4, 5, 6};
  const auto p = a.principal(idx);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(p(1, 2), 1.0);
}

TEST(ConstraintSet, Validation) {
  EXPECT_THROW(ConstraintSet({}, 3), InvalidArgument);
  EXPECT_THROW(ConstraintSet({0, 0}, 3), InvalidArgument);
  EXPECT_THROW(ConstraintSet({3}, 3), InvalidArgument);
  const ConstraintSet s({2, 0}, 4);
  EXPECT_EQ(s.members(), (std::vector<Index>{0, 2}));
  EXPECT_EQ(s.complement(), (std::vector<Index>{1, 3}));
  EXPECT_TRUE(s.contains(2));
  EXPECT_FALSE(s.contains(1));
}

TEST(GaussianAffinity, IdenticalFeaturesGiveUnitSimilarity) {
  const auto f = make_feature_table({{0.3, 0.2}, {0.3, 0.2}});
  const auto a = build_gaussian_affinity(f, 0.1);
  EXPECT_EQ(a(0, 1), 1.0);
  EXPECT_EQ(a(0, 0), 0.0);
}

TEST(GaussianAffinity, ScalarFeaturesHandEvaluated) {
  const auto f = make_feature_table({{0.0}, {1.0}, {2.0}});
  const auto a = build_gaussian_affinity(f, 1.0);
  EXPECT_NEAR(a(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(a(0, 2), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(a(1, 2), std::exp(-0.5), 1e-15);
  EXPECT_EQ(a(2, 0), a(0, 2));
}

TEST(GaussianAffinity, SelfTuningUsesProductOfScales) {
  const auto f = make_feature_table({{0.0}, {1.0}, {3.0}});
  const auto a = build_gaussian_affinity(f, SigmaStrategy{SelfTuning{1}});
  // sigmas [1, 1, 2]
  EXPECT_NEAR(a(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(a(1, 2), std::exp(-4.0 / 2.0), 1e-15);
  EXPECT_NEAR(a(0, 2), std::exp(-9.0 / 2.0), 1e-15);
}

TEST(GaussianAffinity, Errors) {
  EXPECT_THROW(make_feature_table({{0.0, 1.0}, {1.0}}), InvalidArgument);
  EXPECT_THROW(build_gaussian_affinity(make_feature_table({{0.0}}), 0.1), InvalidArgument);
  const auto f = make_feature_table({{0.0}, {1.0}});
  EXPECT_THROW(build_gaussian_affinity(f, 0.0), InvalidArgument);
  EXPECT_THROW(build_gaussian_affinity(f, SigmaStrategy{BestSigma{}}), InvalidArgument);
  EXPECT_THROW(build_gaussian_affinity(f, SigmaStrategy{SelfTuning{2}}), InvalidArgument);
}

TEST(GaussianAffinity, DuplicatePointsUnderSelfTuningAreFlooredWithWarning) {
  const auto f = make_feature_table({{1.0}, {1.0}, {1.0}});
  Diagnostics diag;
  const auto a = build_gaussian_affinity(f, SigmaStrategy{SelfTuning{1}}, &diag);
  EXPECT_FALSE(diag.empty());
  EXPECT_EQ(a(0, 1), 1.0);
}

TEST(SelfTuningSigmas, CollinearScalars) {
  const auto est = self_tuning_sigmas(make_feature_table({{0.0}, {1.0}, {3.0}}), 1);
  ASSERT_EQ(est.sigmas.size(), 3u);
  EXPECT_DOUBLE_EQ(est.sigmas[0], 1.0);
  EXPECT_DOUBLE_EQ(est.sigmas[1], 1.0);
  EXPECT_DOUBLE_EQ(est.sigmas[2], 2.0);
  EXPECT_FALSE(est.degenerate);
}

TEST(SelfTuningSigmas, IdenticalPointsAreDegenerate) {
  const auto est = self_tuning_sigmas(make_feature_table({{2.0, 2.0}, {2.0, 2.0}, {2.0, 2.0}}), 2);
  EXPECT_TRUE(est.degenerate);
  for (double s : est.sigmas) EXPECT_EQ(s, 0.0);
}

TEST(SelfTuningSigmas, MatchesExhaustiveSort) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> rows(10, std::vector<double>(2));
  for (auto& r : rows)
    for (double& v : r) v = u(rng);
  const auto est = self_tuning_sigmas(make_feature_table(rows), 3);
  for (Index i = 0; i < rows.size(); ++i) {
    std::vector<double> d;
    for (Index j = 0; j < rows.size(); ++j)
      if (j != i) d.push_back(std::hypot(rows[i][0] - rows[j][0], rows[i][1] - rows[j][1]));
    std::sort(d.begin(), d.end());
    EXPECT_NEAR(est.sigmas[i], (d[0] + d[1] + d[2]) / 3.0, 1e-14);
  }
  EXPECT_THROW(self_tuning_sigmas(make_feature_table(rows), 10), InvalidArgument);
  EXPECT_THROW(self_tuning_sigmas(make_feature_table(rows), 0), InvalidArgument);
}

TEST(LambdaMax, SmallCases) {
  const auto a = testing_support::toy_graph();
  EXPECT_EQ(lambda_max_principal_submatrix(a, ConstraintSet::all(8)), 0.0);
  std::vector<Index> all_but_one{0, 1, 2, 3, 4, 5, 6};
  EXPECT_EQ(lambda_max_principal_submatrix(a, ConstraintSet(all_but_one, 8)), 0.0);
  Matrix m = Matrix::Zero(3, 3);
  m(1, 2) = m(2, 1) = 0.7;
  EXPECT_NEAR(lambda_max_principal_submatrix(AffinityMatrix(m), ConstraintSet({0}, 3)), 0.7, 1e-12);
}

TEST(LambdaMax, RandomMatchesJacobiOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = testing_support::random_weighted(6, rng, 0.8);
    const ConstraintSet s(testing_support::random_subset(6, rng), 6);
    const auto rest = s.complement();
    const double oracle = jacobi_lambda_max(a.principal(rest).matrix());
    for (auto method : {EigenMethod::Dense, EigenMethod::Power}) {
      const double got = lambda_max_principal_submatrix(a, s, method);
      EXPECT_NEAR(got, oracle, 1e-9 * std::max(1.0, oracle));
    }
  }
}

TEST(LambdaMax, PowerIterationResidual) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto a = testing_support::random_weighted(12, rng, 0.5);
    const auto pair = largest_eigenpair(a.matrix(), EigenMethod::Power);
    const double r = pair.value;
    const double res = (a.matrix() * pair.vector - r * pair.vector).cwiseAbs().maxCoeff();
    EXPECT_LE(res, 1e-8 * std::max(1.0, r));
    EXPECT_NEAR(r, jacobi_lambda_max(a.matrix()), 1e-9 * std::max(1.0, r));
  }
}

TEST(LambdaMax, BipartitePatternDoesNotOscillate) {
  Matrix m = Matrix::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 2; j < 4; ++j) m(i, j) = m(j, i) = 1.0;
  const auto pair = largest_eigenpair(m, EigenMethod::Power);
  EXPECT_NEAR(pair.value, 2.0, 1e-9);
}

TEST(ChooseAlpha, Margins) {
  const auto a = testing_support::toy_graph();
  const ConstraintSet most(std::vector<Index>{0, 1, 2, 3, 4, 5, 6}, 8);
  EXPECT_DOUBLE_EQ(choose_alpha(a, most), 1e-4);
  Matrix m = Matrix::Zero(3, 3);
  m(1, 2) = m(2, 1) = 2.5;
  EXPECT_NEAR(choose_alpha(AffinityMatrix(m), ConstraintSet({0}, 3), 0.01), 2.51, 1e-12);
  EXPECT_THROW(choose_alpha(a, most, 0.0), InvalidArgument);
}

TEST(ChooseAlpha, ToyGraphExceedsComplementSpectrum) {
  const auto a = testing_support::toy_graph();
  const ConstraintSet s(testing_support::ids({5}), 8);
  const double oracle = jacobi_lambda_max(a.principal(s.complement()).matrix());
  EXPECT_GT(choose_alpha(a, s), oracle);
}

TEST(ChooseAlpha, ExceedsOracleOnRandomInstances) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const Index n = std::uniform_int_distribution<Index>(2, 12)(rng);
    const auto a = testing_support::random_weighted(n, rng);
    const ConstraintSet s(testing_support::random_subset(n, rng), n);
    const auto rest = s.complement();
    const double oracle = rest.empty() ? 0.0 : jacobi_lambda_max(a.principal(rest).matrix());
    EXPECT_GT(choose_alpha(a, s), oracle);
  }
}

TEST(Regularize, ThreeVertexHandApplied) {
  Matrix m(3, 3);
  m << 0, 1, 0.5, 1, 0, 0.25, 0.5, 0.25, 0;
  const auto w = regularize(AffinityMatrix(m), ConstraintSet({0}, 3), 2.0);
  const Matrix wm = w.matrix();
  EXPECT_EQ(wm(0, 0), 2.0);
  EXPECT_EQ(wm(1, 1), 0.0);
  EXPECT_EQ(wm(2, 2), 0.0);
  EXPECT_EQ(wm(0, 1), 3.0);
  EXPECT_EQ(wm(1, 2), 2.25);
  EXPECT_GE(wm.minCoeff(), 0.0);
  EXPECT_TRUE(wm.isApprox(wm.transpose(), 0.0));
  EXPECT_THROW(regularize(AffinityMatrix(m), ConstraintSet({0}, 3), 0.0), InvalidArgument);
}

TEST(Regularize, FullConstraintIsPlainShift) {
  const auto a = testing_support::toy_graph();
  const auto w = regularize(a, ConstraintSet::all(8), 0.3);
  const Matrix expected = a.matrix() + Matrix::Constant(8, 8, 0.3);
  EXPECT_TRUE(w.matrix().isApprox(expected, 0.0));
}

TEST(Regularize, ImplicitApplyMatchesMaterializedMatrix) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 20; ++t) {
    const auto a = testing_support::random_weighted(7, rng);
    const ConstraintSet s(testing_support::random_subset(7, rng), 7);
    const auto w = regularize(a, s, choose_alpha(a, s));
    EXPECT_GE(w.matrix().minCoeff(), 0.0);
    const Vector x = SimplexVector::barycenter(7).values();
    EXPECT_NEAR((w.apply(x) - w.matrix() * x).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  }
}

// Adding a constant to every payoff entry changes individual iterates but
// not the set of fixed points, nor the support of an iterate.
TEST(Regularize, ShiftPreservesFixedPointsAndSupports) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    const auto a = testing_support::random_weighted(6, rng);
    const ConstraintSet s(testing_support::random_subset(6, rng), 6);
    const double alpha = choose_alpha(a, s);
    const RegularizedPayoff w(a, s, alpha, alpha);
    const RegularizedPayoff shifted(a, s, alpha, alpha + 5.0);
    ReplicatorConfig cfg;
    cfg.record_trace = false;
    const auto sol = solve_from(w, SimplexVector::barycenter(6), cfg);
    const auto moved = replicator_step(shifted, sol.x);
    EXPECT_LE((moved.values() - sol.x.values()).cwiseAbs().maxCoeff(), 1e-9);
    const auto start = SimplexVector::normalized(Vector::Random(6).cwiseAbs());
    EXPECT_EQ(replicator_step(w, start).support(), replicator_step(shifted, start).support());
  }
}

TEST(GraphIo, DenseRoundTrip) {
  std::mt19937_64 rng(31);
  const auto a = testing_support::random_weighted(5, rng);
  std::stringstream ss;
  io::write_dense(ss, a);
  EXPECT_EQ(io::read_graph(ss), a);
}

TEST(GraphIo, EdgeListRoundTripAndComments) {
  const auto a = testing_support::toy_graph();
  std::stringstream ss;
  ss << "# toy graph\n";
  io::write_edge_list(ss, a);
  EXPECT_EQ(io::read_graph(ss), a);
}

TEST(GraphIo, EdgeListRejectsDuplicatesAndLoops) {
  std::istringstream dup("0 1 1\n1 0 0.5\n");
  EXPECT_THROW(io::read_edge_list(dup), ParseError);
  std::istringstream loop("0 0 1\n");
  EXPECT_THROW(io::read_edge_list(loop), ParseError);
  std::istringstream neg("0 1 -1\n");
  EXPECT_THROW(io::read_edge_list(neg), ParseError);
  std::istringstream ok("0 3 0.5\n");
  EXPECT_EQ(io::read_edge_list(ok, 5).size(), 5u);
}

TEST(GraphIo, DenseRejectsBadShapeAndAsymmetry) {
  std::istringstream shape("2\n0 1\n");
  EXPECT_THROW(io::read_dense(shape), ParseError);
  std::istringstream asym("2\n0 1\n0.5 0\n");
  EXPECT_THROW(io::read_dense(asym), ParseError);
  std::istringstream junk("2\n0 x\n1 0\n");
  EXPECT_THROW(io::read_dense(junk), ParseError);
  EXPECT_THROW(io::read_graph_file("/nonexistent/graph.txt"), NotFound);
}

TEST(GraphIo, FeatureCsvWithHeader) {
  std::istringstream in("r,g,b\n0.1,0.2,0.3\n0.4,0.5,0.6\n");
  const auto f = io::read_feature_csv(in);
  ASSERT_EQ(f.rows(), 2);
  ASSERT_EQ(f.cols(), 3);
  EXPECT_DOUBLE_EQ(f(1, 2), 0.6);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(io::read_feature_csv(ragged), ParseError);
}
