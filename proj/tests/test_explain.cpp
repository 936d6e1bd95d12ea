#include "oracles.hpp"
#include "xshift/explain.hpp"
#include "xshift/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace xshift {
namespace {

LinearModel linear(double intercept, std::initializer_list<double> a) {
  LinearModel m{intercept, Vector(static_cast<Eigen::Index>(a.size()))};
  Eigen::Index j = 0;
  for (double v : a) m.coefficients[j++] = v;
  return m;
}

DataMatrix rows(std::initializer_list<std::initializer_list<double>> r) {
  DataMatrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(ShapleyWeights, SumToOneOverCoalitionsPerFeature) {
  for (int p = 1; p <= 20; ++p) {
    const auto w = shapley_weights(p);
    // Sum over coalitions T not containing j: sum_s C(p-1, s) w[s] = 1.
    double total = 0.0;
    double binom = 1.0;
    for (int s = 0; s < p; ++s) {
      total += binom * w[static_cast<std::size_t>(s)];
      binom = binom * (p - 1 - s) / (s + 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << p;
  }
  EXPECT_THROW(shapley_weights(0), ConfigError);
  EXPECT_THROW(shapley_weights(21), ConfigError);
}

TEST(LinearIndependent, VanishesAtTheMean) {
  const auto m = linear(0.0, {2.0, 1.0});
  Vector mu(2);
  mu << 0.3, -0.7;
  const auto e = shap_linear_independent(m, rows({{0.3, -0.7}}), mu);
  EXPECT_EQ(e.values(0, 0), 0.0);
  EXPECT_EQ(e.values(0, 1), 0.0);
}

TEST(LinearIndependent, ClosedFormAndEfficiency) {
  const auto m = linear(0.0, {2.0, 1.0});
  const auto e = shap_linear_independent(m, rows({{1.0, 1.0}}), Vector::Zero(2));
  EXPECT_EQ(e.values(0, 0), 2.0);
  EXPECT_EQ(e.values(0, 1), 1.0);
  EXPECT_EQ(e.values.row(0).sum(), m.predict_row(std::vector<double>{1.0, 1.0}) - e.expected_value);
}

TEST(LinearIndependent, ExampleTwoColumnSpreadsSwap) {
  const auto task = posterior_linear_task(50000, 4);
  const TaskData d = make_task_data(task);
  const auto f = linear(0.0, {2.0, 1.0});
  const auto g = linear(0.0, {1.0, 2.0});
  const Vector mu = column_means(d.x_train);
  const auto sf = shap_linear_independent(f, d.x_train, mu).values;
  const auto sg = shap_linear_independent(g, d.x_train, mu).values;
  auto sd = [](const DataMatrix& m, Eigen::Index j) {
    const double mean = m.col(j).mean();
    return std::sqrt((m.col(j).array() - mean).square().sum() / static_cast<double>(m.rows() - 1));
  };
  EXPECT_NEAR(sd(sf, 0), 2.0, 0.03);
  EXPECT_NEAR(sd(sf, 1), 1.0, 0.015);
  EXPECT_NEAR(sd(sg, 0), 1.0, 0.015);
  EXPECT_NEAR(sd(sg, 1), 2.0, 0.03);
}

TEST(GaussianObservational, DiagonalCovarianceEqualsIndependent) {
  const auto m = linear(0.5, {1.5, -2.0, 0.7});
  GaussianSpec spec{Vector(3), Eigen::MatrixXd::Zero(3, 3)};
  spec.mean << 0.1, -0.2, 0.3;
  spec.covariance.diagonal() << 1.0, 2.0, 0.5;
  const DataMatrix x = sample_mvn(spec, 100, 3);
  const auto obs = shap_gaussian_observational(m, x, spec);
  const auto ind = shap_linear_independent(m, x, spec.mean);
  EXPECT_LT((obs.values - ind.values).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(obs.expected_value, ind.expected_value, 1e-12);
}

TEST(GaussianObservational, MatchesTwoFeatureHandFormula) {
  const double rho = -0.45, s1 = 1.3, s2 = 0.6, mu1 = 0.4, mu2 = -1.1, a = 1.7, b = -0.8;
  GaussianSpec spec = GaussianSpec::correlated_pair(rho, mu1, mu2);
  spec.covariance(0, 0) = s1 * s1;
  spec.covariance(1, 1) = s2 * s2;
  spec.covariance(0, 1) = spec.covariance(1, 0) = rho * s1 * s2;
  const auto m = linear(3.0, {a, b});
  const DataMatrix x = sample_mvn(spec, 50, 8);
  const auto e = shap_gaussian_observational(m, x, spec);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    EXPECT_NEAR(e.values(r, 0), oracle::two_feature_observational_s1(a, b, mu1, mu2, s1, s2, rho, x(r, 0), x(r, 1)),
                1e-10);
    EXPECT_NEAR(e.values.row(r).sum(), m.predict_row(row_span(x, r)) - e.expected_value, 1e-10);
  }
}

TEST(GaussianObservational, ExampleOnePointCheck) {
  // f = x1 + x2, unit variances, mu = 0, x = (1, 0): val({1}) = 1 + rho, val({2}) = 0,
  // so S1 = (1 + (1 + rho)) / 2 = 1 + rho / 2.
  const auto m = linear(0.0, {1.0, 1.0});
  const DataMatrix x = rows({{1.0, 0.0}});
  for (double rho : {0.2, -0.2, 0.5, 0.0}) {
    const double s1 = shap_gaussian_observational(m, x, GaussianSpec::correlated_pair(rho)).values(0, 0);
    EXPECT_NEAR(s1, 1.0 + rho / 2.0, 1e-10) << rho;
    EXPECT_NEAR(s1, oracle::two_feature_observational_s1(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, rho, 1.0, 0.0), 1e-12);
  }
  EXPECT_NEAR(shap_gaussian_observational(m, x, GaussianSpec::correlated_pair(0.2)).values(0, 0), 1.1, 1e-10);
  EXPECT_NEAR(shap_linear_independent(m, x, Vector::Zero(2)).values(0, 0), 1.0, 1e-10);
}

TEST(GaussianObservational, ErrorPaths) {
  const auto m = linear(0.0, {1.0, 1.0});
  EXPECT_THROW(shap_gaussian_observational(m, rows({{1.0, 0.0}}), GaussianSpec::correlated_pair(1.0)),
               NumericalError);
  EXPECT_THROW(shap_gaussian_observational(m, rows({{1.0, 0.0, 1.0}}), GaussianSpec::standard(3)), ConfigError);
}

TEST(Interventional, EnumerationMatchesPermutationOracle) {
  RandomStream rng(17);
  for (int p = 1; p <= 4; ++p) {
    const DataMatrix bg = sample_mvn(GaussianSpec::standard(p), 15, derive_seed(1, "bg", static_cast<std::uint64_t>(p)));
    const DataMatrix x = sample_mvn(GaussianSpec::standard(p), 5, derive_seed(1, "x", static_cast<std::uint64_t>(p)));
    FunctionModel f{[p](std::span<const double> z) {
                      double v = std::sin(z[0]);
                      for (int j = 1; j < p; ++j) v += z[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(j - 1)];
                      return v + (p > 2 ? std::max(z[2], 0.0) * z[0] : 0.0);
                    },
                    p};
    const auto e = shap_interventional(f, x, BackgroundSet(bg));
    const GbdtModel tree = oracle::random_ensemble(rng, p, 3, 2);
    const auto et = shap_interventional(tree, x, BackgroundSet(bg));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto phi = oracle::permutation_shapley(f, row_span(x, r), bg);
      const auto phit = oracle::permutation_shapley(tree, row_span(x, r), bg);
      for (int j = 0; j < p; ++j) {
        EXPECT_NEAR(e.values(r, j), phi[static_cast<std::size_t>(j)], 1e-10);
        EXPECT_NEAR(et.values(r, j), phit[static_cast<std::size_t>(j)], 1e-10);
      }
    }
  }
}

TEST(Interventional, TreeFastPathMatchesGenericEngine) {
  RandomStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + static_cast<int>(rng.below(4));
    const GbdtModel m = oracle::random_ensemble(rng, p, 4, 3);
    const DataMatrix bg = sample_mvn(GaussianSpec::standard(p), 40, rng.next_u64());
    const DataMatrix x = sample_mvn(GaussianSpec::standard(p), 10, rng.next_u64());
    FunctionModel generic{[&m](std::span<const double> z) { return m.predict_row(z); }, p};
    const auto fast = shap_interventional(m, x, BackgroundSet(bg));
    const auto slow = shap_interventional(generic, x, BackgroundSet(bg));
    EXPECT_LT((fast.values - slow.values).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(fast.expected_value, slow.expected_value, 1e-12);
  }
}

TEST(Interventional, TrainedTreeFastPathMatchesGenericEngine) {
  const TaskData d = make_task_data(unused_feature_task(2000, 3));
  const GbdtModel m = fit_gbdt(d.x_train, d.y_train);
  const BackgroundSet bg = make_background(d.x_train, 100, 1);
  FunctionModel generic{[&m](std::span<const double> z) { return m.predict_row(z); }, 3};
  const DataMatrix x = d.x_test.topRows(20);
  const auto fast = shap_interventional(m, x, bg);
  const auto slow = shap_interventional(generic, x, bg);
  EXPECT_LT((fast.values - slow.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Interventional, UnusedFeatureIsExactlyZero) {
  const TaskData d = make_task_data(unused_feature_task(3000, 4));
  const GbdtModel m = fit_gbdt(d.x_train, d.y_train);
  const BackgroundSet bg = make_background(d.x_train, 500, 2);
  if (!m.uses_feature(2)) {
    const auto e = shap_interventional(m, d.x_ood, bg);
    EXPECT_EQ(e.values.col(2).cwiseAbs().maxCoeff(), 0.0);
  }
  const auto lin = linear(1.0, {2.0, 1.0, 0.0});
  const auto el = shap_interventional(lin, d.x_ood.topRows(100), bg);
  EXPECT_EQ(el.values.col(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Interventional, LinearModelMatchesIndependentClosedForm) {
  const DataMatrix train = sample_mvn(GaussianSpec::correlated_pair(0.5), 300, 2);
  const auto m = linear(-0.3, {1.2, -0.4});
  const BackgroundSet bg(train);
  const DataMatrix x = sample_mvn(GaussianSpec::standard(2), 30, 3);
  const auto e = shap_interventional(m, x, bg);
  const auto c = shap_linear_independent(m, x, bg.means);
  EXPECT_LT((e.values - c.values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Interventional, SymmetricModelGivesEqualAttributionsOnDiagonal) {
  const DataMatrix bg = sample_mvn(GaussianSpec::standard(2), 200, 6);
  DataMatrix sym(400, 2);
  sym.topRows(200) = bg;
  sym.bottomRows(200).col(0) = bg.col(1);
  sym.bottomRows(200).col(1) = bg.col(0);
  FunctionModel f{[](std::span<const double> z) { return z[0] + z[1] + z[0] * z[1]; }, 2};
  const DataMatrix x = rows({{0.5, 0.5}, {-1.0, -1.0}, {2.0, 2.0}});
  const auto e = shap_interventional(f, x, BackgroundSet(sym));
  for (Eigen::Index r = 0; r < x.rows(); ++r) EXPECT_NEAR(e.values(r, 0), e.values(r, 1), 1e-12);
}

TEST(Interventional, ParallelIsBitIdenticalToSequential) {
  const TaskData d = make_task_data(multivariate_shift_task(3000, 2));
  const GbdtModel m = fit_gbdt(d.x_train, d.y_train);
  const BackgroundSet bg = make_background(d.x_train, 300, 1);
  const auto seq = shap_interventional(m, d.x_ood, bg, 1);
  for (int t : {2, 3, 7}) EXPECT_EQ(shap_interventional(m, d.x_ood, bg, t).values, seq.values);
}

TEST(Interventional, CostGuard) {
  FunctionModel f{[](std::span<const double>) { return 0.0; }, 16};
  const DataMatrix x = DataMatrix::Zero(1, 16);
  try {
    shap_interventional(f, x, BackgroundSet(x));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("subset"), std::string::npos);
  }
}

TEST(Background, CapAndDeterminism) {
  const DataMatrix x = sample_mvn(GaussianSpec::standard(2), 5000, 1);
  const auto a = make_background(x, 2000, 9);
  const auto b = make_background(x, 2000, 9);
  EXPECT_EQ(a.rows.rows(), 2000);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_NE(make_background(x, 2000, 10).rows, a.rows);
  EXPECT_EQ(make_background(x.topRows(10), 2000, 9).rows, x.topRows(10));
  EXPECT_THROW(BackgroundSet(DataMatrix(0, 2)), ConfigError);
}

TEST(Dispatch, EngineSelection) {
  const auto m = linear(0.0, {1.0, 1.0});
  const DataMatrix x = rows({{1.0, 0.0}});
  ExplainConfig cfg;
  EXPECT_THROW(explain(m, x, cfg), ConfigError);
  cfg.spec = GaussianSpec::correlated_pair(0.2);
  EXPECT_EQ(explain(m, x, cfg).method, ExplainMethod::GaussianObservational);
  cfg.spec.reset();
  cfg.background = BackgroundSet(x);
  EXPECT_EQ(explain(m, x, cfg).method, ExplainMethod::InterventionalEnumeration);

  GbdtModel g;
  g.n_features = 2;
  ExplainConfig gcfg;
  EXPECT_THROW(explain(g, x, gcfg), ConfigError);
  gcfg.background = BackgroundSet(x);
  EXPECT_EQ(explain(g, x, gcfg).method, ExplainMethod::InterventionalEnumeration);
  gcfg.engine = EngineChoice::GaussianObservational;
  EXPECT_THROW(explain(g, x, gcfg), ConfigError);
}

}  // namespace
}  // namespace xshift
