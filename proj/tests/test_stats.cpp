#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "sim.hpp"
#include "smellstab/stats.hpp"

using namespace smellstab;
using namespace smellstab::testing;

namespace {

Dataset tiny_dataset() {
  Dataset d;
  d.project = {"a", "a", "b", "b"};
  d.cls = {"A1", "A2", "B1", "B2"};
  d.columns = {{"IsSmelly", {1, 0, 0, 1}},   {"#SmellFoc", {2, 0, 0, 1}},  {"VarSmellFoc", {1, 0, 0, 1}},
               {"HasSmellEff", {1, 1, 0, 0}}, {"#SmellEff", {3, 1, 0, 0}},  {"VarSmellEff", {2, 1, 0, 0}},
               {"HasEffCoup", {1, 0, 0, 0}},  {"HasEffInt", {1, 0, 0, 0}},  {"#EffSmellInt", {1, 0, 0, 0}},
               {"EffIntInten", {2, 0, 0, 0}}, {"ClSize", {10, 0, 5, 7}},    {"#EffNei", {2, 1, 0, 3}},
               {"ChF", {3, 1, 0, 2}},         {"ChS", {30, 4, 0, 9}}};
  return d;
}

ModelSpec spec_of(const std::string& id, const std::string& dv) {
  for (const auto& s : hypothesis_specs())
    if (s.id == id && s.dv == dv) return s;
  throw std::runtime_error("no spec " + id);
}

double brute_bh(const std::vector<double>& p, std::size_t i) {
  // adj_i = min over j with p_j >= p_i of m p_j / rank_j, capped at 1.
  const std::size_t m = p.size();
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const auto rank_of = [&](std::size_t k) {
    // Largest rank among ties so that the step-up minimum is attained.
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), p[k]) - sorted.begin());
  };
  double best = 1.0;
  for (std::size_t j = 0; j < m; ++j)
    if (p[j] >= p[i]) best = std::min(best, static_cast<double>(m) * p[j] / rank_of(j));
  return best;
}

}  // namespace

TEST(Specs, SeventeenHypothesesTimesTwo) {
  const auto specs = hypothesis_specs();
  ASSERT_EQ(specs.size(), 34u);
  std::map<int, int> fam;
  for (const auto& s : specs) {
    ++fam[s.family];
    EXPECT_EQ(s.direction, 1);
  }
  EXPECT_EQ(fam[1], 6);
  EXPECT_EQ(fam[2], 12);
  EXPECT_EQ(fam[3], 4);
  EXPECT_EQ(fam[4], 12);
}

TEST(Specs, ControlsMatchTable) {
  EXPECT_EQ(spec_of("H1.1", "ChF").cvs, (std::vector<std::string>{"ClSize", "#EffNei"}));
  EXPECT_EQ(spec_of("H3.2", "ChS").cvs, (std::vector<std::string>{"ClSize", "#EffNei", "IsSmelly", "HasSmellEff"}));
  EXPECT_EQ(spec_of("H4.5", "ChF").cvs, (std::vector<std::string>{"ClSize", "#EffNei", "#SmellFoc", "#SmellEff"}));
  EXPECT_EQ(spec_of("H4.3", "ChF").iv, "EffIntInten");
  EXPECT_EQ(spec_of("H2.4", "ChF").population, Population::NonSmelly);
  EXPECT_EQ(spec_of("H2.1", "ChF").population, Population::All);
  EXPECT_EQ(spec_of("H2.6", "ChS").iv, "VarSmellEff");
}

TEST(Design, LogTransformAndPopulation) {
  const auto data = tiny_dataset();
  auto d = prepare_design(data, spec_of("H1.2", "ChF"));
  ASSERT_EQ(d.names, (std::vector<std::string>{"(Intercept)", "#SmellFoc", "ClSize", "#EffNei"}));
  EXPECT_EQ(d.X(1, 1), 0.0);  // log(1 + 0) = 0
  EXPECT_DOUBLE_EQ(d.X(0, 1), std::log(3.0));
  EXPECT_DOUBLE_EQ(d.X(0, 2), std::log(11.0));
  EXPECT_EQ(d.groups(), 2u);

  auto h24 = prepare_design(data, spec_of("H2.4", "ChF"));
  EXPECT_EQ(h24.n(), 2u);  // IsSmelly = false rows only
  EXPECT_EQ(h24.X(0, 1), 1.0);  // binary flag untransformed

  auto h32 = prepare_design(data, spec_of("H3.2", "ChF"));
  EXPECT_EQ(h32.names,
            (std::vector<std::string>{"(Intercept)", "HasEffCoup", "ClSize", "#EffNei", "IsSmelly", "HasSmellEff"}));
}

TEST(Design, EmptyPopulationIsError) {
  auto data = tiny_dataset();
  data.columns["IsSmelly"] = {1, 1, 1, 1};
  EXPECT_THROW(prepare_design(data, spec_of("H2.5", "ChS")), StatsError);
}

TEST(Poisson, AllZeroResponseFlagged) {
  Design d;
  d.y = Eigen::VectorXd::Zero(20);
  d.X = Eigen::MatrixXd::Ones(20, 1);
  d.names = {"(Intercept)"};
  d.binary = {false};
  d.group.assign(20, 0);
  d.group_names = {"g"};
  auto f = fit_poisson(d);
  EXPECT_FALSE(f.converged);
  EXPECT_FALSE(f.message.empty());
}

TEST(Poisson, InterceptOnlyIsLogMean) {
  std::mt19937_64 rng(3);
  auto d = simulate_design(rng, 1, 500, {std::log(3.0)}, 0.0, kPoissonTheta);
  auto f = fit_poisson(d);
  ASSERT_TRUE(f.converged);
  EXPECT_NEAR(f.beta[0], std::log(d.y.mean()), 1e-9);
  EXPECT_NEAR(f.beta[0], std::log(3.0), 0.1);
}

TEST(Poisson, RecoversSimulatedBeta) {
  std::mt19937_64 rng(11);
  const std::vector<double> beta = {0.4, 0.3, -0.2};
  auto d = simulate_design(rng, 1, 2000, beta, 0.0, kPoissonTheta);
  auto f = fit_poisson(d);
  ASSERT_TRUE(f.converged);
  for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(f.beta[j] - beta[static_cast<std::size_t>(j)]), 3 * f.se[j]) << j;
}

TEST(Dispersion, EquidispersedAndOverdispersed) {
  std::mt19937_64 rng(2024);
  auto pois = simulate_design(rng, 1, 5000, {1.0, 0.3}, 0.0, kPoissonTheta);
  const double r1 = dispersion_statistic(fit_poisson(pois), pois);
  EXPECT_GE(r1, 0.9);
  EXPECT_LE(r1, 1.1);
  auto nb = simulate_design(rng, 1, 5000, {1.0, 0.3}, 0.0, 1.5);
  EXPECT_GT(dispersion_statistic(fit_poisson(nb), nb), 1.5);
}

TEST(Dispersion, ZeroResidualToy) {
  Design d;
  d.y = Eigen::VectorXd::Constant(6, 4.0);
  d.X = Eigen::MatrixXd::Ones(6, 1);
  d.names = {"(Intercept)"};
  d.binary = {false};
  d.group.assign(6, 0);
  d.group_names = {"g"};
  auto f = fit_poisson(d);
  ASSERT_TRUE(f.converged);
  EXPECT_NEAR(dispersion_statistic(f, d), 0.0, 1e-12);
  Design one = d;
  one.y = one.y.head(1);
  one.X = one.X.topRows(1);
  one.group = {0};
  EXPECT_THROW(dispersion_statistic(fit_poisson(one), one), StatsError);
}

TEST(NegBin, LaplaceGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto d = simulate_design(rng, 6, 40, {0.5, -0.3}, 0.25, 1.5);
  Eigen::VectorXd x(4);
  x << 0.4, -0.2, std::log(2.0), std::log(0.3);
  Eigen::VectorXd g;
  negbin_laplace_loglik(d, x, &g);
  for (int j = 0; j < 4; ++j) {
    const double h = 1e-6;
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (negbin_laplace_loglik(d, xp, nullptr) - negbin_laplace_loglik(d, xm, nullptr)) / (2 * h);
    EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd))) << j;
  }
  // Near the optimum as well.
  auto f = fit_negbin_random_intercept(d);
  ASSERT_TRUE(f.converged);
  Eigen::VectorXd opt(4);
  opt << f.beta[0], f.beta[1], std::log(f.theta), std::log(std::max(f.sigma2, 1e-6));
  opt.array() += 0.01;
  negbin_laplace_loglik(d, opt, &g);
  for (int j = 0; j < 4; ++j) {
    const double h = 1e-6;
    Eigen::VectorXd xp = opt, xm = opt;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (negbin_laplace_loglik(d, xp, nullptr) - negbin_laplace_loglik(d, xm, nullptr)) / (2 * h);
    EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd))) << j;
  }
}

TEST(NegBin, RecoversGlmmParameters) {
  std::mt19937_64 rng(20260101);
  const std::vector<double> beta = {0.5, -0.3};
  auto d = simulate_design(rng, 20, 200, beta, 0.25, 1.5);
  const auto t0 = std::chrono::steady_clock::now();
  auto f = fit_negbin_random_intercept(d);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_TRUE(f.converged) << f.message;
  for (int j = 0; j < 2; ++j) EXPECT_LT(std::abs(f.beta[j] - beta[static_cast<std::size_t>(j)]), 3 * f.se[j]) << j;
  EXPECT_GE(f.sigma2, 0.1);
  EXPECT_LE(f.sigma2, 0.5);
  EXPECT_NEAR(f.theta, 1.5, 0.3);
  EXPECT_LT(secs, 60.0);
}

TEST(NegBin, ZeroVarianceSimulation) {
  std::mt19937_64 rng(77);
  auto d = simulate_design(rng, 10, 100, {0.5, -0.3}, 0.0, 1.5);
  auto f = fit_negbin_random_intercept(d);
  ASSERT_TRUE(f.converged) << f.message;
  EXPECT_LT(f.sigma2, 0.05);
}

TEST(NegBin, PoissonLimitMatchesPoissonFit) {
  std::mt19937_64 rng(8);
  auto d = simulate_design(rng, 1, 800, {0.7, 0.25}, 0.0, kPoissonTheta);
  auto pois = fit_poisson(d);
  NegBinOptions opt;
  opt.random_intercept = false;
  opt.fixed_theta = 1e9;
  auto nb = fit_negbin_random_intercept(d, opt);
  ASSERT_TRUE(nb.converged) << nb.message;
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(nb.beta[j], pois.beta[j], 1e-4);

  auto dg = simulate_design(rng, 8, 100, {0.7, 0.25}, 0.0, kPoissonTheta);
  auto full = fit_negbin_random_intercept(dg);
  auto p2 = fit_poisson(dg);
  ASSERT_TRUE(full.converged) << full.message;
  EXPECT_LT(std::abs(full.loglik - p2.loglik), 2.0);
}

TEST(NegBin, SingleProjectFallsBack) {
  std::mt19937_64 rng(9);
  auto d = simulate_design(rng, 1, 300, {0.5, 0.2}, 0.0, 2.0);
  auto f = fit_negbin_random_intercept(d);
  EXPECT_TRUE(f.converged);
  EXPECT_FALSE(f.random_intercept);
  EXPECT_FALSE(f.warnings.empty());
}

TEST(OneSided, Examples) {
  FitResult f;
  f.names = {"(Intercept)", "x"};
  f.beta = Eigen::Vector2d(0.0, 0.0);
  f.se = Eigen::Vector2d(1.0, 1.0);
  EXPECT_DOUBLE_EQ(one_sided_p(f, "x", 1), 0.5);
  f.beta[1] = 1.6448536269514722;
  EXPECT_NEAR(one_sided_p(f, "x", 1), 0.05, 1e-12);
  f.beta[1] = -9.0;
  EXPECT_GT(one_sided_p(f, "x", 1), 1 - 1e-12);
  EXPECT_THROW(one_sided_p(f, "missing", 1), StatsError);
}

TEST(BH, Examples) {
  EXPECT_EQ(bh_adjust({0.01, 0.02, 0.03, 0.04}), (std::vector<double>{0.04, 0.04, 0.04, 0.04}));
  EXPECT_EQ(bh_adjust({0.3}), (std::vector<double>{0.3}));
  EXPECT_EQ(bh_adjust({1, 1, 1}), (std::vector<double>{1, 1, 1}));
  const auto tied = bh_adjust({0.04, 0.04, 0.04, 0.04});
  for (double v : tied) {
    EXPECT_NEAR(v, 0.04, 1e-15);
    EXPECT_EQ(verdict_rule(true, 0.2, 1, v), Verdict::Accepted);
  }
  EXPECT_THROW(bh_adjust({}), StatsError);
  EXPECT_THROW(bh_adjust({0.2, 1.5}), StatsError);
}

TEST(BH, OracleAndMonotonicity) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = std::vector<std::size_t>{4, 6, 12}[trial % 3];
    std::vector<double> p(m);
    for (auto& v : p) v = trial % 5 == 0 ? std::round(u(rng) * 10) / 10 : u(rng);  // include ties
    const auto adj = bh_adjust(p);
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(adj[i], brute_bh(p, i), 1e-12);
    auto q = p;
    const auto k = rng() % m;
    q[k] = std::min(1.0, q[k] + u(rng) * 0.2);
    const auto adj2 = bh_adjust(q);
    for (std::size_t i = 0; i < m; ++i) EXPECT_GE(adj2[i], adj[i] - 1e-15);
  }
}

TEST(Effects, IdentitiesAndToy) {
  Design d;
  d.X.resize(3, 2);
  d.X << 1, 0, 1, 1, 1, 0;
  d.y = Eigen::Vector3d(1, 2, 3);
  d.names = {"(Intercept)", "flag"};
  d.binary = {false, true};
  d.group = {0, 0, 1};
  d.group_names = {"a", "b"};
  FitResult f;
  f.names = d.names;
  f.beta = Eigen::Vector2d(0.1, std::log(2.0));
  f.random_effects = Eigen::Vector2d(0.0, 0.5);
  f.mu = Eigen::Vector3d(std::exp(0.1), std::exp(0.1 + std::log(2.0)), std::exp(0.6));
  auto e = effect_sizes(f, d);
  EXPECT_DOUBLE_EQ(e["flag"].irr, 2.0);
  // Rows: exp(0.1) -> 2 exp(0.1); same; exp(0.6) -> 2 exp(0.6). Mean difference:
  const double hand = (std::exp(0.1) + std::exp(0.1) + std::exp(0.6)) / 3.0;
  EXPECT_NEAR(e["flag"].ame, hand, 1e-12);
  f.beta[1] = 0.0;
  e = effect_sizes(f, d);
  EXPECT_EQ(e["flag"].irr, 1.0);
  EXPECT_EQ(e["flag"].ame, 0.0);
  for (double b : {-1.3, 0.0, 0.2, 2.5}) EXPECT_NEAR(std::exp(b) * std::exp(-b), 1.0, 1e-15);
}

TEST(Effects, ContinuousAmeMatchesFiniteDifference) {
  std::mt19937_64 rng(31);
  auto d = simulate_design(rng, 5, 60, {0.3, 0.4}, 0.2, 2.0);
  auto f = fit_negbin_random_intercept(d);
  ASSERT_TRUE(f.converged);
  const double h = 1e-5;
  const double fd = (mean_prediction(f, d, 1, std::nullopt, h) - mean_prediction(f, d, 1, std::nullopt, -h)) / (2 * h);
  const double ame = effect_sizes(f, d)["x1"].ame;
  EXPECT_NEAR(ame, fd, 1e-6 * std::abs(fd));
}

TEST(Quality, McFadden) {
  FitResult full, null;
  full.loglik = -900;
  null.loglik = -1000;
  EXPECT_NEAR(fit_quality(full, null).mcfadden_r2, 0.1, 1e-15);
  EXPECT_EQ(fit_quality(null, null).mcfadden_r2, 0.0);
  FitResult zero;
  zero.loglik = 0;
  EXPECT_THROW(fit_quality(full, zero), StatsError);

  std::mt19937_64 rng(12);
  auto strong = simulate_design(rng, 6, 100, {0.2, 1.0}, 0.1, 2.0);
  auto noise = simulate_design(rng, 6, 100, {0.2, 0.0}, 0.1, 2.0);
  auto r2 = [](const Design& d) {
    return fit_quality(fit_negbin_random_intercept(d), fit_negbin_random_intercept(null_design(d))).mcfadden_r2;
  };
  const double rs = r2(strong), rn = r2(noise);
  EXPECT_GT(rs, rn);
  EXPECT_GE(rn, 0.0);
  EXPECT_LT(rs, 1.0);
}

TEST(Verdict, PureFunctionOfSignAndAdjustedP) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double beta = u(rng), p = std::abs(u(rng));
    const auto v = verdict_rule(true, beta, 1, p);
    EXPECT_EQ(v == Verdict::Accepted, beta > 0 && p < 0.05);
    EXPECT_EQ(verdict_rule(false, beta, 1, p), Verdict::Inconclusive);
  }
}

TEST(Residuals, ApproximatelyStandardNormal) {
  std::mt19937_64 rng(13);
  auto d = simulate_design(rng, 8, 150, {1.0, 0.3}, 0.2, 2.0);
  auto f = fit_negbin_random_intercept(d);
  ASSERT_TRUE(f.converged);
  auto r = quantile_residuals(f, d, 1);
  double m = 0, v = 0;
  for (double x : r) m += x;
  m /= static_cast<double>(r.size());
  for (double x : r) v += (x - m) * (x - m);
  v /= static_cast<double>(r.size() - 1);
  EXPECT_NEAR(m, 0.0, 0.1);
  EXPECT_NEAR(v, 1.0, 0.15);
  EXPECT_EQ(quantile_residuals(f, d, 1), r);
}

TEST(Suite, PlantedSignalAccepted) {
  std::mt19937_64 rng(21);
  SuiteSim s;
  s.planted_smellfoc_chf = 0.8;
  auto data = simulate_suite_dataset(rng, s);
  auto res = run_hypothesis_suite(data);
  ASSERT_EQ(res.rows.size(), 34u);
  for (const auto& r : res.rows)
    if (r.spec.id == "H1.2" && r.spec.dv == "ChF") {
      EXPECT_TRUE(r.converged) << r.message;
      EXPECT_EQ(r.verdict, Verdict::Accepted) << r.p_bh;
    }
  const auto text = results_to_csv(res);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 35);
}

TEST(Suite, NonConvergedIsInconclusive) {
  std::mt19937_64 rng(22);
  auto data = simulate_suite_dataset(rng, {});
  std::fill(data.columns["HasEffInt"].begin(), data.columns["HasEffInt"].end(), 0.0);
  auto res = run_hypothesis_suite(data);
  for (const auto& r : res.rows)
    if (r.spec.iv == "HasEffInt") {
      EXPECT_EQ(r.verdict, Verdict::Inconclusive);
      EXPECT_EQ(r.p_raw, 1.0);
    }
}
