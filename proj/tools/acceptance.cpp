// Acceptance runner: one PASS/FAIL line per criterion. Tolerances, trial
// counts, seeds and time budgets are pinned below. Exit status is the number
// of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dependency_fixtures.hpp"
#include "git_fixture.hpp"
#include "interaction_fixtures.hpp"
#include "pipeline_fixture.hpp"
#include "sim.hpp"
#include "smell_fixtures.hpp"
#include "smellstab/dependency_graph.hpp"
#include "smellstab/neighborhood.hpp"
#include "smellstab/pipeline.hpp"
#include "smellstab/smells.hpp"
#include "smellstab/stats.hpp"
#include "test_support.hpp"

using namespace smellstab;
using namespace smellstab::testing;

namespace {

// Time budgets in seconds.
constexpr double kBudgetInteraction = 1.0;
constexpr double kBudgetOracle = 30.0;
constexpr double kBudgetMining = 10.0;
constexpr double kBudgetRecovery = 60.0;
constexpr double kBudgetFalsePositive = 600.0;

constexpr int kOracleCorpora = 50;
constexpr int kOracleMaxClasses = 10;
constexpr double kRecoverySeMultiple = 3.0;
constexpr double kSigma2Low = 0.1, kSigma2High = 0.5;
constexpr double kEquiLow = 0.9, kEquiHigh = 1.1, kOverMin = 1.5;
constexpr int kDispersionN = 5000;
constexpr int kBhTrials = 1000;
constexpr double kBhTol = 1e-12;
constexpr double kAmeRelTol = 1e-6;
constexpr int kNoiseDatasets = 200;
constexpr double kMaxFalseAcceptance = 0.07;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

struct World {
  SourceCorpus corpus;
  DependencyGraph graph;
  std::vector<SmellInstance> smells;
};

World detected(const std::map<std::string, std::string>& files) {
  World w{corpus_of(files), {}, {}};
  w.graph = extract_dependencies(w.corpus);
  w.smells = detect_smells(w.corpus, w.graph, ThresholdConfig::defaults()).instances;
  return w;
}

ClassObservation observation_of(const World& w, const std::string& focal) {
  for (const auto& o : build_observations(w.corpus, w.graph, w.smells))
    if (o.focal == focal) return o;
  throw std::runtime_error("no observation for " + focal);
}

Outcome interaction_scenario() {
  const auto t0 = Clock::now();
  const auto a = observation_of(detected(interaction_sources(false)), "C1");
  const auto b = observation_of(detected(interaction_sources(true)), "C1");
  const double secs = since(t0);
  const bool ok_a = a.has_eff_coup && !a.has_eff_int;
  const bool ok_b = b.has_eff_coup && b.has_eff_int && b.n_eff_smell_int == 1 && b.eff_int_inten == 1;
  return {ok_a && ok_b && secs < kBudgetInteraction,
          "A=(" + std::to_string(a.has_eff_coup) + "," + std::to_string(a.has_eff_int) + ") B=(" +
              std::to_string(b.has_eff_coup) + "," + std::to_string(b.has_eff_int) + "," +
              std::to_string(b.n_eff_smell_int) + "," + std::to_string(b.eff_int_inten) + ") " + fmt(secs) + "s"};
}

Outcome neighbor_scenario() {
  const auto o = observation_of(detected(neighbor_sources()), "C");
  return {o.n_eff_nei == 2, "#EffNei=" + std::to_string(o.n_eff_nei)};
}

Outcome interaction_oracle_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261016);
  int mismatches = 0;
  std::size_t focals = 0, nonzero = 0;
  for (int trial = 0; trial < kOracleCorpora; ++trial) {
    const int classes = 2 + static_cast<int>(rng() % (kOracleMaxClasses - 1));
    World w{corpus_of(random_corpus(rng, classes)), {}, {}};
    w.graph = extract_dependencies(w.corpus);
    w.smells = random_smells(rng, w.corpus);
    for (auto focal : w.corpus.focal_classes()) {
      const auto got = efferent_interactions(focal, w.graph, w.corpus, w.smells);
      const auto want = interaction_oracle(w.corpus, w.graph, w.smells, focal);
      ++focals;
      if (got.any) ++nonzero;
      if (got.pairs != want.first || got.intensity != want.second) ++mismatches;
    }
  }
  const double secs = since(t0);
  return {mismatches == 0 && secs < kBudgetOracle,
          std::to_string(mismatches) + " mismatches over " + std::to_string(focals) + " focal classes (" +
              std::to_string(nonzero) + " with interactions) " + fmt(secs) + "s"};
}

Outcome smell_strategies() {
  int bad = 0;
  std::string failed;
  for (auto s : kAllSmells) {
    for (bool target : {true, false}) {
      const auto f = make_smell_fixture(s, target);
      const auto w = detected(f.sources);
      std::set<std::pair<std::string, std::string>> got, want;
      for (const auto& i : w.smells) got.emplace(std::string(to_string(i.smell)), w.corpus.id(i.host).display());
      if (target) {
        for (const auto& h : f.hosts) want.emplace(std::string(to_string(s)), h);
        for (const auto& [smell, hosts] : f.implied)
          for (const auto& h : hosts) want.emplace(smell, h);
      }
      if (got != want) {
        ++bad;
        failed += " " + std::string(to_string(s)) + (target ? "/target" : "/near-miss");
      }
    }
  }
  return {bad == 0, std::to_string(20 - bad) + "/20 fixtures exact" + failed};
}

Outcome dependency_coverage() {
  const auto c = corpus_of(all_ten_relations_sources());
  const auto g = extract_dependencies(c);
  const auto unit = ref_of(c, "p.Src");
  std::set<std::tuple<std::string, std::string, std::string>> got;
  for (const auto& e : g.edges) {
    if (e.is_external() || analysis_unit(c, e.source) != unit) continue;
    got.emplace(std::string(to_string(e.relation)), c.id(e.source).display(), c.id(e.target.ref()).display());
  }
  const auto want = all_ten_relations_edges();
  return {got == want, std::to_string(got.size()) + " edges, expected " + std::to_string(want.size())};
}

Outcome mining_protocol() {
  const auto t0 = Clock::now();
  FixtureRepo repo;
  const auto fx = build_mining_fixture(repo);
  IngestOptions opts;
  opts.project = "fixture";
  const auto corpus = ingest_sources(mining_snapshot_sources(), fx.snapshot, opts);
  const auto h = mine_history(repo.git(), corpus, fx.snapshot, "main");
  auto outcomes = h.outcomes;
  std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) { return a.focal < b.focal; });
  std::vector<std::pair<std::string, LineageStatus>> statuses;
  for (const auto& l : h.lineages) statuses.emplace_back(corpus.id(l.ref).display(), l.status);
  std::sort(statuses.begin(), statuses.end());
  const double secs = since(t0);
  const bool ok = outcomes == fx.expected && statuses == fx.statuses && h.commits.size() == fx.window_commits;
  return {ok && secs < kBudgetMining, std::to_string(h.commits.size()) + " window commits, " +
                                          std::to_string(outcomes.size()) + " outcome rows, " +
                                          std::to_string(statuses.size()) + " lineages " + fmt(secs) + "s"};
}

Outcome glmm_recovery() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20260101);
  const std::vector<double> beta = {0.5, -0.3};
  const auto d = simulate_design(rng, 20, 200, beta, 0.25, 1.5);
  const auto f = fit_negbin_random_intercept(d);
  const double secs = since(t0);
  bool ok = f.converged;
  for (int j = 0; j < 2; ++j)
    ok = ok && std::abs(f.beta[j] - beta[static_cast<std::size_t>(j)]) < kRecoverySeMultiple * f.se[j];
  ok = ok && f.sigma2 >= kSigma2Low && f.sigma2 <= kSigma2High && secs < kBudgetRecovery;
  return {ok, "beta=(" + fmt(f.beta[0]) + "," + fmt(f.beta[1]) + ") se=(" + fmt(f.se[0]) + "," + fmt(f.se[1]) +
                  ") sigma2=" + fmt(f.sigma2) + " theta=" + fmt(f.theta) + " " + fmt(secs) + "s"};
}

Outcome dispersion() {
  std::mt19937_64 rng(2024);
  const auto pois = simulate_design(rng, 1, kDispersionN, {1.0, 0.3}, 0.0, kPoissonTheta);
  const double r1 = dispersion_statistic(fit_poisson(pois), pois);
  const auto nb = simulate_design(rng, 1, kDispersionN, {1.0, 0.3}, 0.0, 1.5);
  const double r2 = dispersion_statistic(fit_poisson(nb), nb);
  return {r1 >= kEquiLow && r1 <= kEquiHigh && r2 > kOverMin, "equidispersed=" + fmt(r1) + " overdispersed=" + fmt(r2)};
}

// Step-up oracle: adj_i = min over p_j >= p_i of m p_j / rank_j, capped at 1.
double brute_bh(const std::vector<double>& p, std::size_t i) {
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  double best = 1.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] < p[i]) continue;
    const double rank = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), p[j]) - sorted.begin());
    best = std::min(best, static_cast<double>(p.size()) * p[j] / rank);
  }
  return best;
}

Outcome bh() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  int monotone_violations = 0;
  for (int trial = 0; trial < kBhTrials; ++trial) {
    const std::size_t m = std::vector<std::size_t>{4, 6, 12}[static_cast<std::size_t>(trial % 3)];
    std::vector<double> p(m);
    for (auto& v : p) v = trial % 5 == 0 ? std::round(u(rng) * 10) / 10 : u(rng);
    const auto adj = bh_adjust(p);
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(adj[i] - brute_bh(p, i)));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (p[i] <= p[j] && adj[i] > adj[j] + kBhTol) ++monotone_violations;
  }
  return {worst <= kBhTol && monotone_violations == 0,
          "max |adj - oracle|=" + fmt(worst) + ", monotonicity violations=" + std::to_string(monotone_violations)};
}

Outcome effects() {
  std::mt19937_64 rng(31);
  const auto d = simulate_design(rng, 5, 60, {0.3, 0.4}, 0.2, 2.0);
  const auto f = fit_negbin_random_intercept(d);
  const auto e = effect_sizes(f, d);
  const bool irr_exact = e.at("x1").irr == std::exp(f.beta[1]);
  const double h = 1e-5;
  const double fd = (mean_prediction(f, d, 1, std::nullopt, h) - mean_prediction(f, d, 1, std::nullopt, -h)) / (2 * h);
  const double rel = std::abs(e.at("x1").ame - fd) / std::abs(fd);
  const auto null_fit = fit_negbin_random_intercept(null_design(d));
  const double r2_null = fit_quality(null_fit, null_fit).mcfadden_r2;
  return {f.converged && irr_exact && rel <= kAmeRelTol && r2_null == 0.0,
          "IRR exact=" + std::to_string(irr_exact) + " AME rel err=" + fmt(rel) + " null R2=" + fmt(r2_null)};
}

Outcome false_positive_control() {
  const auto t0 = Clock::now();
  std::map<std::string, int> accepted;
  std::mt19937_64 rng(777);
  for (int k = 0; k < kNoiseDatasets; ++k) {
    const auto res = run_hypothesis_suite(simulate_suite_dataset(rng, SuiteSim{}));
    for (const auto& r : res.rows)
      if (r.verdict == Verdict::Accepted) ++accepted[r.spec.label()];
  }
  double worst = 0;
  std::string worst_label = "none";
  for (const auto& [label, n] : accepted) {
    const double rate = static_cast<double>(n) / kNoiseDatasets;
    if (rate > worst) {
      worst = rate;
      worst_label = label;
    }
  }
  std::mt19937_64 planted_rng(21);
  SuiteSim s;
  s.planted_smellfoc_chf = 0.8;
  bool planted = false;
  for (const auto& r : run_hypothesis_suite(simulate_suite_dataset(planted_rng, s)).rows)
    if (r.spec.label() == "H1.2^ChF") planted = r.verdict == Verdict::Accepted;
  const double secs = since(t0);
  return {worst <= kMaxFalseAcceptance && planted && secs < kBudgetFalsePositive,
          "max noise acceptance " + fmt(worst) + " (" + worst_label + "), planted H1.2^ChF accepted=" +
              std::to_string(planted) + " " + fmt(secs) + "s"};
}

Outcome determinism() {
  TwoProjects t;
  Pipeline a(t.config("run1", 2));
  a.run_all();
  Pipeline b(t.config("run2", 1));
  b.run_all();
  bool same = true;
  std::string sizes;
  for (const char* f : {"dataset.csv", "results.csv"}) {
    const auto x = read_file(a.out() / f), y = read_file(b.out() / f);
    same = same && x == y && !x.empty();
    sizes += std::string(" ") + f + "=" + std::to_string(x.size()) + "B";
  }
  return {same, std::string(same ? "byte-identical" : "differ") + sizes};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"interaction scenario cases A and B", interaction_scenario},
      {"efferent neighbor count", neighbor_scenario},
      {"interaction oracle on random corpora", interaction_oracle_check},
      {"smell strategies and near misses", smell_strategies},
      {"dependency relation coverage", dependency_coverage},
      {"mining protocol fixture", mining_protocol},
      {"NB-GLMM parameter recovery", glmm_recovery},
      {"dispersion check", dispersion},
      {"BH correctness", bh},
      {"effect-size identities", effects},
      {"false-positive control", false_positive_control},
      {"end-to-end determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1 < 10 ? " " : "") << i + 1 << ". " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed;
}
