#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <set>

#include "git_fixture.hpp"
#include "pipeline_fixture.hpp"
#include "smellstab/pipeline.hpp"
#include "test_support.hpp"

using namespace smellstab;
using namespace smellstab::testing;
namespace fs = std::filesystem;

namespace {

std::size_t data_rows(const fs::path& csv_path) { return csv::parse(read_file(csv_path)).rows.size(); }

}  // namespace

// --- filter ----------------------------------------------------------------------

TEST(Filter, EachCriterionRejectsWithItsReason) {
  std::vector<ManifestEntry> m;
  auto add = [&](std::string repo, auto mutate) {
    auto e = qualifying(std::move(repo), 10);
    mutate(e);
    m.push_back(e);
  };
  add("ic1", [](ManifestEntry& e) { e.forks = 99; });
  add("ic1-edge", [](ManifestEntry& e) { e.forks = 100; });
  add("ic2", [](ManifestEntry& e) { e.contributors = 19; });
  add("ic3", [](ManifestEntry& e) { e.window_commits = 49; });
  add("ic4", [](ManifestEntry& e) { e.java_fraction = 0.8; });
  add("ic5", [](ManifestEntry& e) { e.education_flag = true; });
  add("incomplete", [](ManifestEntry& e) { e.contributors.reset(); });
  add("ok-edges", [](ManifestEntry& e) {
    e.forks = 101;
    e.contributors = 20;
    e.window_commits = 50;
    e.java_fraction = 0.81;
  });
  const auto r = filter_manifest(m);
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_EQ(r.accepted[0].repo, "ok-edges");
  std::map<std::string, std::vector<std::string>> why;
  for (const auto& x : r.rejected) why[x.entry.repo] = x.reasons;
  EXPECT_EQ(why["ic1"], std::vector<std::string>{"IC1"});
  EXPECT_EQ(why["ic1-edge"], std::vector<std::string>{"IC1"});
  EXPECT_EQ(why["ic2"], std::vector<std::string>{"IC2"});
  EXPECT_EQ(why["ic3"], std::vector<std::string>{"IC3"});
  EXPECT_EQ(why["ic4"], std::vector<std::string>{"IC4"});
  EXPECT_EQ(why["ic5"], std::vector<std::string>{"IC5"});
  EXPECT_EQ(why["incomplete"], std::vector<std::string>{"incomplete"});
}

TEST(Filter, KeepsTopHundredByStarsWithRepoTieBreak) {
  std::vector<ManifestEntry> m;
  for (int i = 0; i < 120; ++i) m.push_back(qualifying("r" + std::to_string(1000 + i), 5000 - (i / 2)));
  std::mt19937_64 rng(3);
  std::shuffle(m.begin(), m.end(), rng);
  const auto r = filter_manifest(m, 100);
  ASSERT_EQ(r.accepted.size(), 100u);
  ASSERT_EQ(r.rejected.size(), 20u);
  for (const auto& x : r.rejected) EXPECT_EQ(x.reasons, std::vector<std::string>{"rank"});
  // Oracle: rank by (-stars, repo) independently.
  auto sorted = m;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::make_pair(-*a.stars, a.repo) < std::make_pair(-*b.stars, b.repo);
  });
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(r.accepted[i].repo, sorted[i].repo);
  EXPECT_EQ(r.accepted.back().repo, "r1099");
}

TEST(Filter, AcceptedIsSubsetAndDisjointFromRejected) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ManifestEntry> m;
    for (int i = 0; i < 60; ++i) {
      auto e = qualifying("repo" + std::to_string(i), std::floor(u(rng) * 50));
      e.forks = std::floor(u(rng) * 200);
      e.contributors = std::floor(u(rng) * 40);
      e.window_commits = std::floor(u(rng) * 100);
      e.java_fraction = u(rng);
      e.education_flag = u(rng) < 0.1;
      m.push_back(e);
    }
    const auto r = filter_manifest(m, 10);
    EXPECT_LE(r.accepted.size(), 10u);
    EXPECT_EQ(r.accepted.size() + r.rejected.size(), m.size());
    for (const auto& a : r.accepted) {
      EXPECT_GT(*a.forks, 100);
      EXPECT_GE(*a.contributors, 20);
      EXPECT_GE(*a.window_commits, 50);
      EXPECT_GT(*a.java_fraction, 0.8);
      EXPECT_FALSE(*a.education_flag);
    }
    for (std::size_t i = 1; i < r.accepted.size(); ++i) EXPECT_GE(*r.accepted[i - 1].stars, *r.accepted[i].stars);
  }
}

TEST(Filter, DuplicateRepoRejected) {
  const auto r = filter_manifest({qualifying("x", 5), qualifying("x", 9)});
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_EQ(*r.accepted[0].stars, 5);
  EXPECT_EQ(r.rejected[0].reasons, std::vector<std::string>{"duplicate"});
}

TEST(Manifest, RoundTripAndErrors) {
  auto e = qualifying("org/a", 12);
  e.source_root = "src/main/java";
  e.branch = "trunk";
  const auto back = parse_manifest(manifest_line(e) + "\n\n");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(manifest_line(back[0]), manifest_line(e));
  EXPECT_THROW(parse_manifest("{\"repo\": \"a\", \"stars\": \"many\"}"), std::invalid_argument);
  EXPECT_THROW(parse_manifest("{\"stars\": 3}"), std::invalid_argument);
  EXPECT_THROW(parse_manifest("not json"), std::invalid_argument);
  EXPECT_THROW(parse_manifest("{\"repo\": \"a\", \"education_flag\": 1}"), std::invalid_argument);
  const auto partial = parse_manifest("{\"repo\": \"a\", \"stars\": 3}");
  EXPECT_FALSE(partial[0].forks.has_value());
  EXPECT_EQ(partial[0].branch, "main");
}

// --- configuration ---------------------------------------------------------------

TEST(Config, ParsesPipelineAndThresholdKeys) {
  const auto c = PipelineConfig::parse("# comment\nworkers=4\nseed=7\nwindow_days=180\ninclude_deleted=false\n"
                                       "rename_similarity=0.7\nlimit=5\n");
  EXPECT_EQ(c.workers, 4u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.window_days, 180);
  EXPECT_FALSE(c.include_deleted);
  EXPECT_DOUBLE_EQ(c.rename_similarity, 0.7);
  EXPECT_EQ(c.limit, 5u);
  const auto& keys = ThresholdConfig::defaults().values();
  const std::string some_key = keys.begin()->first;
  const double v = keys.begin()->second + 1;
  const auto t = PipelineConfig::parse(some_key + "=" + format_double(v) + "\n");
  EXPECT_DOUBLE_EQ(t.thresholds.get(some_key), v);
  EXPECT_NE(t.analysis_hash(), PipelineConfig{}.analysis_hash());
  EXPECT_EQ(t.mining_hash(), PipelineConfig{}.mining_hash());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(PipelineConfig::parse("no_such_key=1"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("workers=lots"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("split_share=1.5"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("include_deleted=maybe"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("window_days=-3"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("just text"), ConfigError);
}

TEST(Config, EchoLinesReplay) {
  auto c = PipelineConfig::parse("seed=42\nsplit_share=0.25\nexclude_test_dirs=true\n");
  std::string echo;
  for (const auto& l : c.echo_lines()) echo += "# cfg " + l + "\n";
  const auto back = PipelineConfig::parse(echo + "a,b\n1,2\n");
  EXPECT_EQ(back.echo_lines(), c.echo_lines());
  EXPECT_EQ(PipelineConfig::parse(c.serialize()).serialize(), c.serialize());
}

// --- dataset ---------------------------------------------------------------------

TEST(Dataset, JoinKeepsClassesWithOutcomes) {
  ClassObservation a{"p", "A"}, b{"p", "B"}, c{"p", "C"};
  a.cl_size = 10;
  const std::vector<StabilityOutcome> outs = {{"p", "A", 2, 5, LineageStatus::Tracked},
                                              {"p", "C", 1, 1, LineageStatus::Deleted}};
  const auto rows = export_dataset({a, b, c}, outs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].obs.focal, "A");
  EXPECT_EQ(rows[0].chs, 5u);
  EXPECT_EQ(rows[1].status, LineageStatus::Deleted);
}

TEST(Dataset, DuplicateKeysAreFatal) {
  ClassObservation a{"p", "A"};
  EXPECT_THROW(export_dataset({a, a}, {{"p", "A", 1, 1, LineageStatus::Tracked}}), IntegrityError);
  EXPECT_THROW(export_dataset({a}, {{"p", "A", 1, 1, LineageStatus::Tracked}, {"p", "A", 2, 2, LineageStatus::Tracked}}),
               IntegrityError);
  EXPECT_THROW(export_dataset({a}, {{"p", "Z", 1, 1, LineageStatus::Tracked}}), IntegrityError);
}

TEST(Dataset, CsvRoundTripAndHeaderOnly) {
  EXPECT_EQ(dataset_to_csv({}), csv::row(dataset_columns()));
  EXPECT_TRUE(dataset_rows_from_csv(dataset_to_csv({})).empty());
  const auto empty = dataset_from_csv(dataset_to_csv({}));
  EXPECT_EQ(empty.size(), 0u);

  std::mt19937_64 rng(5);
  std::vector<DatasetRow> rows;
  for (int i = 0; i < 30; ++i) {
    DatasetRow r;
    r.obs.project = "p,\"q\"";
    r.obs.focal = "pkg.C" + std::to_string(i);
    r.obs.n_smell_foc = rng() % 4;
    r.obs.is_smelly = r.obs.n_smell_foc > 0;
    r.obs.var_smell_foc = r.obs.is_smelly ? 1 : 0;
    r.obs.cl_size = rng() % 500;
    r.obs.n_eff_nei = rng() % 7;
    r.chf = rng() % 9;
    r.chs = r.chf * 3;
    r.status = i % 5 == 0 ? LineageStatus::Deleted : LineageStatus::Tracked;
    rows.push_back(r);
  }
  const std::string text = dataset_to_csv(rows, PipelineConfig{}.echo_lines());
  const auto back = dataset_rows_from_csv(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].obs, rows[i].obs);
    EXPECT_EQ(back[i].chf, rows[i].chf);
    EXPECT_EQ(back[i].chs, rows[i].chs);
    EXPECT_EQ(back[i].status, rows[i].status);
  }
  EXPECT_EQ(dataset_to_csv(back, PipelineConfig{}.echo_lines()), text);
  const auto d = dataset_from_csv(text);
  EXPECT_EQ(d.size(), rows.size());
  EXPECT_EQ(d.column("ChF")[3], static_cast<double>(rows[3].chf));
}

TEST(Dataset, MalformedRowRejected) {
  std::string text = csv::row(dataset_columns()) + "p,A,true\n";
  EXPECT_ANY_THROW(dataset_rows_from_csv(text));
}

// --- snapshot loading ------------------------------------------------------------

TEST(Snapshot, SourcesComeFromTheSnapshotRevision) {
  FixtureRepo repo;
  repo.write("src/main/java/a/A.java", "package a; class A {}\n");
  repo.write("README.md", "not java\n");
  const auto snap = repo.commit("one", kT0);
  repo.write("src/main/java/a/B.java", "package a; class B {}\n");
  repo.commit("two", kT0 + kDay);
  const auto all = snapshot_sources(repo.git(), snap, "");
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all.begin()->first, "src/main/java/a/A.java");
  const auto rooted = snapshot_sources(repo.git(), snap, "src/main/java/");
  ASSERT_EQ(rooted.size(), 1u);
  EXPECT_EQ(rooted.begin()->first, "a/A.java");
  EXPECT_EQ(snapshot_sources(repo.git(), "HEAD", "src/main/java").size(), 2u);
}

// --- end to end ------------------------------------------------------------------

TEST(Pipeline, EndToEndOnTwoFixtureProjects) {
  TwoProjects t;
  Pipeline p(t.config("out", 2));
  p.run_all();
  const fs::path out = p.out();

  // Filter: the low-fork project is rejected, three are accepted.
  EXPECT_EQ(parse_manifest(read_file(out / "accepted.jsonl")).size(), 3u);
  EXPECT_NE(read_file(out / "rejected.csv").find("org/small,IC1"), std::string::npos);

  // Quarantine holds the broken clone; every accepted project is accounted for.
  const auto q = p.quarantine();
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].project, "org/broken");
  EXPECT_EQ(q[0].stage, "analyze");
  const auto listing = csv::parse(read_file(out / "projects.csv"));
  ASSERT_EQ(listing.rows.size(), 3u);
  std::set<std::string> listed;
  for (const auto& r : listing.rows) listed.insert(r[0]);
  EXPECT_EQ(listed, (std::set<std::string>{"org/mining", "org/interaction", "org/broken"}));
  EXPECT_EQ(data_rows(out / "quarantine.csv"), 1u);

  // Dataset rows equal the tracked plus deleted outcomes of each project.
  std::size_t expected_rows = 0;
  for (const char* slug : {"org_mining", "org_interaction"})
    expected_rows += outcomes_from_csv(read_file(out / "projects" / slug / "outcomes.csv")).size();
  EXPECT_EQ(expected_rows, t.fx.expected.size() + data_rows(out / "projects" / "org_interaction" / "outcomes.csv"));
  const auto rows = dataset_rows_from_csv(read_file(out / "dataset.csv"));
  EXPECT_EQ(rows.size(), expected_rows);
  std::map<std::string, DatasetRow> mining_rows;
  for (const auto& r : rows)
    if (r.obs.project == "org/mining") mining_rows[r.obs.focal] = r;
  for (const auto& e : t.fx.expected) {
    ASSERT_TRUE(mining_rows.count(e.focal)) << e.focal;
    EXPECT_EQ(mining_rows[e.focal].chf, e.chf) << e.focal;
    EXPECT_EQ(mining_rows[e.focal].chs, e.chs) << e.focal;
    EXPECT_EQ(mining_rows[e.focal].status, e.status) << e.focal;
  }

  // Stats: one verdict per hypothesis and outcome.
  const auto results = csv::parse(read_file(out / "results.csv"));
  EXPECT_EQ(results.rows.size(), 34u);
  for (const auto& r : results.rows) {
    const auto& v = r[results.column("verdict")];
    EXPECT_TRUE(v == "accepted" || v == "not_accepted" || v == "inconclusive") << v;
  }
  EXPECT_FALSE(read_file(out / "results.json").empty());

  const auto summary = csv::parse(read_file(out / "activity_summary.csv"));
  ASSERT_EQ(summary.rows.size(), 2u);
  EXPECT_NE(read_file(out / "report.md").find("org/broken"), std::string::npos);

  // No developer identity anywhere in the outputs.
  for (const auto& [path, text] : snapshot_tree(out)) {
    EXPECT_EQ(text.find(kAuthorName), std::string::npos) << path;
    EXPECT_EQ(text.find(kAuthorEmail), std::string::npos) << path;
  }
}

TEST(Pipeline, RerunsAreByteIdenticalAcrossWorkerCounts) {
  TwoProjects t;
  Pipeline a(t.config("a", 3));
  a.run_all();
  const auto first = snapshot_tree(a.out(), {"config.echo"});
  a.run_all();  // cached rerun in place
  EXPECT_EQ(snapshot_tree(a.out(), {"config.echo"}), first);
  Pipeline b(t.config("b", 1));
  b.run_all();
  EXPECT_EQ(snapshot_tree(b.out(), {"config.echo"}), first);
}

TEST(Pipeline, CacheInvalidatedByThresholdChange) {
  TwoProjects t;
  auto cfg = t.config("out", 1);
  Pipeline p(cfg);
  p.filter();
  p.analyze();
  const fs::path obs = p.out() / "projects" / "org_mining" / "observations.csv";
  write_file(obs, read_file(obs) + "# sentinel\n");
  p.analyze();
  EXPECT_NE(read_file(obs).find("# sentinel"), std::string::npos);  // unchanged inputs: reused
  const auto& keys = cfg.thresholds.values();
  cfg.thresholds.set(keys.begin()->first, keys.begin()->second + 1);
  Pipeline changed(cfg);
  changed.analyze();
  EXPECT_EQ(read_file(obs).find("# sentinel"), std::string::npos);
}

TEST(Pipeline, ExcludingDeletedDropsDeletedRows) {
  TwoProjects t;
  auto cfg = t.config("out", 1);
  cfg.include_deleted = false;
  Pipeline p(cfg);
  p.filter();
  p.analyze();
  p.mine();
  p.join();
  for (const auto& r : dataset_rows_from_csv(read_file(p.out() / "dataset.csv")))
    EXPECT_NE(r.status, LineageStatus::Deleted) << r.obs.focal;
}

TEST(Pipeline, DatasetEchoReplaysTheRun) {
  TwoProjects t;
  auto cfg = t.config("out", 1);
  cfg.seed = 99;
  cfg.window_days = 200;
  Pipeline p(cfg);
  p.filter();
  p.analyze();
  p.mine();
  p.join();
  const auto replay = PipelineConfig::parse(read_file(p.out() / "dataset.csv"));
  EXPECT_EQ(replay.echo_lines(), cfg.echo_lines());
  EXPECT_EQ(replay.seed, 99u);
  EXPECT_EQ(replay.window_days, 200);
}

TEST(Pipeline, StagesRequireTheirInputs) {
  TempDir d;
  PipelineConfig cfg;
  cfg.output_dir = (d.path() / "out").string();
  cfg.manifest = (d.path() / "none.jsonl").string();
  Pipeline p(cfg);
  EXPECT_ANY_THROW(p.filter());
  EXPECT_ANY_THROW(p.analyze());
  EXPECT_ANY_THROW(p.stats());
}

TEST(Pipeline, EmptyAcceptedSetGivesHeaderOnlyDataset) {
  TempDir d;
  write_file(d.path() / "m.jsonl", manifest_line([] {
               auto e = qualifying("tiny", 1);
               e.forks = 2;
               return e;
             }()) + "\n");
  PipelineConfig cfg;
  cfg.output_dir = (d.path() / "out").string();
  cfg.manifest = (d.path() / "m.jsonl").string();
  Pipeline p(cfg);
  p.run_all();
  EXPECT_EQ(data_rows(p.out() / "dataset.csv"), 0u);
  const auto results = csv::parse(read_file(p.out() / "results.csv"));
  ASSERT_EQ(results.rows.size(), 34u);
  for (const auto& r : results.rows) EXPECT_EQ(r[results.column("verdict")], "inconclusive");
}

// --- command line ----------------------------------------------------------------

TEST(Cli, RunsEveryStageFromAConfigFile) {
  TwoProjects t;
  const fs::path cfg = t.dir.path() / "run.cfg";
  write_file(cfg, "manifest=" + t.manifest.string() + "\nwindow_days=365\n");
  const fs::path out = t.dir.path() / "cli-out";
  const std::string base = std::string(SMELLSTAB_CLI) + " --config " + cfg.string() + " --out " + out.string();
  EXPECT_EQ(std::system((base + " --workers 2 --seed 5 all 2>/dev/null").c_str()), 0);
  EXPECT_EQ(data_rows(out / "results.csv"), 34u);
  EXPECT_EQ(PipelineConfig::parse(read_file(out / "results.csv")).seed, 5u);
  for (const char* stage : {"filter", "analyze", "mine", "join", "stats", "report"})
    EXPECT_EQ(std::system((base + " " + stage + " 2>/dev/null").c_str()), 0) << stage;
  EXPECT_NE(std::system((base + " 2>/dev/null >/dev/null").c_str()), 0);  // a subcommand is required
  write_file(cfg, "bogus=1\n");
  EXPECT_NE(std::system((base + " filter 2>/dev/null").c_str()), 0);
}
