#pragma once

// Scripted git repositories for the history miner. Every commit gets an
// explicit timestamp so window membership is deterministic.

#include <stdlib.h>

#include <filesystem>
#include <string>
#include <vector>

#include "smellstab/history.hpp"
#include "smellstab/util.hpp"

namespace smellstab::testing {

inline constexpr std::int64_t kDay = 86400;
inline constexpr std::int64_t kT0 = 1600000000;  // snapshot commit time
inline constexpr const char* kAuthorName = "Alice Fixture";
inline constexpr const char* kAuthorEmail = "alice.fixture@example.org";

class FixtureRepo {
 public:
  FixtureRepo() : dir_(make_temp()), git_(dir_) {
    git_.run({"init", "-q", "-b", "main"});
    git_.run({"config", "user.name", kAuthorName});
    git_.run({"config", "user.email", kAuthorEmail});
    git_.run({"config", "commit.gpgsign", "false"});
  }
  ~FixtureRepo() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  FixtureRepo(const FixtureRepo&) = delete;
  FixtureRepo& operator=(const FixtureRepo&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  const GitRepo& git() const { return git_; }

  void write(const std::string& path, const std::string& text) {
    std::filesystem::create_directories((dir_ / path).parent_path());
    write_file(dir_ / path, text);
  }
  void remove(const std::string& path) { std::filesystem::remove(dir_ / path); }
  void move(const std::string& from, const std::string& to) { git_.run({"mv", from, to}); }

  std::string commit(const std::string& message, std::int64_t ts) {
    set_dates(ts);
    git_.run({"add", "-A"});
    git_.run({"commit", "-q", "--allow-empty", "-m", message});
    return head();
  }
  void checkout(const std::string& branch, bool create = false) {
    if (create)
      git_.run({"checkout", "-q", "-b", branch});
    else
      git_.run({"checkout", "-q", branch});
  }
  std::string merge(const std::string& branch, std::int64_t ts) {
    set_dates(ts);
    git_.run({"merge", "-q", "--no-ff", "-m", "merge " + branch, branch});
    return head();
  }
  std::string head() const { return trim(git_.run({"rev-parse", "HEAD"})); }

 private:
  std::filesystem::path dir_;
  GitRepo git_;

  static std::filesystem::path make_temp() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "smellstab-git-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw HistoryError("mkdtemp failed");
    return tmpl;
  }
  static void set_dates(std::int64_t ts) {
    const std::string d = "@" + std::to_string(ts) + " +0000";
    setenv("GIT_AUTHOR_DATE", d.c_str(), 1);
    setenv("GIT_COMMITTER_DATE", d.c_str(), 1);
  }
};

// Snapshot sources for the mining protocol fixture.
inline std::map<std::string, std::string> mining_snapshot_sources() {
  return {
      {"A.java", "class A {\n  int a() { return 1; }\n  int b() { return 2; }\n  int c() { return 3; }\n}\n"},
      {"S.java",
       "class S {\n  int s1(int x) { return x + 1; }\n  int s2(int x) { return x + 2; }\n"
       "  int s3(int x) { return x + 3; }\n  int s4(int x) { return x + 4; }\n"
       "  int s5(int x) { return x + 5; }\n  int s6(int x) { return x + 6; }\n}\n"},
      {"M1.java", "class M1 {\n  int m1a() { return 11; }\n  int m1b() { return 12; }\n}\n"},
      {"M2.java", "class M2 {\n  int m2a() { return 21; }\n  int m2b() { return 22; }\n}\n"},
      {"W.java", "class W {\n  int w(int x) {\n    return x * 2;\n  }\n}\n"},
      {"D.java", "class D {\n  int d() { return 0; }\n}\n"},
      {"Del.java", "class Del {\n  int x() { return 1; }\n}\n"},
      {"U.java", "class U {\n  int u() { return 9; }\n}\n"},
      {"Pair.java", "class Pair {\n  int p;\n}\nclass Extra {\n  int e;\n}\n"},
  };
}

struct MiningFixture {
  std::string snapshot;
  std::size_t window_commits = 0;
  std::vector<StabilityOutcome> expected;  // include_deleted = true, sorted by class
  std::vector<std::pair<std::string, LineageStatus>> statuses;
};

// Builds the mining protocol history:
//   day 10  rename A.java -> B.java (pure)
//   day 20  edit B.java: +2 -1 logical, plus a blank and a comment line
//   day 30  split S into S.java and S2.java
//   day 40  merge M1.java and M2.java into M.java
//   day 50  whitespace-only reformat of W.java
//   day 60  edit W.java: +2 -1
//   day 65/66 feature branch edits of D.java, merged --no-ff on day 70: +2 -1
//   day 80  Del.java +1, day 90 Del.java +1 -1, day 100 Del.java deleted
//   day 400 edit U.java (outside the window)
inline MiningFixture build_mining_fixture(FixtureRepo& repo) {
  MiningFixture fx;
  for (const auto& [path, text] : mining_snapshot_sources()) repo.write(path, text);
  fx.snapshot = repo.commit("snapshot", kT0);

  repo.move("A.java", "B.java");
  repo.commit("rename A", kT0 + 10 * kDay);
  repo.write("B.java",
             "class A {\n  int a() { return 10; }\n  int b() { return 2; }\n\n  // note\n"
             "  int c() { return 3; }\n  int d() { return 4; }\n}\n");
  repo.commit("edit A", kT0 + 20 * kDay);

  repo.write("S.java",
             "class S {\n  int s1(int x) { return x + 1; }\n  int s2(int x) { return x + 2; }\n"
             "  int s3(int x) { return x + 3; }\n}\n");
  repo.write("S2.java",
             "class S2 {\n  int s4(int x) { return x + 4; }\n  int s5(int x) { return x + 5; }\n"
             "  int s6(int x) { return x + 6; }\n}\n");
  repo.commit("split S", kT0 + 30 * kDay);

  repo.remove("M1.java");
  repo.remove("M2.java");
  repo.write("M.java",
             "class M {\n  int m1a() { return 11; }\n  int m1b() { return 12; }\n"
             "  int m2a() { return 21; }\n  int m2b() { return 22; }\n}\n");
  repo.commit("merge M1 M2", kT0 + 40 * kDay);

  repo.write("W.java", "class W {\n\tint w(int  x)   {\n\n        return x*2;\n  }\n}\n");
  repo.commit("reformat W", kT0 + 50 * kDay);
  repo.write("W.java", "class W {\n  int v;\n  int w(int x) {\n    return x * 3;\n  }\n}\n");
  repo.commit("edit W", kT0 + 60 * kDay);

  repo.checkout("feature", true);
  repo.write("D.java", "class D {\n  int d() { return 0; }\n  int e() { return 5; }\n}\n");
  repo.commit("feature 1", kT0 + 65 * kDay);
  repo.write("D.java", "class D {\n  int d() { return 7; }\n  int e() { return 5; }\n}\n");
  repo.commit("feature 2", kT0 + 66 * kDay);
  repo.checkout("main");
  repo.merge("feature", kT0 + 70 * kDay);

  repo.write("Del.java", "class Del {\n  int x() { return 1; }\n  int y() { return 2; }\n}\n");
  repo.commit("grow Del", kT0 + 80 * kDay);
  repo.write("Del.java", "class Del {\n  int x() { return 3; }\n  int y() { return 2; }\n}\n");
  repo.commit("edit Del", kT0 + 90 * kDay);
  repo.remove("Del.java");
  repo.commit("drop Del", kT0 + 100 * kDay);

  repo.write("U.java", "class U {\n  int u() { return 8; }\n}\n");
  repo.commit("late edit", kT0 + 400 * kDay);

  fx.window_commits = 10;  // day 10..100 on the first-parent chain, merge included
  auto row = [](std::string c, std::size_t chf, std::size_t chs, LineageStatus s) {
    return StabilityOutcome{"fixture", std::move(c), chf, chs, s};
  };
  fx.expected = {row("A", 1, 3, LineageStatus::Tracked),   row("D", 1, 3, LineageStatus::Tracked),
                 row("Del", 2, 3, LineageStatus::Deleted), row("Pair", 0, 0, LineageStatus::Tracked),
                 row("U", 0, 0, LineageStatus::Tracked),   row("W", 1, 3, LineageStatus::Tracked)};
  fx.statuses = {{"A", LineageStatus::Tracked},         {"D", LineageStatus::Tracked},
                 {"Del", LineageStatus::Deleted},       {"Extra", LineageStatus::ExcludedShared},
                 {"M1", LineageStatus::ExcludedMerge},  {"M2", LineageStatus::ExcludedMerge},
                 {"Pair", LineageStatus::Tracked},      {"S", LineageStatus::ExcludedSplit},
                 {"U", LineageStatus::Tracked},         {"W", LineageStatus::Tracked}};
  return fx;
}

}  // namespace smellstab::testing
