#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smellstab/code_model.hpp"

namespace smellstab {

class HistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Minimal git front end: runs the git executable with an argument vector
// (no shell) and returns its stdout. Throws HistoryError on a nonzero exit.
class GitRepo {
 public:
  explicit GitRepo(std::filesystem::path path, std::string git = "git");

  std::string run(const std::vector<std::string>& args) const;
  // Like run, but returns nullopt instead of throwing on a nonzero exit.
  std::optional<std::string> try_run(const std::vector<std::string>& args) const;

  // File content at a revision; nullopt when the path does not exist there.
  std::optional<std::string> show(const std::string& rev, const std::string& path) const;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string git_;
};

struct ObservationWindow {
  std::string snapshot;  // full commit hash
  std::int64_t start = 0;  // committer timestamp of the snapshot
  std::int64_t end = 0;    // start + days * 86400
  std::string branch;
};

// Resolves the snapshot on the branch. Throws HistoryError when the snapshot
// is unknown or not on the branch's first-parent chain.
ObservationWindow make_window(const GitRepo& repo, const std::string& snapshot, const std::string& branch,
                              int days = 365);

// One Java file touched by a commit, compared against the first parent.
// Line vectors hold the normalized code of logical lines only.
struct FileChange {
  std::string path;
  std::optional<std::vector<std::string>> old_lines;  // none when added
  std::optional<std::vector<std::string>> new_lines;  // none when deleted
  bool binary = false;
  std::size_t added = 0;    // logical lines, whitespace-insensitive diff
  std::size_t deleted = 0;
};

struct CommitRecord {
  std::string id;
  std::int64_t timestamp = 0;
  std::size_t parent_count = 0;
  std::vector<FileChange> files;  // sorted by path
  std::vector<std::string> diagnostics;

  const FileChange* find(const std::string& path) const;
  std::size_t total_churn() const;  // Σ added + deleted over files
};

// First-parent commits of the branch in (start, end], oldest first. Merge
// commits are diffed against their first parent.
std::vector<CommitRecord> enumerate_window_commits(const GitRepo& repo, const ObservationWindow& window);

// Edit distance between two line sequences: (inserted, removed).
std::pair<std::size_t, std::size_t> line_diff(const std::vector<std::string>& before,
                                              const std::vector<std::string>& after);

// Lines that carry identity for similarity: braces-only lines and package
// or import statements are dropped.
std::vector<std::string> significant_lines(const std::vector<std::string>& lines);
// |shared multiset| / max(|a|, |b|) over significant lines; 0 when both are empty.
double line_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);
// Share of `from` lines found in `to` (multiset containment); 0 when `from` is empty.
double line_containment(const std::vector<std::string>& from, const std::vector<std::string>& to);

enum class LineageStatus { Tracked, ExcludedSplit, ExcludedMerge, ExcludedShared, Deleted };

std::string_view to_string(LineageStatus s);
LineageStatus parse_lineage_status(std::string_view s);

struct LineageConfig {
  double rename_similarity = 0.6;
  double split_share = 0.3;
  std::string source_root;  // repository subdirectory the corpus was ingested from
};

struct ClassLineage {
  std::string focal;  // display name
  ArtifactRef ref = kNoArtifact;
  LineageStatus status = LineageStatus::Tracked;
  // (commit index, repository path) from which the path holds; index -1 is
  // the snapshot.
  std::vector<std::pair<int, std::string>> timeline;
  int ended_at = -1;  // commit index that deleted or excluded the lineage, -1 if live

  // Path valid just before commit `k`, nullopt once ended.
  std::optional<std::string> path_before(int k) const;
  std::optional<std::string> path_after(int k) const;
};

// One lineage per focal class of the corpus, in focal_classes() order.
std::vector<ClassLineage> class_lineage(const SourceCorpus& corpus, const std::vector<CommitRecord>& commits,
                                        const LineageConfig& config = {});

struct ClassChurn {
  std::size_t added = 0;
  std::size_t deleted = 0;
};

// Churn of commit `k` per lineage index. Excluded lineages get nothing; the
// commit that deletes a lineage is not attributed.
std::map<std::size_t, ClassChurn> commit_class_churn(int k, const CommitRecord& commit,
                                                     const std::vector<ClassLineage>& lineages);

struct StabilityOutcome {
  std::string project;
  std::string focal;
  std::size_t chf = 0;
  std::size_t chs = 0;
  LineageStatus status = LineageStatus::Tracked;

  bool operator==(const StabilityOutcome&) const = default;
};

// Outcomes for tracked and deleted lineages; excluded lineages yield no row,
// deleted ones only when include_deleted is set.
std::vector<StabilityOutcome> aggregate_stability(const std::string& project, const std::vector<ClassLineage>& lineages,
                                                  const std::vector<CommitRecord>& commits,
                                                  bool include_deleted = true);

struct HistoryResult {
  ObservationWindow window;
  std::vector<CommitRecord> commits;
  std::vector<ClassLineage> lineages;
  std::vector<StabilityOutcome> outcomes;
  std::size_t system_churn = 0;
};

HistoryResult mine_history(const GitRepo& repo, const SourceCorpus& corpus, const std::string& snapshot,
                           const std::string& branch, int days = 365, const LineageConfig& config = {},
                           bool include_deleted = true);

const std::vector<std::string>& outcome_columns();  // project, class, ChF, ChS, lineage_status
std::string outcomes_to_csv(const std::vector<StabilityOutcome>& rows);
std::vector<StabilityOutcome> outcomes_from_csv(std::string_view text);

struct ProjectActivity {
  std::string project;
  std::size_t commits = 0;
  std::size_t churn = 0;
};

struct SummaryRow {
  std::string measure;
  double min = 0, max = 0, median = 0, mean = 0, sd = 0;
};

// min/max/median/mean/sample sd of window commits and system churn across
// projects; empty input gives no rows.
std::vector<SummaryRow> activity_summary(const std::vector<ProjectActivity>& projects);
std::string activity_summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace smellstab
