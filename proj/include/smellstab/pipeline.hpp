#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smellstab/history.hpp"
#include "smellstab/neighborhood.hpp"
#include "smellstab/smells.hpp"
#include "smellstab/stats.hpp"

namespace smellstab {

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One repository of the corpus manifest (one JSON object per line). Metadata
// fields are optional so that incomplete entries can be rejected with a reason.
struct ManifestEntry {
  std::string repo;
  std::optional<double> stars;
  std::optional<double> forks;
  std::optional<double> contributors;
  std::optional<double> java_fraction;
  std::optional<double> window_commits;
  std::optional<bool> education_flag;
  std::string clone_path;
  std::string snapshot;  // revision the analysis is anchored at
  std::string branch = "main";
  std::string source_root;  // subdirectory holding the Java sources, empty for the whole tree
};

// Throws std::invalid_argument naming the offending line.
std::vector<ManifestEntry> parse_manifest(std::string_view jsonl);
std::string manifest_line(const ManifestEntry& e);

struct Rejection {
  ManifestEntry entry;
  std::vector<std::string> reasons;  // "IC1".."IC5", "incomplete", "rank"
};

struct FilterResult {
  std::vector<ManifestEntry> accepted;  // stars descending, ties by repo
  std::vector<Rejection> rejected;      // manifest order
};

// Inclusion criteria: forks > 100, contributors >= 20, window commits >= 50,
// java fraction > 0.8, not an education project; then the top `limit` by stars.
FilterResult filter_manifest(const std::vector<ManifestEntry>& entries, std::size_t limit = 100);
std::string rejections_to_csv(const std::vector<Rejection>& rejected);

// Run configuration, read from key=value lines. Threshold keys of the smell
// detector may appear in the same file. Every output embeds the full
// configuration as "# cfg key=value" lines, which parse() accepts back: once
// echo lines were seen, the first non key=value line (a CSV header) ends the
// configuration.
struct PipelineConfig {
  std::string manifest = "manifest.jsonl";
  std::string output_dir = "out";
  unsigned workers = 1;
  std::uint64_t seed = 1;
  int window_days = 365;
  double rename_similarity = 0.6;
  double split_share = 0.3;
  std::size_t limit = 100;
  bool include_deleted = true;
  bool exclude_test_dirs = false;
  bool residuals = false;
  ThresholdConfig thresholds = ThresholdConfig::defaults();

  static PipelineConfig parse(std::string_view text);
  std::string serialize() const;  // every key, pipeline keys first
  // Settings that affect results (paths and worker count excluded), so that
  // outputs stay byte-identical across machines and worker counts.
  std::vector<std::string> echo_lines() const;
  std::uint64_t analysis_hash() const;  // inputs of the analyze stage
  std::uint64_t mining_hash() const;    // inputs of the mine stage
};

// Sources of the snapshot revision (paths relative to source_root).
std::map<std::string, std::string> snapshot_sources(const GitRepo& repo, const std::string& snapshot,
                                                    const std::string& source_root);

struct DatasetRow {
  ClassObservation obs;
  std::size_t chf = 0;
  std::size_t chs = 0;
  LineageStatus status = LineageStatus::Tracked;
};

// Joins on (project, class), keeping classes with an outcome row. Throws
// IntegrityError on duplicate keys in either input.
std::vector<DatasetRow> export_dataset(const std::vector<ClassObservation>& observations,
                                       const std::vector<StabilityOutcome>& outcomes);
const std::vector<std::string>& dataset_columns();
std::string dataset_to_csv(const std::vector<DatasetRow>& rows, const std::vector<std::string>& echo = {});
std::vector<DatasetRow> dataset_rows_from_csv(std::string_view text);

struct QuarantineEntry {
  std::string project;
  std::string stage;
  std::string message;
};

std::string quarantine_to_csv(const std::vector<QuarantineEntry>& rows);

// Orchestrates the stages over an output directory:
//   config.echo, accepted.jsonl, rejected.csv            filter
//   projects/<slug>/{observations,smells,metrics,edges}.csv  analyze
//   projects/<slug>/{outcomes,activity}.csv              mine
//   dataset.csv, projects.csv, quarantine.csv            join
//   results.csv, results.json                            stats
//   activity_summary.csv, report.md                      report
// A project whose stage fails is quarantined (projects/<slug>/failed) and
// skipped by later stages. Analyze and mine skip projects whose inputs are
// unchanged since the last run (projects/<slug>/*.key stamps).
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  FilterResult filter();
  void analyze();
  void mine();
  void join();
  void stats();
  void report();
  void run_all();

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path out() const { return config_.output_dir; }
  std::vector<QuarantineEntry> quarantine() const;

 private:
  PipelineConfig config_;

  std::vector<ManifestEntry> accepted() const;
  std::filesystem::path project_dir(const ManifestEntry& e) const;
  void record_failure(const ManifestEntry& e, const std::string& stage, const std::string& message) const;
  bool failed(const ManifestEntry& e) const;
  void analyze_project(const ManifestEntry& e) const;
  void mine_project(const ManifestEntry& e) const;
};

std::string project_slug(const std::string& repo);

}  // namespace smellstab
