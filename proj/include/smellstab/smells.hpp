#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smellstab/code_model.hpp"
#include "smellstab/dependency_graph.hpp"

namespace smellstab {

// Named detection thresholds, overridable through a versioned key=value file.
// Keys and defaults are listed by ThresholdConfig::defaults().
class ThresholdConfig {
 public:
  static constexpr int kVersion = 1;

  static ThresholdConfig defaults();
  // Parses "key=value" lines on top of the defaults. Blank lines and '#'
  // comments are ignored, except "# cfg key=value" echo lines, which are read
  // as settings so that a CSV header can be fed back ("cfg key=value" without
  // the '#' is accepted too, as left by csv::parse). Unknown keys and an
  // unsupported version are errors.
  static ThresholdConfig parse(std::string_view text);

  double get(std::string_view key) const;
  void set(std::string_view key, double value);  // validates
  const std::map<std::string, double, std::less<>>& values() const { return values_; }

  std::string serialize() const;  // "version=1" then sorted key=value lines
  std::vector<std::string> echo_lines() const;  // "key=value" entries, version first
  std::uint64_t hash() const;

 private:
  std::map<std::string, double, std::less<>> values_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MethodMetrics {
  std::size_t loc = 0;
  std::size_t cyclo = 0;
  std::size_t max_nesting = 0;
  std::size_t noav = 0;
  std::size_t atfd = 0;
  double laa = 0;
  std::size_t fdp = 0;
  std::size_t cint = 0;
  double cdisp = 0;
  std::size_t cm = 0;
  std::size_t cc = 0;
};

struct ClassMetrics {
  std::size_t loc = 0;
  std::size_t wmc = 0;
  double tcc = 0;
  std::size_t atfd = 0;
  double woc = 0;
  std::size_t nopa = 0;
  std::size_t noam = 0;
  std::size_t nom = 0;
  double amw = 0;
  std::size_t nprotm = 0;
  double bur = 0;
  double bovr = 0;
  std::size_t nas = 0;
  double pnas = 0;
};

enum class SmellType { FE, BM, DiCo, IC, SS, GC, BC, DC, RB, TB };
enum class SmellLevel { Method, Class };

inline constexpr SmellType kAllSmells[] = {SmellType::FE, SmellType::BM, SmellType::DiCo, SmellType::IC,
                                           SmellType::SS, SmellType::GC, SmellType::BC,   SmellType::DC,
                                           SmellType::RB, SmellType::TB};

std::string_view to_string(SmellType s);
SmellType parse_smell_type(std::string_view name);
SmellLevel level_of(SmellType s);
std::string_view to_string(SmellLevel l);

struct SmellInstance {
  SmellType smell = SmellType::FE;
  ArtifactRef host = kNoArtifact;       // method for method-level, class for class-level
  ArtifactRef enclosing = kNoArtifact;  // top-level class
};

// Metric computation over one corpus and its dependency graph.
class MetricsEngine {
 public:
  MetricsEngine(const SourceCorpus& corpus, const DependencyGraph& graph);

  // Abstract methods get all-zero metrics. Throws LookupError for
  // non-method artifacts.
  MethodMetrics method_metrics(ArtifactRef method) const;
  // Throws DomainError for interfaces and nested types.
  ClassMetrics class_metrics(ArtifactRef cls) const;

  const SourceCorpus& corpus() const { return corpus_; }
  const DependencyGraph& graph() const { return graph_; }

 private:
  const SourceCorpus& corpus_;
  const DependencyGraph& graph_;

  bool is_own_field(ArtifactRef method, ArtifactRef field) const;
  std::vector<ArtifactRef> fields_accessed(ArtifactRef source) const;  // direct use edges to fields
};

MethodMetrics compute_method_metrics(const SourceCorpus& corpus, const DependencyGraph& graph, ArtifactRef method);
ClassMetrics compute_class_metrics(const SourceCorpus& corpus, const DependencyGraph& graph, ArtifactRef cls);

// Pure strategy predicates. `bm_count` is the number of Brain Methods in the
// class; `internal_superclass` tells whether RB/TB are applicable.
bool method_smell(SmellType s, const MethodMetrics& m, const ThresholdConfig& cfg);
bool class_smell(SmellType s, const ClassMetrics& m, std::size_t bm_count, bool internal_superclass,
                 const ThresholdConfig& cfg);

struct SmellReport {
  std::vector<SmellInstance> instances;  // sorted by (smell, host display)
  std::vector<Diagnostic> diagnostics;
};

SmellReport detect_smells(const SourceCorpus& corpus, const DependencyGraph& graph, const ThresholdConfig& cfg,
                          unsigned workers = 1);

// One row per focal class and per method/constructor of its unit.
std::string metrics_to_csv(const SourceCorpus& corpus, const DependencyGraph& graph, const ThresholdConfig& cfg);
// smell, level, host, enclosing_class.
std::string smells_to_csv(const SourceCorpus& corpus, const std::vector<SmellInstance>& smells,
                          const ThresholdConfig& cfg);

}  // namespace smellstab
