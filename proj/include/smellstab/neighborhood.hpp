#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smellstab/code_model.hpp"
#include "smellstab/dependency_graph.hpp"
#include "smellstab/smells.hpp"

namespace smellstab {

struct SmellFootprint {
  SmellInstance instance;
  std::vector<ArtifactRef> artifacts;  // sorted
};

// Method-level smells cover their host; class-level smells cover the class
// and all of its members, nested types included.
SmellFootprint smell_footprint(const SourceCorpus& corpus, const SmellInstance& instance);

struct SmellStats {
  bool any = false;
  std::size_t count = 0;
  std::size_t variety = 0;  // distinct smell types
};

SmellStats focal_smell_stats(ArtifactRef focal, const std::vector<SmellInstance>& smells);
// Aggregates instances hosted by any of the given neighbor classes.
SmellStats efferent_smell_stats(const std::vector<ArtifactRef>& neighbors, const std::vector<SmellInstance>& smells);
SmellStats efferent_smell_stats(ArtifactRef focal, const SourceCorpus& corpus, const DependencyGraph& graph,
                                const std::vector<SmellInstance>& smells);

bool efferent_coupling_flag(const SmellStats& focal, const SmellStats& efferent);

struct InteractionStats {
  bool any = false;
  std::size_t pairs = 0;      // distinct (CS1, CS2) instance pairs
  std::size_t intensity = 0;  // sum of site counts over interaction edges
  std::vector<std::pair<std::size_t, std::size_t>> pair_list;  // indices into the smell vector, sorted
};

// Interaction edges leave a focal smell footprint and land in the footprint
// of a smell hosted by an efferent neighbor. contain edges never count.
InteractionStats efferent_interactions(ArtifactRef focal, const DependencyGraph& graph, const SourceCorpus& corpus,
                                       const std::vector<SmellInstance>& smells);

struct ClassObservation {
  std::string project;
  std::string focal;  // display name
  bool is_smelly = false;
  std::size_t n_smell_foc = 0;
  std::size_t var_smell_foc = 0;
  bool has_smell_eff = false;
  std::size_t n_smell_eff = 0;
  std::size_t var_smell_eff = 0;
  bool has_eff_coup = false;
  bool has_eff_int = false;
  std::size_t n_eff_smell_int = 0;
  std::size_t eff_int_inten = 0;
  std::size_t cl_size = 0;
  std::size_t n_eff_nei = 0;

  bool operator==(const ClassObservation&) const = default;
};

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObservationParts {
  std::optional<SmellStats> focal;
  std::optional<SmellStats> efferent;
  std::optional<InteractionStats> interactions;
  std::optional<std::size_t> cl_size;
  std::optional<std::size_t> n_eff_nei;
};

// Throws AssemblyError naming the first missing part or violated invariant.
ClassObservation build_observation(const SourceCorpus& corpus, ArtifactRef focal, const ObservationParts& parts);

// One observation per focal class, in focal_classes() order.
std::vector<ClassObservation> build_observations(const SourceCorpus& corpus, const DependencyGraph& graph,
                                                 const std::vector<SmellInstance>& smells, unsigned workers = 1);

// Observation column headers, in export order.
const std::vector<std::string>& observation_columns();
std::vector<std::string> observation_row(const ClassObservation& o);
ClassObservation observation_from_row(const std::vector<std::string>& header, const std::vector<std::string>& row);

std::string observations_to_csv(const std::vector<ClassObservation>& rows, const std::vector<std::string>& echo = {});

}  // namespace smellstab
