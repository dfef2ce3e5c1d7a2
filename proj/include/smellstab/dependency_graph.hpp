#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "smellstab/code_model.hpp"

namespace smellstab {

enum class RelationKind { Call, Create, Contain, Cast, Use, Throws, Return, Parameter, Extend, Implement };

inline constexpr RelationKind kAllRelations[] = {RelationKind::Call,   RelationKind::Create,    RelationKind::Contain,
                                                 RelationKind::Cast,   RelationKind::Use,       RelationKind::Throws,
                                                 RelationKind::Return, RelationKind::Parameter, RelationKind::Extend,
                                                 RelationKind::Implement};

std::string_view to_string(RelationKind kind);
RelationKind parse_relation_kind(std::string_view name);

// Opaque artifact outside the analyzed system (JDK, libraries, unresolved).
struct ExternalArtifact {
  std::string qualified_name;
  ArtifactKind kind = ArtifactKind::Class;
  auto operator<=>(const ExternalArtifact&) const = default;
};

// Edge endpoint: a corpus artifact (value >= 0) or an external artifact
// (value = -1 - index into DependencyGraph::externals).
struct Endpoint {
  std::int32_t value = 0;

  static Endpoint internal(ArtifactRef ref) { return {ref}; }
  static Endpoint external(std::size_t index) { return {-1 - static_cast<std::int32_t>(index)}; }
  bool is_external() const { return value < 0; }
  ArtifactRef ref() const { return value; }
  std::size_t external_index() const { return static_cast<std::size_t>(-1 - value); }
  auto operator<=>(const Endpoint&) const = default;
};

struct DependencyEdge {
  RelationKind relation = RelationKind::Use;
  ArtifactRef source = kNoArtifact;
  Endpoint target;
  std::uint32_t site_count = 1;

  bool is_external() const { return target.is_external(); }
};

class DependencyGraph {
 public:
  std::vector<DependencyEdge> edges;  // unique per (relation, source, target)
  std::vector<ExternalArtifact> externals;
  // Distinct local variables and parameters referenced, per corpus artifact.
  std::vector<std::uint32_t> local_variables_accessed;

  const std::vector<std::size_t>& from(ArtifactRef source) const;
  const std::vector<std::size_t>& to(ArtifactRef target) const;  // internal targets only

  ArtifactId target_id(const SourceCorpus& corpus, const DependencyEdge& e) const;
  ArtifactKind target_kind(const SourceCorpus& corpus, const DependencyEdge& e) const;

  void rebuild_indexes(std::size_t artifact_count);

 private:
  std::vector<std::vector<std::size_t>> by_source_;
  std::vector<std::vector<std::size_t>> by_target_;
};

// Emits typed edges for every syntactic dependency site in the corpus. All
// relation kinds are recorded uniformly (no weights).
DependencyGraph extract_dependencies(const SourceCorpus& corpus);

// Internal top-level types the focal class depends on (excluding itself and
// external artifacts), sorted by artifact reference. Throws DomainError when
// focal is not a top-level class.
std::vector<ArtifactRef> efferent_neighbors(const DependencyGraph& graph, const SourceCorpus& corpus, ArtifactRef focal);

// Edge-list CSV: relation, source_kind, source, target_kind, target, site_count
// (plus an "external" flag column), rows sorted.
std::string edges_to_csv(const DependencyGraph& graph, const SourceCorpus& corpus);

}  // namespace smellstab
