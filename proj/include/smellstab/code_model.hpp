#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "smellstab/java_syntax.hpp"

namespace smellstab {

enum class ArtifactKind { Class, Interface, Field, Constructor, Method };

std::string_view to_string(ArtifactKind kind);
ArtifactKind parse_artifact_kind(std::string_view name);

struct ArtifactId {
  std::string project;
  std::string qualified_name;
  ArtifactKind kind = ArtifactKind::Class;
  std::string signature;  // "(int,String)" for methods/constructors, empty otherwise

  auto operator<=>(const ArtifactId&) const = default;
  bool operator==(const ArtifactId&) const = default;

  // qualified_name followed by the signature, e.g. "a.B.m(int)".
  std::string display() const { return qualified_name + signature; }
};

// Index into SourceCorpus::artifacts.
using ArtifactRef = std::int32_t;
inline constexpr ArtifactRef kNoArtifact = -1;

enum class Visibility { Public, Protected, Package, Private };

// A declaration-level type reference after resolution. Exactly one of
// `internal` (a type in the corpus) or `external_name` is meaningful for
// reference types; primitives carry neither.
struct ResolvedType {
  ArtifactRef internal = kNoArtifact;
  std::string external_name;  // best-effort qualified name for JDK / library types
  std::string primitive;      // "int", "void", ...
  int dims = 0;

  bool is_internal() const { return internal != kNoArtifact; }
  bool is_primitive() const { return !primitive.empty(); }
  bool is_reference() const { return !is_primitive() && (is_internal() || !external_name.empty()); }
};

struct FieldDecl {
  ArtifactRef ref = kNoArtifact;
  Visibility visibility = Visibility::Package;
  bool is_static = false;
  bool is_final = false;
  ResolvedType type;
  const java::FieldAst* ast = nullptr;  // null for record components and enum constants without AST
};

struct MethodDecl {
  ArtifactRef ref = kNoArtifact;
  Visibility visibility = Visibility::Package;
  bool is_constructor = false;
  bool is_static = false;
  bool is_abstract = false;  // no body
  bool is_override = false;  // annotated @Override
  bool is_accessor = false;
  ArtifactRef accessed_field = kNoArtifact;  // field returned/assigned by an accessor
  std::string name;
  std::vector<std::string> param_types;  // erased simple names
  std::vector<ResolvedType> params;
  ResolvedType return_type;
  std::size_t loc = 0;
  std::size_t cyclo = 0;
  std::size_t max_nesting = 0;
  const java::MethodAst* ast = nullptr;
};

enum class TypeFlavor { Class, Interface, Enum, Record, Annotation };

struct TypeDecl {
  ArtifactRef ref = kNoArtifact;
  TypeFlavor flavor = TypeFlavor::Class;
  bool is_interface = false;
  bool is_abstract = false;
  Visibility visibility = Visibility::Package;
  std::optional<ResolvedType> superclass;
  std::vector<ResolvedType> interfaces;
  std::vector<FieldDecl> fields;
  std::vector<MethodDecl> methods;  // methods and constructors, declaration order
  std::vector<ArtifactRef> nested_types;
  ArtifactRef enclosing = kNoArtifact;  // direct enclosing type, none for top level
  ArtifactRef top_level = kNoArtifact;
  std::string file;  // path relative to the ingest root, '/' separated
  std::size_t loc = 0;
  std::vector<std::string> type_params;
  const java::TypeDeclAst* ast = nullptr;
  const java::CompilationUnit* unit = nullptr;
};

struct ArtifactInfo {
  ArtifactId id;
  ArtifactRef parent = kNoArtifact;     // direct enclosing type (members and nested types)
  ArtifactRef top_level = kNoArtifact;  // top-level type of the analysis unit
  std::int32_t type_index = -1;         // into SourceCorpus::types for the owning/self type
  std::int32_t member_index = -1;       // into fields/methods of the owning type
};

struct Diagnostic {
  std::string file;
  std::string message;
  auto operator<=>(const Diagnostic&) const = default;
};

class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolved model of one repository snapshot. Immutable once built.
class SourceCorpus {
 public:
  std::string project;
  std::string snapshot_commit;
  std::vector<ArtifactInfo> artifacts;
  std::vector<TypeDecl> types;
  std::vector<Diagnostic> diagnostics;
  std::vector<std::unique_ptr<java::CompilationUnit>> units;

  const ArtifactInfo& info(ArtifactRef ref) const;
  const ArtifactId& id(ArtifactRef ref) const { return info(ref).id; }
  ArtifactKind kind(ArtifactRef ref) const { return info(ref).id.kind; }
  bool is_type(ArtifactRef ref) const;

  std::optional<ArtifactRef> find(const ArtifactId& id) const;
  std::optional<ArtifactRef> find_type(std::string_view qualified_name) const;
  // Finds by display string ("a.B", "a.B.f", "a.B.m(int)").
  std::optional<ArtifactRef> find_display(std::string_view display) const;

  const TypeDecl& type_of(ArtifactRef type_ref) const;
  const MethodDecl& method(ArtifactRef ref) const;
  const FieldDecl& field(ArtifactRef ref) const;

  std::vector<ArtifactRef> top_level_types() const;
  // Top-level non-interface types: the focal classes of the analysis.
  std::vector<ArtifactRef> focal_classes() const;

  // All member and nested-type artifacts of a type, transitively.
  std::vector<ArtifactRef> members_transitive(ArtifactRef type_ref) const;

  // Internal superclass chain (nearest first), cycle-safe.
  std::vector<ArtifactRef> superclass_chain(ArtifactRef type_ref) const;
  // All internal supertypes (classes and interfaces), breadth first.
  std::vector<ArtifactRef> all_supertypes(ArtifactRef type_ref) const;

  // Type resolution in the lexical context of `context` (a type artifact).
  ResolvedType resolve_type(const java::TypeRef& ref, ArtifactRef context,
                            const std::vector<std::string>& extra_type_params = {}) const;
  // Resolves a dotted simple/qualified type name; nullopt when nothing matches.
  std::optional<ResolvedType> resolve_type_name(std::string_view name, ArtifactRef context,
                                                const std::vector<std::string>& extra_type_params = {}) const;
  // Static-import lookup for unqualified member names.
  std::vector<ArtifactRef> static_import_types(ArtifactRef context, std::string_view member) const;

  // Register a type and its members. Used by the builder.
  ArtifactRef add_artifact(ArtifactInfo info);
  void finalize_index();

 private:
  std::map<std::string, ArtifactRef, std::less<>> by_key_;
  std::map<std::string, ArtifactRef, std::less<>> types_by_name_;
  std::map<std::string, ArtifactRef, std::less<>> by_display_;
  std::multimap<std::string, ArtifactRef, std::less<>> types_by_package_;

  std::optional<ArtifactRef> lookup_nested(ArtifactRef type_ref, std::string_view simple, int depth) const;
};

struct IngestOptions {
  std::string project = "project";
  bool exclude_test_dirs = false;  // opt-in path filter
  unsigned workers = 1;
};

// Parses every .java file under `root` (sorted by path). Unreadable root is
// fatal; single-file parse failures become diagnostics.
SourceCorpus ingest_corpus(const std::filesystem::path& root, std::string snapshot, const IngestOptions& options = {});

// Builds a corpus from in-memory sources (path -> text). Deterministic.
SourceCorpus ingest_sources(const std::map<std::string, std::string>& sources, std::string snapshot,
                            const IngestOptions& options = {});

// Number of lines containing at least one character outside comments and
// whitespace.
std::size_t logical_loc(std::string_view text);
// Per-line flag (index 0 = first line): true when the line is logical.
std::vector<bool> logical_line_mask(std::string_view text);
// Per-line code text with comments and whitespace removed; empty for
// non-logical lines. Used for whitespace- and comment-insensitive diffs.
std::vector<std::string> logical_code_lines(std::string_view text);

// Analysis unit of an artifact: members and nested types (at any depth) map
// to their top-level type; top-level types map to themselves.
ArtifactRef enclosing_class(const SourceCorpus& corpus, ArtifactRef artifact);
ArtifactId enclosing_class(const SourceCorpus& corpus, const ArtifactId& artifact);

// Analysis unit of any artifact: its top-level type.
inline ArtifactRef analysis_unit(const SourceCorpus& corpus, ArtifactRef artifact) {
  return corpus.info(artifact).top_level;
}

// Deterministic JSON dump of the corpus (schema "smellstab.corpus/1").
std::string corpus_to_json(const SourceCorpus& corpus);

}  // namespace smellstab
