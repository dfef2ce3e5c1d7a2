#include "smellstab/neighborhood.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "smellstab/util.hpp"

namespace smellstab {

SmellFootprint smell_footprint(const SourceCorpus& corpus, const SmellInstance& instance) {
  SmellFootprint fp{instance, {instance.host}};
  if (level_of(instance.smell) == SmellLevel::Class) {
    auto members = corpus.members_transitive(instance.host);
    fp.artifacts.insert(fp.artifacts.end(), members.begin(), members.end());
  }
  std::sort(fp.artifacts.begin(), fp.artifacts.end());
  fp.artifacts.erase(std::unique(fp.artifacts.begin(), fp.artifacts.end()), fp.artifacts.end());
  return fp;
}

namespace {

SmellStats stats_over(const std::vector<SmellInstance>& smells, const std::set<ArtifactRef>& classes) {
  SmellStats s;
  std::set<SmellType> types;
  for (const auto& i : smells) {
    if (!classes.count(i.enclosing)) continue;
    ++s.count;
    types.insert(i.smell);
  }
  s.any = s.count > 0;
  s.variety = types.size();
  return s;
}

}  // namespace

SmellStats focal_smell_stats(ArtifactRef focal, const std::vector<SmellInstance>& smells) {
  return stats_over(smells, {focal});
}

SmellStats efferent_smell_stats(const std::vector<ArtifactRef>& neighbors, const std::vector<SmellInstance>& smells) {
  return stats_over(smells, std::set<ArtifactRef>(neighbors.begin(), neighbors.end()));
}

SmellStats efferent_smell_stats(ArtifactRef focal, const SourceCorpus& corpus, const DependencyGraph& graph,
                                const std::vector<SmellInstance>& smells) {
  return efferent_smell_stats(efferent_neighbors(graph, corpus, focal), smells);
}

bool efferent_coupling_flag(const SmellStats& focal, const SmellStats& efferent) { return focal.any && efferent.any; }

namespace {

// Artifact -> indices of the smell instances whose footprint covers it.
std::map<ArtifactRef, std::vector<std::size_t>> coverage(const SourceCorpus& corpus,
                                                         const std::vector<SmellInstance>& smells,
                                                         const std::set<ArtifactRef>& units) {
  std::map<ArtifactRef, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < smells.size(); ++i) {
    if (!units.count(smells[i].enclosing)) continue;
    for (auto a : smell_footprint(corpus, smells[i]).artifacts) out[a].push_back(i);
  }
  return out;
}

}  // namespace

InteractionStats efferent_interactions(ArtifactRef focal, const DependencyGraph& graph, const SourceCorpus& corpus,
                                       const std::vector<SmellInstance>& smells) {
  const auto nei = efferent_neighbors(graph, corpus, focal);
  const std::set<ArtifactRef> nei_set(nei.begin(), nei.end());
  const auto focal_cov = coverage(corpus, smells, {focal});
  const auto eff_cov = coverage(corpus, smells, nei_set);
  InteractionStats out;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [source, cs1s] : focal_cov) {
    for (auto idx : graph.from(source)) {
      const auto& e = graph.edges[idx];
      if (e.relation == RelationKind::Contain || e.is_external()) continue;
      auto it = eff_cov.find(e.target.ref());
      if (it == eff_cov.end()) continue;
      bool counted = false;
      for (auto a : cs1s)
        for (auto b : it->second) {
          if (a == b) continue;
          pairs.emplace(a, b);
          counted = true;
        }
      if (counted) out.intensity += e.site_count;
    }
  }
  out.pair_list.assign(pairs.begin(), pairs.end());
  out.pairs = pairs.size();
  out.any = out.pairs > 0;
  return out;
}

ClassObservation build_observation(const SourceCorpus& corpus, ArtifactRef focal, const ObservationParts& parts) {
  if (!parts.focal) throw AssemblyError("observation for " + corpus.id(focal).display() + ": focal smell stats missing");
  if (!parts.efferent) throw AssemblyError("observation for " + corpus.id(focal).display() + ": efferent smell stats missing");
  if (!parts.interactions) throw AssemblyError("observation for " + corpus.id(focal).display() + ": interaction stats missing");
  if (!parts.cl_size) throw AssemblyError("observation for " + corpus.id(focal).display() + ": class size missing");
  if (!parts.n_eff_nei) throw AssemblyError("observation for " + corpus.id(focal).display() + ": neighbor count missing");
  ClassObservation o;
  o.project = corpus.project;
  o.focal = corpus.id(focal).display();
  o.is_smelly = parts.focal->any;
  o.n_smell_foc = parts.focal->count;
  o.var_smell_foc = parts.focal->variety;
  o.has_smell_eff = parts.efferent->any;
  o.n_smell_eff = parts.efferent->count;
  o.var_smell_eff = parts.efferent->variety;
  o.has_eff_coup = efferent_coupling_flag(*parts.focal, *parts.efferent);
  o.has_eff_int = parts.interactions->any;
  o.n_eff_smell_int = parts.interactions->pairs;
  o.eff_int_inten = parts.interactions->intensity;
  o.cl_size = *parts.cl_size;
  o.n_eff_nei = *parts.n_eff_nei;
  if (o.has_eff_int && !o.has_eff_coup)
    throw AssemblyError("observation for " + o.focal + ": interaction without coupling");
  return o;
}

std::vector<ClassObservation> build_observations(const SourceCorpus& corpus, const DependencyGraph& graph,
                                                 const std::vector<SmellInstance>& smells, unsigned workers) {
  const auto focal = corpus.focal_classes();
  std::vector<ClassObservation> out(focal.size());
  parallel_for(focal.size(), workers, [&](std::size_t i) {
    const ArtifactRef f = focal[i];
    const auto nei = efferent_neighbors(graph, corpus, f);
    ObservationParts parts;
    parts.focal = focal_smell_stats(f, smells);
    parts.efferent = efferent_smell_stats(nei, smells);
    parts.interactions = efferent_interactions(f, graph, corpus, smells);
    parts.cl_size = corpus.type_of(f).loc;
    parts.n_eff_nei = nei.size();
    out[i] = build_observation(corpus, f, parts);
  });
  return out;
}

const std::vector<std::string>& observation_columns() {
  static const std::vector<std::string> cols = {"project",    "class",       "IsSmelly",  "#SmellFoc",  "VarSmellFoc",
                                                "HasSmellEff", "#SmellEff",  "VarSmellEff", "HasEffCoup", "HasEffInt",
                                                "#EffSmellInt", "EffIntInten", "ClSize",   "#EffNei"};
  return cols;
}

namespace {

std::string flag(bool b) { return b ? "1" : "0"; }

bool parse_flag(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("not a boolean: " + s);
}

std::size_t parse_count(const std::string& s) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size() || (!s.empty() && s[0] == '-')) throw std::invalid_argument("not a count: " + s);
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<std::string> observation_row(const ClassObservation& o) {
  return {o.project,
          o.focal,
          flag(o.is_smelly),
          std::to_string(o.n_smell_foc),
          std::to_string(o.var_smell_foc),
          flag(o.has_smell_eff),
          std::to_string(o.n_smell_eff),
          std::to_string(o.var_smell_eff),
          flag(o.has_eff_coup),
          flag(o.has_eff_int),
          std::to_string(o.n_eff_smell_int),
          std::to_string(o.eff_int_inten),
          std::to_string(o.cl_size),
          std::to_string(o.n_eff_nei)};
}

ClassObservation observation_from_row(const std::vector<std::string>& header, const std::vector<std::string>& row) {
  auto get = [&](const std::string& name) -> const std::string& {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) {
        if (i >= row.size()) throw std::invalid_argument("short row for column " + name);
        return row[i];
      }
    throw std::invalid_argument("missing column " + name);
  };
  ClassObservation o;
  o.project = get("project");
  o.focal = get("class");
  o.is_smelly = parse_flag(get("IsSmelly"));
  o.n_smell_foc = parse_count(get("#SmellFoc"));
  o.var_smell_foc = parse_count(get("VarSmellFoc"));
  o.has_smell_eff = parse_flag(get("HasSmellEff"));
  o.n_smell_eff = parse_count(get("#SmellEff"));
  o.var_smell_eff = parse_count(get("VarSmellEff"));
  o.has_eff_coup = parse_flag(get("HasEffCoup"));
  o.has_eff_int = parse_flag(get("HasEffInt"));
  o.n_eff_smell_int = parse_count(get("#EffSmellInt"));
  o.eff_int_inten = parse_count(get("EffIntInten"));
  o.cl_size = parse_count(get("ClSize"));
  o.n_eff_nei = parse_count(get("#EffNei"));
  return o;
}

std::string observations_to_csv(const std::vector<ClassObservation>& rows, const std::vector<std::string>& echo) {
  std::string out;
  for (const auto& l : echo) out += "# cfg " + l + "\n";
  out += csv::row(observation_columns());
  for (const auto& o : rows) out += csv::row(observation_row(o));
  return out;
}

}  // namespace smellstab
