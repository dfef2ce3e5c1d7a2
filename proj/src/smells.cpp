#include "smellstab/smells.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "smellstab/util.hpp"

namespace smellstab {

// --- configuration -----------------------------------------------------------

namespace {

struct ThresholdSpec {
  const char* key;
  double value;
  bool ratio;
};

// Count thresholds are compared against non-negative counts; ratios lie in (0,1).
const ThresholdSpec kThresholds[] = {
    {"FEW", 5, false},          {"MANY", 10, false},        {"WMC_VH", 47, false},
    {"WMC_H", 31, false},       {"WMC_AVG", 14, false},     {"AMW_AVG", 2, false},
    {"NOM_AVG", 7, false},      {"LOC_HIGH", 65, false},    {"CYCLO_RATIO", 0.24, true},
    {"NEST_SEV", 5, false},     {"NEST_SHALLOW", 1, false}, {"NOAV_MANY", 8, false},
    {"FEW_ATFD", 5, false},     {"FEW_FDP", 5, false},      {"MEMCAP", 7, false},
    {"CM_HIGH", 10, false},     {"CC_MANY", 5, false},      {"BC_LOC", 197, false},
    {"TCC_LOW", 1.0 / 3, true}, {"LAA_LOW", 1.0 / 3, true}, {"WOC_LOW", 1.0 / 3, true},
    {"BUR_LOW", 1.0 / 3, true}, {"BOVR_LOW", 1.0 / 3, true}, {"CDISP_HIGH", 0.5, true},
    {"CDISP_LOW", 0.25, true},  {"BC_TCC", 0.5, true},      {"PNAS_HIGH", 2.0 / 3, true},
};

const ThresholdSpec* spec_of(std::string_view key) {
  for (const auto& s : kThresholds)
    if (key == s.key) return &s;
  return nullptr;
}

}  // namespace

ThresholdConfig ThresholdConfig::defaults() {
  ThresholdConfig c;
  for (const auto& s : kThresholds) c.values_[s.key] = s.value;
  return c;
}

void ThresholdConfig::set(std::string_view key, double value) {
  const auto* spec = spec_of(key);
  if (!spec) throw ConfigError("unknown threshold key: " + std::string(key));
  if (spec->ratio ? !(value > 0 && value < 1) : !(value > 0))
    throw ConfigError("threshold " + std::string(key) + " out of range: " + format_double(value));
  values_[std::string(key)] = value;
}

double ThresholdConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown threshold key: " + std::string(key));
  return it->second;
}

ThresholdConfig ThresholdConfig::parse(std::string_view text) {
  ThresholdConfig c = defaults();
  for (const auto& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      line = trim(std::string_view(line).substr(1));
      if (!starts_with(line, "cfg ")) continue;
      line = trim(std::string_view(line).substr(4));
    } else if (starts_with(line, "cfg ")) {
      line = trim(std::string_view(line).substr(4));
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("non-numeric value for " + key + ": " + value);
    }
    if (key == "version") {
      if (v != kVersion) throw ConfigError("unsupported threshold config version " + value);
      continue;
    }
    c.set(key, v);
  }
  return c;
}

std::vector<std::string> ThresholdConfig::echo_lines() const {
  std::vector<std::string> out{"version=" + std::to_string(kVersion)};
  for (const auto& [k, v] : values_) out.push_back(k + "=" + format_double(v));
  return out;
}

std::string ThresholdConfig::serialize() const {
  std::string out;
  for (const auto& l : echo_lines()) out += l + "\n";
  return out;
}

std::uint64_t ThresholdConfig::hash() const { return fnv1a64(serialize()); }

// --- smell names -------------------------------------------------------------

std::string_view to_string(SmellType s) {
  switch (s) {
    case SmellType::FE: return "FE";
    case SmellType::BM: return "BM";
    case SmellType::DiCo: return "DiCo";
    case SmellType::IC: return "IC";
    case SmellType::SS: return "SS";
    case SmellType::GC: return "GC";
    case SmellType::BC: return "BC";
    case SmellType::DC: return "DC";
    case SmellType::RB: return "RB";
    case SmellType::TB: return "TB";
  }
  return "FE";
}

SmellType parse_smell_type(std::string_view name) {
  for (auto s : kAllSmells)
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown smell type: " + std::string(name));
}

SmellLevel level_of(SmellType s) {
  switch (s) {
    case SmellType::FE:
    case SmellType::BM:
    case SmellType::DiCo:
    case SmellType::IC:
    case SmellType::SS:
      return SmellLevel::Method;
    default:
      return SmellLevel::Class;
  }
}

std::string_view to_string(SmellLevel l) { return l == SmellLevel::Method ? "method" : "class"; }

// --- metrics -----------------------------------------------------------------

MetricsEngine::MetricsEngine(const SourceCorpus& corpus, const DependencyGraph& graph) : corpus_(corpus), graph_(graph) {}

namespace {

bool is_method_like(ArtifactKind k) { return k == ArtifactKind::Method || k == ArtifactKind::Constructor; }

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

std::string method_key(const MethodDecl& m) { return m.name + "(" + join(m.param_types, ",") + ")"; }

}  // namespace

std::vector<ArtifactRef> MetricsEngine::fields_accessed(ArtifactRef source) const {
  std::vector<ArtifactRef> out;
  for (auto idx : graph_.from(source)) {
    const auto& e = graph_.edges[idx];
    if (e.relation == RelationKind::Use && !e.is_external() && corpus_.kind(e.target.ref()) == ArtifactKind::Field)
      out.push_back(e.target.ref());
  }
  return out;
}

// A field is "own" for a method when it belongs to the method's analysis unit
// or to an internal ancestor of the declaring type or of the unit.
bool MetricsEngine::is_own_field(ArtifactRef method, ArtifactRef field) const {
  if (analysis_unit(corpus_, field) == analysis_unit(corpus_, method)) return true;
  const ArtifactRef owner = corpus_.info(field).parent;
  for (ArtifactRef t = corpus_.info(method).parent; t != kNoArtifact; t = corpus_.info(t).parent) {
    auto sup = corpus_.all_supertypes(t);
    if (std::find(sup.begin(), sup.end(), owner) != sup.end()) return true;
  }
  return false;
}

MethodMetrics MetricsEngine::method_metrics(ArtifactRef method) const {
  if (!is_method_like(corpus_.kind(method))) throw LookupError(corpus_.id(method).display() + " is not a method");
  const MethodDecl& md = corpus_.method(method);
  MethodMetrics out;
  if (md.is_abstract) return out;
  out.loc = md.loc;
  out.cyclo = md.cyclo;
  out.max_nesting = md.max_nesting;

  const ArtifactRef unit = analysis_unit(corpus_, method);
  std::set<ArtifactRef> fields;
  std::set<ArtifactRef> own;
  std::set<ArtifactRef> foreign;
  for (auto f : fields_accessed(method)) {
    fields.insert(f);
    (is_own_field(method, f) ? own : foreign).insert(f);
  }
  std::set<ArtifactRef> called;
  std::set<ArtifactRef> providers;
  for (auto idx : graph_.from(method)) {
    const auto& e = graph_.edges[idx];
    if (e.relation != RelationKind::Call || e.is_external()) continue;
    const ArtifactRef target = e.target.ref();
    if (corpus_.kind(target) != ArtifactKind::Method || analysis_unit(corpus_, target) == unit) continue;
    called.insert(target);
    providers.insert(analysis_unit(corpus_, target));
    const MethodDecl& callee = corpus_.method(target);
    if (callee.is_accessor && callee.accessed_field != kNoArtifact && !is_own_field(method, callee.accessed_field))
      foreign.insert(callee.accessed_field);
  }
  out.noav = graph_.local_variables_accessed[static_cast<std::size_t>(method)] + fields.size();
  out.atfd = foreign.size();
  out.laa = own.empty() && foreign.empty() ? 1.0 : ratio(own.size(), own.size() + foreign.size());
  std::set<ArtifactRef> fdp;
  for (auto f : foreign) fdp.insert(analysis_unit(corpus_, f));
  out.fdp = fdp.size();
  out.cint = called.size();
  out.cdisp = ratio(providers.size(), called.size());

  std::set<ArtifactRef> callers;
  std::set<ArtifactRef> caller_units;
  for (auto idx : graph_.to(method)) {
    const auto& e = graph_.edges[idx];
    if (e.relation != RelationKind::Call) continue;
    const ArtifactRef su = analysis_unit(corpus_, e.source);
    if (su == unit) continue;
    callers.insert(e.source);
    caller_units.insert(su);
  }
  out.cm = callers.size();
  out.cc = caller_units.size();
  return out;
}

ClassMetrics MetricsEngine::class_metrics(ArtifactRef cls) const {
  const auto& info = corpus_.info(cls);
  if (info.id.kind != ArtifactKind::Class || info.parent != kNoArtifact)
    throw DomainError(info.id.display() + " is not a top-level class");
  const TypeDecl& t = corpus_.type_of(cls);
  ClassMetrics out;
  out.loc = t.loc;

  std::set<ArtifactRef> foreign;
  std::vector<std::set<ArtifactRef>> own_access;  // per eligible method, own declared fields
  std::set<ArtifactRef> declared;
  for (const auto& f : t.fields) declared.insert(f.ref);

  std::size_t public_methods = 0;
  std::size_t functional_public = 0;
  for (const auto& m : t.methods) {
    out.wmc += m.cyclo;
    ++out.nom;
    for (auto f : fields_accessed(m.ref))
      if (!is_own_field(m.ref, f)) foreign.insert(f);
    for (auto idx : graph_.from(m.ref)) {
      const auto& e = graph_.edges[idx];
      if (e.relation != RelationKind::Call || e.is_external() || corpus_.kind(e.target.ref()) != ArtifactKind::Method)
        continue;
      const MethodDecl& callee = corpus_.method(e.target.ref());
      if (analysis_unit(corpus_, callee.ref) != cls && callee.is_accessor && callee.accessed_field != kNoArtifact &&
          !is_own_field(m.ref, callee.accessed_field))
        foreign.insert(callee.accessed_field);
    }
    if (!m.is_constructor && !m.is_abstract) {
      std::set<ArtifactRef> acc;
      for (auto f : fields_accessed(m.ref))
        if (declared.count(f)) acc.insert(f);
      own_access.push_back(std::move(acc));
    }
    if (!m.is_constructor && m.visibility == Visibility::Public) {
      ++public_methods;
      if (m.is_accessor) ++out.noam;
      else if (!m.is_abstract) ++functional_public;
    }
  }
  out.atfd = foreign.size();
  out.amw = ratio(out.wmc, out.nom);

  std::size_t pairs = 0;
  std::size_t connected = 0;
  for (std::size_t i = 0; i < own_access.size(); ++i)
    for (std::size_t j = i + 1; j < own_access.size(); ++j) {
      ++pairs;
      if (std::any_of(own_access[i].begin(), own_access[i].end(), [&](ArtifactRef f) { return own_access[j].count(f) > 0; }))
        ++connected;
    }
  out.tcc = ratio(connected, pairs);

  std::size_t public_fields = 0;
  for (const auto& f : t.fields) {
    if (f.visibility != Visibility::Public) continue;
    ++public_fields;
    if (!(f.is_static && f.is_final)) ++out.nopa;
  }
  out.woc = ratio(functional_public, public_methods + public_fields);

  // Inheritance metrics over the internal superclass chain; nearest
  // declaration wins for a given method signature.
  const auto chain = corpus_.superclass_chain(cls);
  std::set<ArtifactRef> protected_members;
  std::map<std::string, ArtifactRef> inherited;
  for (auto s : chain) {
    const TypeDecl& st = corpus_.type_of(s);
    for (const auto& f : st.fields)
      if (f.visibility == Visibility::Protected) protected_members.insert(f.ref);
    for (const auto& m : st.methods) {
      if (m.is_constructor) continue;
      if (m.visibility == Visibility::Protected) protected_members.insert(m.ref);
      if (m.visibility != Visibility::Private && !m.is_static) inherited.emplace(method_key(m), m.ref);
    }
  }
  out.nprotm = protected_members.size();
  std::set<ArtifactRef> used;
  std::vector<ArtifactRef> sources{cls};
  for (const auto& f : t.fields) sources.push_back(f.ref);
  for (const auto& m : t.methods) sources.push_back(m.ref);
  for (auto s : sources)
    for (auto idx : graph_.from(s)) {
      const auto& e = graph_.edges[idx];
      if (!e.is_external() && protected_members.count(e.target.ref())) used.insert(e.target.ref());
    }
  out.bur = ratio(used.size(), protected_members.size());

  std::set<std::string> ancestor_methods;
  for (auto s : corpus_.all_supertypes(cls))
    for (const auto& m : corpus_.type_of(s).methods)
      if (!m.is_constructor) ancestor_methods.insert(method_key(m));
  std::size_t overriding = 0;
  for (const auto& m : t.methods) {
    if (m.is_constructor || m.is_static) continue;
    const std::string key = method_key(m);
    if (inherited.count(key)) ++overriding;
    if (m.visibility == Visibility::Public && !m.is_override && !ancestor_methods.count(key)) ++out.nas;
  }
  out.bovr = ratio(overriding, inherited.size());
  out.pnas = ratio(out.nas, public_methods);
  return out;
}

MethodMetrics compute_method_metrics(const SourceCorpus& corpus, const DependencyGraph& graph, ArtifactRef method) {
  return MetricsEngine(corpus, graph).method_metrics(method);
}

ClassMetrics compute_class_metrics(const SourceCorpus& corpus, const DependencyGraph& graph, ArtifactRef cls) {
  return MetricsEngine(corpus, graph).class_metrics(cls);
}

// --- strategies --------------------------------------------------------------

bool method_smell(SmellType s, const MethodMetrics& m, const ThresholdConfig& cfg) {
  auto T = [&](const char* k) { return cfg.get(k); };
  const double loc = static_cast<double>(m.loc);
  const double nest = static_cast<double>(m.max_nesting);
  const double cint = static_cast<double>(m.cint);
  switch (s) {
    case SmellType::BM:
      return loc > T("LOC_HIGH") && loc > 0 && static_cast<double>(m.cyclo) / loc >= T("CYCLO_RATIO") &&
             nest >= T("NEST_SEV") && static_cast<double>(m.noav) > T("NOAV_MANY");
    case SmellType::FE:
      return static_cast<double>(m.atfd) > T("FEW_ATFD") && m.laa < T("LAA_LOW") &&
             static_cast<double>(m.fdp) <= T("FEW_FDP");
    case SmellType::DiCo:
      return cint > T("MEMCAP") && m.cdisp >= T("CDISP_HIGH") && nest > T("NEST_SHALLOW");
    case SmellType::IC:
      return ((cint > T("MEMCAP") && m.cdisp < T("CDISP_HIGH")) || (cint > T("FEW") && m.cdisp < T("CDISP_LOW"))) &&
             nest > T("NEST_SHALLOW");
    case SmellType::SS:
      return static_cast<double>(m.cm) > T("CM_HIGH") && static_cast<double>(m.cc) > T("CC_MANY");
    default:
      return false;
  }
}

bool class_smell(SmellType s, const ClassMetrics& m, std::size_t bm_count, bool internal_superclass,
                 const ThresholdConfig& cfg) {
  auto T = [&](const char* k) { return cfg.get(k); };
  const double wmc = static_cast<double>(m.wmc);
  const double loc = static_cast<double>(m.loc);
  const double nom = static_cast<double>(m.nom);
  switch (s) {
    case SmellType::GC:
      return static_cast<double>(m.atfd) > T("FEW") && wmc >= T("WMC_VH") && m.tcc < T("TCC_LOW");
    case SmellType::DC: {
      const double data = static_cast<double>(m.nopa + m.noam);
      return m.woc < T("WOC_LOW") &&
             ((data > T("FEW") && wmc < T("WMC_H")) || (data > T("MANY") && wmc < T("WMC_VH")));
    }
    case SmellType::BC:
      return ((bm_count >= 2 && loc >= T("BC_LOC") && wmc >= T("WMC_VH")) ||
              (bm_count == 1 && loc >= 2 * T("BC_LOC") && wmc >= 2 * T("WMC_VH"))) &&
             m.tcc < T("BC_TCC");
    case SmellType::RB:
      return internal_superclass &&
             ((static_cast<double>(m.nprotm) > T("FEW") && m.bur < T("BUR_LOW")) || m.bovr < T("BOVR_LOW")) &&
             (m.amw > T("AMW_AVG") || wmc > T("WMC_AVG")) && nom > T("NOM_AVG");
    case SmellType::TB:
      return internal_superclass && static_cast<double>(m.nas) >= T("NOM_AVG") && m.pnas >= T("PNAS_HIGH") &&
             (m.amw > T("AMW_AVG") || wmc >= T("WMC_H")) && nom >= T("NOM_AVG");
    default:
      return false;
  }
}

// --- detection ---------------------------------------------------------------

namespace {

std::vector<ArtifactRef> unit_methods(const SourceCorpus& c, ArtifactRef cls) {
  std::vector<ArtifactRef> out;
  for (const auto& m : c.type_of(cls).methods) out.push_back(m.ref);
  for (auto a : c.members_transitive(cls))
    if (is_method_like(c.kind(a)) && c.info(a).parent != cls) out.push_back(a);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SmellReport detect_smells(const SourceCorpus& corpus, const DependencyGraph& graph, const ThresholdConfig& cfg,
                          unsigned workers) {
  const MetricsEngine engine(corpus, graph);
  const auto focal = corpus.focal_classes();
  std::vector<std::vector<SmellInstance>> per_class(focal.size());
  std::vector<std::vector<Diagnostic>> per_diag(focal.size());
  parallel_for(focal.size(), workers, [&](std::size_t i) {
    const ArtifactRef cls = focal[i];
    auto& out = per_class[i];
    std::size_t bm = 0;
    for (auto m : unit_methods(corpus, cls)) {
      if (corpus.method(m).is_abstract) continue;
      const MethodMetrics mm = engine.method_metrics(m);
      for (auto s : kAllSmells) {
        if (level_of(s) != SmellLevel::Method || !method_smell(s, mm, cfg)) continue;
        out.push_back({s, m, cls});
        if (s == SmellType::BM) ++bm;
      }
    }
    const TypeDecl& t = corpus.type_of(cls);
    const bool internal_super = t.superclass && t.superclass->is_internal();
    if (t.superclass && !t.superclass->is_internal() && t.ast && !t.ast->extends.empty())
      per_diag[i].push_back({t.file, corpus.id(cls).display() + ": RB/TB skipped, superclass " +
                                         t.superclass->external_name + " is outside the system"});
    const ClassMetrics cm = engine.class_metrics(cls);
    for (auto s : kAllSmells)
      if (level_of(s) == SmellLevel::Class && class_smell(s, cm, bm, internal_super, cfg)) out.push_back({s, cls, cls});
  });
  SmellReport report;
  for (auto& v : per_class) report.instances.insert(report.instances.end(), v.begin(), v.end());
  for (auto& v : per_diag) report.diagnostics.insert(report.diagnostics.end(), v.begin(), v.end());
  std::sort(report.instances.begin(), report.instances.end(), [&](const SmellInstance& a, const SmellInstance& b) {
    if (a.smell != b.smell) return a.smell < b.smell;
    return corpus.id(a.host).display() < corpus.id(b.host).display();
  });
  return report;
}

// --- exports -----------------------------------------------------------------

namespace {

std::string cfg_header(const ThresholdConfig& cfg) {
  std::string out;
  for (const auto& l : cfg.echo_lines()) out += "# cfg " + l + "\n";
  return out;
}

std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace

std::string metrics_to_csv(const SourceCorpus& corpus, const DependencyGraph& graph, const ThresholdConfig& cfg) {
  const MetricsEngine engine(corpus, graph);
  std::string out = cfg_header(cfg);
  out += csv::row({"level", "artifact", "enclosing_class", "loc", "cyclo", "max_nesting", "noav", "atfd", "laa", "fdp",
                   "cint", "cdisp", "cm", "cc", "wmc", "tcc", "woc", "nopa", "noam", "nom", "amw", "nprotm", "bur",
                   "bovr", "nas", "pnas", "abstract", "internal_superclass"});
  for (auto cls : corpus.focal_classes()) {
    const auto cm = engine.class_metrics(cls);
    const TypeDecl& t = corpus.type_of(cls);
    const bool internal_super = t.superclass && t.superclass->is_internal();
    const std::string name = corpus.id(cls).display();
    out += csv::row({"class", name, name, num(cm.loc), "", "", "", num(cm.atfd), "", "", "", "", "", "", num(cm.wmc),
                     format_double(cm.tcc), format_double(cm.woc), num(cm.nopa), num(cm.noam), num(cm.nom),
                     format_double(cm.amw), num(cm.nprotm), format_double(cm.bur), format_double(cm.bovr), num(cm.nas),
                     format_double(cm.pnas), "", internal_super ? "true" : "false"});
    for (auto m : unit_methods(corpus, cls)) {
      const auto mm = engine.method_metrics(m);
      out += csv::row({"method", corpus.id(m).display(), name, num(mm.loc), num(mm.cyclo), num(mm.max_nesting),
                       num(mm.noav), num(mm.atfd), format_double(mm.laa), num(mm.fdp), num(mm.cint),
                       format_double(mm.cdisp), num(mm.cm), num(mm.cc), "", "", "", "", "", "", "", "", "", "", "", "",
                       corpus.method(m).is_abstract ? "true" : "false", ""});
    }
  }
  return out;
}

std::string smells_to_csv(const SourceCorpus& corpus, const std::vector<SmellInstance>& smells,
                          const ThresholdConfig& cfg) {
  std::string out = cfg_header(cfg);
  out += csv::row({"smell", "level", "host", "enclosing_class"});
  for (const auto& s : smells)
    out += csv::row({std::string(to_string(s.smell)), std::string(to_string(level_of(s.smell))),
                     corpus.id(s.host).display(), corpus.id(s.enclosing).display()});
  return out;
}

}  // namespace smellstab
