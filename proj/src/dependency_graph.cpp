#include "smellstab/dependency_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "smellstab/util.hpp"

namespace smellstab {

std::string_view to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::Call: return "call";
    case RelationKind::Create: return "create";
    case RelationKind::Contain: return "contain";
    case RelationKind::Cast: return "cast";
    case RelationKind::Use: return "use";
    case RelationKind::Throws: return "throws";
    case RelationKind::Return: return "return";
    case RelationKind::Parameter: return "parameter";
    case RelationKind::Extend: return "extend";
    case RelationKind::Implement: return "implement";
  }
  return "use";
}

RelationKind parse_relation_kind(std::string_view name) {
  for (auto k : kAllRelations)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown relation kind: " + std::string(name));
}

const std::vector<std::size_t>& DependencyGraph::from(ArtifactRef source) const {
  static const std::vector<std::size_t> empty;
  if (source < 0 || static_cast<std::size_t>(source) >= by_source_.size()) return empty;
  return by_source_[static_cast<std::size_t>(source)];
}

const std::vector<std::size_t>& DependencyGraph::to(ArtifactRef target) const {
  static const std::vector<std::size_t> empty;
  if (target < 0 || static_cast<std::size_t>(target) >= by_target_.size()) return empty;
  return by_target_[static_cast<std::size_t>(target)];
}

ArtifactId DependencyGraph::target_id(const SourceCorpus& corpus, const DependencyEdge& e) const {
  if (!e.target.is_external()) return corpus.id(e.target.ref());
  const auto& x = externals.at(e.target.external_index());
  return ArtifactId{corpus.project, x.qualified_name, x.kind, ""};
}

ArtifactKind DependencyGraph::target_kind(const SourceCorpus& corpus, const DependencyEdge& e) const {
  if (!e.target.is_external()) return corpus.kind(e.target.ref());
  return externals.at(e.target.external_index()).kind;
}

void DependencyGraph::rebuild_indexes(std::size_t artifact_count) {
  by_source_.assign(artifact_count, {});
  by_target_.assign(artifact_count, {});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.source >= 0 && static_cast<std::size_t>(e.source) < artifact_count)
      by_source_[static_cast<std::size_t>(e.source)].push_back(i);
    if (!e.target.is_external() && static_cast<std::size_t>(e.target.ref()) < artifact_count)
      by_target_[static_cast<std::size_t>(e.target.ref())].push_back(i);
  }
}

namespace {

std::string last_segment(std::string_view name) {
  auto dot = name.rfind('.');
  return std::string(dot == std::string_view::npos ? name : name.substr(dot + 1));
}

// Static type of an expression.
struct EType {
  enum class Kind { Unknown, Primitive, Value, TypeName, Package };
  Kind kind = Kind::Unknown;
  ResolvedType type;  // Value / TypeName
  std::string text;   // Primitive name or partial package

  static EType unknown() { return {}; }
  static EType primitive(std::string name) {
    EType t;
    t.kind = Kind::Primitive;
    t.text = std::move(name);
    return t;
  }
  static EType value(ResolvedType r) {
    EType t;
    if (r.is_primitive() && r.dims == 0) return primitive(r.primitive);
    if (!r.is_primitive() && !r.is_internal() && r.external_name.empty()) return unknown();
    t.kind = Kind::Value;
    t.type = std::move(r);
    return t;
  }
  static EType type_name(ResolvedType r) {
    EType t;
    t.kind = Kind::TypeName;
    t.type = std::move(r);
    return t;
  }
  bool internal_class() const {
    return (kind == Kind::Value || kind == Kind::TypeName) && type.is_internal() && type.dims == 0;
  }
  bool external_ref() const {
    return (kind == Kind::Value || kind == Kind::TypeName) && !type.is_internal() && !type.is_primitive() &&
           type.dims == 0;
  }
};

struct Var {
  EType type;
  std::uint32_t id = 0;
};

// A class scope in effect while walking bodies: a corpus type, or a local /
// anonymous class identified by its resolved supertype.
struct Frame {
  ArtifactRef type = kNoArtifact;
  ResolvedType anon_super;
  bool anonymous = false;
};

class Extractor {
 public:
  explicit Extractor(const SourceCorpus& c) : c_(c) {
    local_counts_.assign(c.artifacts.size(), 0);
  }

  DependencyGraph run() {
    for (const auto& t : c_.types) visit_type(t);
    DependencyGraph g;
    g.externals = externals_;
    for (const auto& [key, count] : counts_) {
      const auto& [source, relation, target] = key;
      g.edges.push_back(DependencyEdge{static_cast<RelationKind>(relation), source, Endpoint{target}, count});
    }
    g.local_variables_accessed = std::move(local_counts_);
    g.rebuild_indexes(c_.artifacts.size());
    return g;
  }

 private:
  const SourceCorpus& c_;
  std::map<std::tuple<ArtifactRef, int, std::int32_t>, std::uint32_t> counts_;
  std::vector<ExternalArtifact> externals_;
  std::map<ExternalArtifact, std::size_t> external_index_;
  std::vector<std::uint32_t> local_counts_;

  // Walk state.
  ArtifactRef source_ = kNoArtifact;
  std::vector<Frame> frames_;
  std::vector<std::map<std::string, Var>> scopes_;
  std::vector<std::string> tparams_;
  std::set<std::uint32_t> accessed_;
  std::uint32_t next_var_ = 0;

  // --- emission ------------------------------------------------------------
  Endpoint external(std::string name, ArtifactKind kind) {
    ExternalArtifact x{std::move(name), kind};
    auto it = external_index_.find(x);
    if (it != external_index_.end()) return Endpoint::external(it->second);
    const std::size_t idx = externals_.size();
    externals_.push_back(x);
    external_index_.emplace(std::move(x), idx);
    return Endpoint::external(idx);
  }

  void emit(RelationKind rel, ArtifactRef source, Endpoint target) {
    if (source == kNoArtifact) return;
    ++counts_[{source, static_cast<int>(rel), target.value}];
  }

  void emit_resolved(RelationKind rel, ArtifactRef source, const ResolvedType& r) {
    if (r.is_primitive()) return;
    if (r.is_internal()) {
      emit(rel, source, Endpoint::internal(r.internal));
    } else if (!r.external_name.empty()) {
      emit(rel, source, external(r.external_name, ArtifactKind::Class));
    }
  }

  bool is_type_variable(const std::string& name) const {
    if (std::find(tparams_.begin(), tparams_.end(), name) != tparams_.end()) return true;
    for (ArtifactRef t = context_type(); t != kNoArtifact; t = c_.info(t).parent) {
      const auto& tp = c_.type_of(t).type_params;
      if (std::find(tp.begin(), tp.end(), name) != tp.end()) return true;
    }
    return false;
  }

  ArtifactRef context_type() const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it)
      if (!it->anonymous) return it->type;
    return kNoArtifact;
  }

  ResolvedType resolve(const java::TypeRef& t) const { return c_.resolve_type(t, context_type(), tparams_); }

  // Emits `rel` for a type reference and `use` for its generic arguments.
  ResolvedType emit_type(RelationKind rel, ArtifactRef source, const java::TypeRef& t) {
    if (t.empty() || t.is_var()) return {};
    ResolvedType r;
    if (t.dims == 0 && t.args.empty() && is_type_variable(t.name)) {
      r.external_name = "java.lang.Object";
      return r;
    }
    if (!is_type_variable(t.name)) {
      r = resolve(t);
      if (!(r.external_name == "java.lang.Object" && rel == RelationKind::Use && t.name == "java.lang.Object"))
        emit_resolved(rel, source, r);
    } else {
      r.external_name = "java.lang.Object";
      r.dims = t.dims;
    }
    for (const auto& a : t.args) {
      if (a.name == "java.lang.Object") continue;  // unbounded wildcard
      emit_type(RelationKind::Use, source, a);
    }
    return r;
  }

  // --- declarations --------------------------------------------------------
  void visit_type(const TypeDecl& t) {
    frames_.clear();
    std::vector<ArtifactRef> chain;
    for (ArtifactRef x = t.ref; x != kNoArtifact; x = c_.info(x).parent) chain.push_back(x);
    std::reverse(chain.begin(), chain.end());
    for (auto x : chain) frames_.push_back(Frame{x, {}, false});
    tparams_.clear();
    const auto& ast = *t.ast;

    for (const auto& f : t.fields) emit(RelationKind::Contain, t.ref, Endpoint::internal(f.ref));
    for (const auto& m : t.methods) emit(RelationKind::Contain, t.ref, Endpoint::internal(m.ref));
    for (auto n : t.nested_types) emit(RelationKind::Contain, t.ref, Endpoint::internal(n));

    // Supertypes resolve in the enclosing scope; frames include the type
    // itself, which only matters for self-named nested lookups.
    if (t.is_interface) {
      for (std::size_t i = 0; i < ast.extends.size() && i < t.interfaces.size(); ++i) {
        emit_resolved(RelationKind::Extend, t.ref, t.interfaces[i]);
        for (const auto& a : ast.extends[i].args) emit_type(RelationKind::Use, t.ref, a);
      }
    } else {
      if (t.superclass) emit_resolved(RelationKind::Extend, t.ref, *t.superclass);
      if (!ast.extends.empty())
        for (const auto& a : ast.extends[0].args) emit_type(RelationKind::Use, t.ref, a);
      for (std::size_t i = 0; i < t.interfaces.size(); ++i) {
        emit_resolved(RelationKind::Implement, t.ref, t.interfaces[i]);
        if (i < ast.implements.size())
          for (const auto& a : ast.implements[i].args) emit_type(RelationKind::Use, t.ref, a);
      }
    }

    // Fields: enum constants first, then record components, then declared fields.
    std::size_t fi = ast.enum_constants.size();
    for (std::size_t i = 0; i < ast.record_components.size() && fi < t.fields.size(); ++i, ++fi) {
      emit_type(RelationKind::Use, t.fields[fi].ref, ast.record_components[i].type);
    }
    for (; fi < t.fields.size(); ++fi) {
      const auto& f = t.fields[fi];
      if (!f.ast) continue;
      emit_type(RelationKind::Use, f.ref, f.ast->type);
      if (f.ast->init) {
        begin_source(f.ref);
        expr(f.ast->init.get());
        end_source();
      }
    }

    // Enum constant arguments and bodies belong to the type.
    for (const auto& ec : ast.enum_constants) {
      begin_source(t.ref);
      for (const auto& a : ec.args) expr(a.get());
      if (ec.body) {
        ResolvedType self;
        self.internal = t.ref;
        walk_anonymous_body(*ec.body, self);
      }
      end_source();
    }

    for (const auto& init : ast.body.initializers) {
      begin_source(t.ref);
      stmt(init.body.get());
      end_source();
    }

    for (const auto& m : t.methods) visit_method(t, m);
  }

  void visit_method(const TypeDecl& t, const MethodDecl& m) {
    const auto& ast = *m.ast;
    tparams_ = ast.type_params;
    if (!ast.is_constructor && !ast.return_type.is_primitive()) emit_type(RelationKind::Return, m.ref, ast.return_type);
    for (const auto& p : ast.params) emit_type(RelationKind::Parameter, m.ref, p.type);
    for (const auto& th : ast.throws) emit_type(RelationKind::Throws, m.ref, th);
    if (ast.body) {
      begin_source(m.ref);
      for (std::size_t i = 0; i < ast.params.size(); ++i) {
        ResolvedType r = i < m.params.size() ? m.params[i] : ResolvedType{};
        declare(ast.params[i].name, EType::value(r));
      }
      stmt(ast.body.get());
      end_source();
    }
    tparams_.clear();
    (void)t;
  }

  void begin_source(ArtifactRef source) {
    source_ = source;
    scopes_.clear();
    scopes_.emplace_back();
    accessed_.clear();
  }

  void end_source() {
    if (source_ != kNoArtifact) local_counts_[static_cast<std::size_t>(source_)] += static_cast<std::uint32_t>(accessed_.size());
    scopes_.clear();
    accessed_.clear();
    source_ = kNoArtifact;
  }

  void declare(const std::string& name, EType type) {
    if (scopes_.empty()) scopes_.emplace_back();
    scopes_.back()[name] = Var{std::move(type), next_var_++};
  }

  const Var* lookup_local(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  void walk_anonymous_body(const java::TypeBody& body, const ResolvedType& super) {
    frames_.push_back(Frame{kNoArtifact, super, true});
    scopes_.emplace_back();
    for (const auto& f : body.fields) {
      ResolvedType r = emit_type(RelationKind::Use, source_, f.type);
      declare(f.name, EType::value(r));
    }
    for (const auto& f : body.fields)
      if (f.init) expr(f.init.get());
    for (const auto& init : body.initializers) stmt(init.body.get());
    for (const auto& m : body.methods) {
      if (!m.body) continue;
      scopes_.emplace_back();
      for (const auto& p : m.params) {
        ResolvedType r = emit_type(RelationKind::Use, source_, p.type);
        declare(p.name, EType::value(r));
      }
      stmt(m.body.get());
      scopes_.pop_back();
    }
    for (const auto& nested : body.types) walk_local_type(*nested);
    scopes_.pop_back();
    frames_.pop_back();
  }

  void walk_local_type(const java::TypeDeclAst& decl) {
    ResolvedType super;
    if (!decl.extends.empty()) super = emit_type(RelationKind::Use, source_, decl.extends.front());
    for (const auto& i : decl.implements) emit_type(RelationKind::Use, source_, i);
    walk_anonymous_body(decl.body, super);
  }

  // --- member lookup -------------------------------------------------------
  std::vector<ArtifactRef> hierarchy(ArtifactRef type) const {
    std::vector<ArtifactRef> out{type};
    for (auto s : c_.all_supertypes(type)) out.push_back(s);
    return out;
  }

  ArtifactRef find_field(ArtifactRef type, const std::string& name) const {
    for (auto t : hierarchy(type))
      for (const auto& f : c_.type_of(t).fields)
        if (last_segment(c_.id(f.ref).qualified_name) == name) return f.ref;
    return kNoArtifact;
  }

  static std::string erased(const EType& t) {
    if (t.kind == EType::Kind::Primitive) return t.text;
    if (t.kind != EType::Kind::Value) return "";
    return "";
  }

  std::string erased_value(const EType& t) const {
    if (t.kind == EType::Kind::Primitive) return t.text;
    if (t.kind != EType::Kind::Value) return "";
    std::string base = t.type.is_primitive()  ? t.type.primitive
                       : t.type.is_internal() ? last_segment(c_.id(t.type.internal).qualified_name)
                                              : last_segment(t.type.external_name);
    for (int i = 0; i < t.type.dims; ++i) base += "[]";
    return base;
  }

  // Candidate selection: arity first, then exact erased-name matches.
  ArtifactRef select(const std::vector<const MethodDecl*>& candidates, const std::vector<EType>& args) const {
    const MethodDecl* best = nullptr;
    int best_score = -1000000;
    for (const auto* m : candidates) {
      const auto& params = m->ast->params;
      const bool varargs = !params.empty() && params.back().varargs;
      const std::size_t n = params.size();
      if (!(args.size() == n || (varargs && args.size() + 1 >= n))) continue;
      int score = 0;
      for (std::size_t i = 0; i < args.size() && i < n; ++i) {
        const std::string a = erased_value(args[i]);
        if (a.empty()) continue;
        const std::string& p = m->param_types[i];
        if (a == p) score += 2;
        else if (args[i].kind == EType::Kind::Primitive && p.find('[') == std::string::npos &&
                 std::islower(static_cast<unsigned char>(p[0])))
          score += 0;
        else
          score -= 1;
      }
      if (args.size() != n) score -= 1;
      if (score > best_score) {
        best_score = score;
        best = m;
      }
    }
    return best ? best->ref : kNoArtifact;
  }

  ArtifactRef find_method(ArtifactRef type, const std::string& name, const std::vector<EType>& args) const {
    std::vector<const MethodDecl*> candidates;
    for (auto t : hierarchy(type))
      for (const auto& m : c_.type_of(t).methods)
        if (!m.is_constructor && m.name == name) candidates.push_back(&m);
    return select(candidates, args);
  }

  ArtifactRef find_method_any_arity(ArtifactRef type, const std::string& name) const {
    for (auto t : hierarchy(type))
      for (const auto& m : c_.type_of(t).methods)
        if (!m.is_constructor && m.name == name) return m.ref;
    return kNoArtifact;
  }

  ArtifactRef find_constructor(ArtifactRef type, const std::vector<EType>& args) const {
    std::vector<const MethodDecl*> candidates;
    for (const auto& m : c_.type_of(type).methods)
      if (m.is_constructor) candidates.push_back(&m);
    return select(candidates, args);
  }

  // Name of the first external ancestor, used to label unresolved inherited members.
  std::string external_ancestor(ArtifactRef type) const {
    for (auto t : hierarchy(type)) {
      const auto& d = c_.type_of(t);
      if (d.superclass && !d.superclass->is_internal() && d.superclass->external_name != "java.lang.Object")
        return d.superclass->external_name;
      for (const auto& i : d.interfaces)
        if (!i.is_internal()) return i.external_name;
    }
    return "";
  }

  EType type_of_member(const ResolvedType& r) const { return EType::value(r); }

  ArtifactRef superclass_of(ArtifactRef type) const {
    const auto& d = c_.type_of(type);
    return d.superclass && d.superclass->is_internal() ? d.superclass->internal : kNoArtifact;
  }

  // --- expressions ---------------------------------------------------------
  std::vector<EType> args_of(const java::Expr& call, std::size_t first) {
    std::vector<EType> out;
    for (std::size_t i = first; i < call.kids.size(); ++i) out.push_back(expr(call.kids[i].get()));
    return out;
  }

  EType field_access(ArtifactRef owner, const std::string& name) {
    ArtifactRef f = find_field(owner, name);
    if (f == kNoArtifact) return EType::unknown();
    emit(RelationKind::Use, source_, Endpoint::internal(f));
    return type_of_member(c_.field(f).type);
  }

  EType name_expr(const java::Expr& e) {
    if (const Var* v = lookup_local(e.name)) {
      accessed_.insert(v->id);
      return v->type;
    }
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      ArtifactRef owner = it->anonymous ? it->anon_super.internal : it->type;
      if (owner == kNoArtifact) continue;
      ArtifactRef f = find_field(owner, e.name);
      if (f != kNoArtifact) {
        emit(RelationKind::Use, source_, Endpoint::internal(f));
        return type_of_member(c_.field(f).type);
      }
    }
    for (auto t : c_.static_import_types(context_type(), e.name)) {
      ArtifactRef f = find_field(t, e.name);
      if (f != kNoArtifact) {
        emit(RelationKind::Use, source_, Endpoint::internal(f));
        return type_of_member(c_.field(f).type);
      }
    }
    if (!is_type_variable(e.name)) {
      if (auto r = c_.resolve_type_name(e.name, context_type(), tparams_)) {
        if (!r->is_primitive()) return EType::type_name(*r);
      }
    }
    EType pkg;
    pkg.kind = EType::Kind::Package;
    pkg.text = e.name;
    return pkg;
  }

  EType field_expr(const java::Expr& e) {
    const java::Expr* target = e.kids[0].get();
    if (target->kind == java::Expr::Kind::Super) {
      ArtifactRef s = superclass_of(context_type());
      if (s != kNoArtifact) return field_access(s, e.name);
      return EType::unknown();
    }
    EType t = expr(target);
    switch (t.kind) {
      case EType::Kind::Package: {
        const std::string dotted = t.text + "." + e.name;
        if (auto r = c_.resolve_type_name(dotted, kNoArtifact)) {
          if (r->is_internal()) return EType::type_name(*r);
        }
        EType pkg;
        pkg.kind = EType::Kind::Package;
        pkg.text = dotted;
        return pkg;
      }
      case EType::Kind::TypeName:
        if (t.type.is_internal()) {
          ArtifactRef f = find_field(t.type.internal, e.name);
          if (f != kNoArtifact) {
            emit(RelationKind::Use, source_, Endpoint::internal(f));
            return type_of_member(c_.field(f).type);
          }
          if (auto r = c_.resolve_type_name(c_.id(t.type.internal).qualified_name + "." + e.name, kNoArtifact))
            return EType::type_name(*r);
          return EType::unknown();
        }
        if (std::isupper(static_cast<unsigned char>(e.name[0])) &&
            std::any_of(e.name.begin(), e.name.end(), [](char ch) { return std::islower(static_cast<unsigned char>(ch)); })) {
          ResolvedType nested;
          nested.external_name = t.type.external_name + "." + e.name;
          return EType::type_name(nested);
        }
        emit(RelationKind::Use, source_, external(t.type.external_name + "." + e.name, ArtifactKind::Field));
        return EType::unknown();
      case EType::Kind::Value:
        if (t.type.dims > 0) {
          if (e.name == "length") return EType::primitive("int");
          return EType::unknown();
        }
        if (t.type.is_internal()) return field_access(t.type.internal, e.name);
        if (!t.type.external_name.empty())
          emit(RelationKind::Use, source_, external(t.type.external_name + "." + e.name, ArtifactKind::Field));
        return EType::unknown();
      default:
        return EType::unknown();
    }
  }

  EType call_result(ArtifactRef method) {
    emit(RelationKind::Call, source_, Endpoint::internal(method));
    const auto& md = c_.method(method);
    if (md.return_type.is_primitive() && md.return_type.primitive == "void" && md.return_type.dims == 0)
      return EType::unknown();
    return type_of_member(md.return_type);
  }

  void external_call(const std::string& owner, const std::string& name) {
    emit(RelationKind::Call, source_, external((owner.empty() ? "?" : owner) + "." + name, ArtifactKind::Method));
  }

  EType call_expr(const java::Expr& e) {
    const java::Expr* target = e.has_target ? e.kids[0].get() : nullptr;
    if (!target && (e.name == "this" || e.name == "super")) {
      auto args = args_of(e, 1);
      ArtifactRef owner = e.name == "this" ? context_type() : superclass_of(context_type());
      if (owner != kNoArtifact) {
        ArtifactRef ctor = find_constructor(owner, args);
        if (ctor != kNoArtifact) emit(RelationKind::Call, source_, Endpoint::internal(ctor));
      } else if (e.name == "super" && context_type() != kNoArtifact) {
        const auto& d = c_.type_of(context_type());
        if (d.superclass && !d.superclass->is_internal()) external_call(d.superclass->external_name, "<init>");
      }
      return EType::unknown();
    }
    if (!target) {
      auto args = args_of(e, 1);
      for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
        ArtifactRef owner = it->anonymous ? it->anon_super.internal : it->type;
        if (owner == kNoArtifact) continue;
        ArtifactRef m = find_method(owner, e.name, args);
        if (m != kNoArtifact) return call_result(m);
      }
      for (auto t : c_.static_import_types(context_type(), e.name)) {
        ArtifactRef m = find_method(t, e.name, args);
        if (m != kNoArtifact) return call_result(m);
      }
      std::string owner;
      if (!frames_.empty() && frames_.back().anonymous && !frames_.back().anon_super.is_internal())
        owner = frames_.back().anon_super.external_name;
      else if (context_type() != kNoArtifact)
        owner = external_ancestor(context_type());
      external_call(owner, e.name);
      return EType::unknown();
    }
    ArtifactRef search = kNoArtifact;
    std::string ext_owner;
    if (target->kind == java::Expr::Kind::Super && target->type.name.empty()) {
      search = superclass_of(context_type());
      if (search == kNoArtifact && context_type() != kNoArtifact) {
        const auto& d = c_.type_of(context_type());
        if (d.superclass) ext_owner = d.superclass->external_name;
      }
    } else {
      EType t = expr(target);
      if (t.internal_class()) {
        search = t.type.internal;
      } else if (t.external_ref()) {
        ext_owner = t.type.external_name;
      } else {
        args_of(e, 1);
        return EType::unknown();
      }
    }
    auto args = args_of(e, 1);
    if (search != kNoArtifact) {
      ArtifactRef m = find_method(search, e.name, args);
      if (m != kNoArtifact) return call_result(m);
      external_call(external_ancestor(search), e.name);
      return EType::unknown();
    }
    if (!ext_owner.empty()) external_call(ext_owner, e.name);
    return EType::unknown();
  }

  EType new_expr(const java::Expr& e) {
    std::size_t first_arg = 0;
    ResolvedType r;
    if (e.has_target) {
      // outer.new Inner(...)
      EType outer = expr(e.kids[0].get());
      first_arg = 1;
      if (outer.internal_class()) {
        if (auto n = c_.resolve_type_name(c_.id(outer.type.internal).qualified_name + "." + e.type.name, kNoArtifact))
          r = *n;
      }
      if (!r.is_internal() && r.external_name.empty()) r = resolve(e.type);
      emit_resolved(RelationKind::Create, source_, r);
    } else {
      r = emit_type(RelationKind::Create, source_, e.type);
    }
    for (std::size_t i = first_arg; i < e.kids.size(); ++i) expr(e.kids[i].get());
    if (e.anon) walk_anonymous_body(*e.anon, r);
    return EType::value(r);
  }

  EType method_ref(const java::Expr& e) {
    ResolvedType owner;
    bool have_owner = false;
    if (e.has_target) {
      EType t = expr(e.kids[0].get());
      if (t.kind == EType::Kind::Value || t.kind == EType::Kind::TypeName) {
        owner = t.type;
        have_owner = true;
      } else if (t.kind == EType::Kind::Package && !e.type.name.empty()) {
        owner = resolve(e.type);
        have_owner = true;
      }
    } else if (!e.type.empty()) {
      owner = resolve(e.type);
      have_owner = !owner.is_primitive() || owner.dims > 0;
    }
    if (!have_owner) return EType::unknown();
    if (e.name == "new") {
      emit_resolved(RelationKind::Create, source_, owner);
      return EType::unknown();
    }
    if (owner.is_internal() && owner.dims == 0) {
      ArtifactRef m = find_method_any_arity(owner.internal, e.name);
      if (m != kNoArtifact) {
        emit(RelationKind::Call, source_, Endpoint::internal(m));
        return EType::unknown();
      }
      external_call(external_ancestor(owner.internal), e.name);
    } else if (!owner.is_internal() && !owner.external_name.empty()) {
      external_call(owner.external_name, e.name);
    }
    return EType::unknown();
  }

  EType expr(const java::Expr* e) {
    if (!e) return EType::unknown();
    using K = java::Expr::Kind;
    switch (e->kind) {
      case K::Literal: {
        if (e->name == "String") {
          ResolvedType s;
          s.external_name = "java.lang.String";
          return EType::value(s);
        }
        if (e->name == "null") return EType::unknown();
        return EType::primitive(e->name);
      }
      case K::Name:
        return name_expr(*e);
      case K::Field:
        return field_expr(*e);
      case K::Call:
        return call_expr(*e);
      case K::New:
        return new_expr(*e);
      case K::NewArray: {
        java::TypeRef elem = e->type;
        elem.dims = 0;
        ResolvedType r = elem.is_primitive() ? ResolvedType{} : emit_type(RelationKind::Use, source_, elem);
        if (elem.is_primitive()) r.primitive = elem.name;
        r.dims = e->type.dims;
        for (const auto& k : e->kids) expr(k.get());
        return EType::value(r);
      }
      case K::ArrayInit:
        for (const auto& k : e->kids) expr(k.get());
        return EType::unknown();
      case K::Cast: {
        ResolvedType r;
        if (e->type.is_primitive()) {
          r.primitive = e->type.name;
        } else {
          r = emit_type(RelationKind::Cast, source_, e->type);
        }
        for (const auto& k : e->kids) expr(k.get());
        return EType::value(r);
      }
      case K::This: {
        ResolvedType r;
        if (!e->type.name.empty()) {
          r = resolve(e->type);
        } else if (!frames_.empty() && frames_.back().anonymous) {
          r = frames_.back().anon_super;
        } else {
          r.internal = context_type();
        }
        return EType::value(r);
      }
      case K::Super: {
        ResolvedType r;
        ArtifactRef s = superclass_of(context_type());
        if (s != kNoArtifact) r.internal = s;
        return EType::value(r);
      }
      case K::ClassLit: {
        if (!e->type.is_primitive()) emit_type(RelationKind::Use, source_, e->type);
        ResolvedType cls;
        cls.external_name = "java.lang.Class";
        return EType::value(cls);
      }
      case K::InstanceOf: {
        for (const auto& k : e->kids) expr(k.get());
        ResolvedType r = emit_type(RelationKind::Use, source_, e->type);
        if (!e->name.empty()) declare(e->name, EType::value(r));
        return EType::primitive("boolean");
      }
      case K::Binary: {
        EType l = expr(e->kids[0].get());
        EType r = expr(e->kids[1].get());
        const std::string& op = e->name;
        if (op == "==" || op == "!=" || op == "<" || op == ">" || op == "<=" || op == ">=" || op == "&&" || op == "||")
          return EType::primitive("boolean");
        auto is_string = [](const EType& t) { return t.kind == EType::Kind::Value && t.type.external_name == "java.lang.String"; };
        if (op == "+" && (is_string(l) || is_string(r))) {
          ResolvedType s;
          s.external_name = "java.lang.String";
          return EType::value(s);
        }
        if (l.kind == EType::Kind::Primitive) return l;
        return r;
      }
      case K::Unary:
        return expr(e->kids[0].get());
      case K::Assign: {
        EType l = expr(e->kids[0].get());
        expr(e->kids[1].get());
        return l;
      }
      case K::Conditional: {
        expr(e->kids[0].get());
        EType a = expr(e->kids[1].get());
        EType b = expr(e->kids[2].get());
        return a.kind != EType::Kind::Unknown ? a : b;
      }
      case K::ArrayAccess: {
        EType a = expr(e->kids[0].get());
        expr(e->kids[1].get());
        if (a.kind == EType::Kind::Value && a.type.dims > 0) {
          ResolvedType r = a.type;
          r.dims -= 1;
          return EType::value(r);
        }
        return EType::unknown();
      }
      case K::Lambda: {
        scopes_.emplace_back();
        for (const auto& [type, name] : e->params) {
          ResolvedType r;
          if (!type.empty() && !type.is_var()) r = emit_type(RelationKind::Use, source_, type);
          declare(name, EType::value(r));
        }
        stmt(e->stmt.get());
        scopes_.pop_back();
        return EType::unknown();
      }
      case K::MethodRef:
        return method_ref(*e);
      case K::Switch:
        stmt(e->stmt.get());
        return EType::unknown();
    }
    return EType::unknown();
  }

  // --- statements ----------------------------------------------------------
  void local_var(const java::Stmt& s) {
    ResolvedType declared;
    const bool inferred = s.var_type.is_var();
    if (!inferred) {
      if (s.var_type.is_primitive()) declared.primitive = s.var_type.name;
      else declared = emit_type(RelationKind::Use, source_, s.var_type);
      if (s.var_type.is_primitive() || (!declared.is_internal() && declared.external_name.empty() && s.var_type.dims > 0)) {
        declared.primitive = s.var_type.name;
        declared.dims = s.var_type.dims;
      }
    }
    for (const auto& v : s.vars) {
      EType init = v.init ? expr(v.init.get()) : EType::unknown();
      EType type = inferred ? init : EType::value(declared);
      if (!inferred && v.extra_dims > 0 && type.kind == EType::Kind::Value) type.type.dims += v.extra_dims;
      declare(v.name, type);
    }
  }

  void stmt(const java::Stmt* s) {
    if (!s) return;
    using K = java::Stmt::Kind;
    switch (s->kind) {
      case K::Block:
        scopes_.emplace_back();
        for (const auto& c : s->stmts) stmt(c.get());
        scopes_.pop_back();
        return;
      case K::LocalVar:
        local_var(*s);
        return;
      case K::For:
        scopes_.emplace_back();
        for (const auto& r : s->resources) stmt(r.get());
        for (const auto& e : s->exprs) expr(e.get());
        for (const auto& c : s->stmts) stmt(c.get());
        scopes_.pop_back();
        return;
      case K::ForEach: {
        scopes_.emplace_back();
        EType iter = s->exprs.empty() ? EType::unknown() : expr(s->exprs[0].get());
        EType var;
        if (s->var_type.is_var()) {
          if (iter.kind == EType::Kind::Value && iter.type.dims > 0) {
            ResolvedType r = iter.type;
            r.dims -= 1;
            var = EType::value(r);
          }
        } else if (s->var_type.is_primitive()) {
          var = EType::primitive(s->var_type.name);
        } else {
          var = EType::value(emit_type(RelationKind::Use, source_, s->var_type));
        }
        for (const auto& v : s->vars) declare(v.name, var);
        for (const auto& c : s->stmts) stmt(c.get());
        scopes_.pop_back();
        return;
      }
      case K::Try:
        scopes_.emplace_back();
        for (const auto& r : s->resources) stmt(r.get());
        for (const auto& c : s->stmts) stmt(c.get());
        scopes_.pop_back();
        for (const auto& c : s->catches) {
          scopes_.emplace_back();
          ResolvedType first;
          for (std::size_t i = 0; i < c.types.size(); ++i) {
            ResolvedType r = emit_type(RelationKind::Use, source_, c.types[i]);
            if (i == 0) first = r;
          }
          declare(c.name, c.types.size() == 1 ? EType::value(first) : EType::unknown());
          stmt(c.body.get());
          scopes_.pop_back();
        }
        stmt(s->finally_block.get());
        return;
      case K::Switch:
        for (const auto& e : s->exprs) expr(e.get());
        scopes_.emplace_back();
        for (const auto& c : s->cases) {
          for (const auto& l : c.labels) {
            // Enum constant labels are unqualified names of the selector's type.
            if (l && l->kind == java::Expr::Kind::Name && !lookup_local(l->name)) continue;
            expr(l.get());
          }
          for (const auto& st : c.body) stmt(st.get());
        }
        scopes_.pop_back();
        return;
      case K::LocalClass:
        if (s->local_type) walk_local_type(*s->local_type);
        return;
      default:
        scopes_.emplace_back();
        for (const auto& e : s->exprs) expr(e.get());
        for (const auto& c : s->stmts) stmt(c.get());
        scopes_.pop_back();
        return;
    }
  }
};

}  // namespace

DependencyGraph extract_dependencies(const SourceCorpus& corpus) { return Extractor(corpus).run(); }

std::vector<ArtifactRef> efferent_neighbors(const DependencyGraph& graph, const SourceCorpus& corpus, ArtifactRef focal) {
  const auto& info = corpus.info(focal);
  if (info.id.kind != ArtifactKind::Class || info.parent != kNoArtifact)
    throw DomainError(info.id.display() + " is not a top-level class");
  std::set<ArtifactRef> out;
  std::vector<ArtifactRef> sources{focal};
  for (auto m : corpus.members_transitive(focal)) sources.push_back(m);
  for (auto s : sources) {
    for (auto idx : graph.from(s)) {
      const auto& e = graph.edges[idx];
      if (e.is_external()) continue;
      ArtifactRef unit = enclosing_class(corpus, e.target.ref());
      if (unit != focal) out.insert(unit);
    }
  }
  return {out.begin(), out.end()};
}

std::string edges_to_csv(const DependencyGraph& graph, const SourceCorpus& corpus) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    const auto& src = corpus.id(e.source);
    const ArtifactId tgt = graph.target_id(corpus, e);
    rows.push_back({std::string(to_string(e.relation)), std::string(to_string(src.kind)), src.display(),
                    std::string(to_string(tgt.kind)), tgt.display(), std::to_string(e.site_count),
                    e.is_external() ? "true" : "false"});
  }
  std::sort(rows.begin(), rows.end());
  std::string out = csv::row({"relation", "source_kind", "source", "target_kind", "target", "site_count", "external"});
  for (const auto& r : rows) out += csv::row(r);
  return out;
}

}  // namespace smellstab
