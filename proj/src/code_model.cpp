#include "smellstab/code_model.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "smellstab/util.hpp"

namespace smellstab {
namespace {

const std::unordered_set<std::string_view>& java_lang_types() {
  static const std::unordered_set<std::string_view> names = {
      "Object", "String", "Integer", "Long", "Short", "Byte", "Character", "Boolean", "Double", "Float", "Number",
      "Math", "StrictMath", "System", "Thread", "Runnable", "Exception", "RuntimeException", "Error", "Throwable",
      "IllegalArgumentException", "IllegalStateException", "NullPointerException", "UnsupportedOperationException",
      "IndexOutOfBoundsException", "ArrayIndexOutOfBoundsException", "StringIndexOutOfBoundsException",
      "ClassCastException", "ArithmeticException", "CloneNotSupportedException", "InterruptedException", "Iterable",
      "Comparable", "CharSequence", "StringBuilder", "StringBuffer", "Class", "Enum", "Record", "Void", "Override",
      "Deprecated", "SuppressWarnings", "FunctionalInterface", "SafeVarargs", "AutoCloseable", "Cloneable",
      "Process", "ProcessBuilder", "Runtime", "ClassLoader", "ThreadLocal", "StackOverflowError",
      "OutOfMemoryError", "AssertionError", "SecurityException", "NumberFormatException",
      "ReflectiveOperationException", "ClassNotFoundException", "NoSuchFieldException", "NoSuchMethodException",
      "IllegalAccessException", "InstantiationException", "Appendable", "Readable", "Iterable", "NegativeArraySizeException",
      "ArrayStoreException", "LinkageError", "ExceptionInInitializerError", "NoClassDefFoundError", "VirtualMachineError",
      "InheritableThreadLocal", "Module", "Package", "StackTraceElement"};
  return names;
}

bool is_primitive_name(std::string_view s) {
  return s == "int" || s == "long" || s == "short" || s == "byte" || s == "char" || s == "float" || s == "double" ||
         s == "boolean" || s == "void";
}

std::string last_segment(std::string_view name) {
  auto dot = name.rfind('.');
  return std::string(dot == std::string_view::npos ? name : name.substr(dot + 1));
}

Visibility visibility_of(const java::Modifiers& m) {
  if (m.has(java::kPublic)) return Visibility::Public;
  if (m.has(java::kProtected)) return Visibility::Protected;
  if (m.has(java::kPrivate)) return Visibility::Private;
  return Visibility::Package;
}

std::string erased_name(const java::TypeRef& t) {
  std::string s = last_segment(t.name);
  for (int i = 0; i < t.dims; ++i) s += "[]";
  return s;
}

std::string artifact_key(ArtifactKind kind, std::string_view qn, std::string_view sig) {
  return std::string(to_string(kind)) + "|" + std::string(qn) + std::string(sig);
}

TypeFlavor flavor_of(java::TypeFlavor f) {
  switch (f) {
    case java::TypeFlavor::Class: return TypeFlavor::Class;
    case java::TypeFlavor::Interface: return TypeFlavor::Interface;
    case java::TypeFlavor::Enum: return TypeFlavor::Enum;
    case java::TypeFlavor::Record: return TypeFlavor::Record;
    case java::TypeFlavor::Annotation: return TypeFlavor::Annotation;
  }
  return TypeFlavor::Class;
}

// --- syntactic method measures -------------------------------------------

struct ComplexityWalker {
  std::size_t decisions = 0;
  std::size_t max_depth = 0;

  void expr(const java::Expr* e, std::size_t depth) {
    if (!e) return;
    using K = java::Expr::Kind;
    if (e->kind == K::Conditional) ++decisions;
    if (e->kind == K::Binary && (e->name == "&&" || e->name == "||")) ++decisions;
    for (const auto& k : e->kids) expr(k.get(), depth);
    if (e->stmt) stmt(e->stmt.get(), depth);
    if (e->anon) body(*e->anon, depth);
  }

  void body(const java::TypeBody& b, std::size_t depth) {
    for (const auto& f : b.fields) expr(f.init.get(), depth);
    for (const auto& m : b.methods)
      if (m.body) stmt(m.body.get(), depth);
    for (const auto& init : b.initializers) stmt(init.body.get(), depth);
  }

  void enter(std::size_t depth) { max_depth = std::max(max_depth, depth); }

  void stmt(const java::Stmt* s, std::size_t depth) {
    if (!s) return;
    using K = java::Stmt::Kind;
    switch (s->kind) {
      case K::If: {
        ++decisions;
        enter(depth + 1);
        for (const auto& e : s->exprs) expr(e.get(), depth + 1);
        if (!s->stmts.empty()) stmt(s->stmts[0].get(), depth + 1);
        if (s->stmts.size() > 1) {
          const java::Stmt* other = s->stmts[1].get();
          // else-if chains stay at the same level
          stmt(other, other->kind == K::If ? depth : depth + 1);
        }
        return;
      }
      case K::For:
      case K::ForEach:
      case K::While:
      case K::Do:
        ++decisions;
        enter(depth + 1);
        for (const auto& r : s->resources) stmt(r.get(), depth + 1);
        for (const auto& e : s->exprs) expr(e.get(), depth + 1);
        for (const auto& c : s->stmts) stmt(c.get(), depth + 1);
        for (const auto& v : s->vars) expr(v.init.get(), depth + 1);
        return;
      case K::Switch:
        enter(depth + 1);
        for (const auto& e : s->exprs) expr(e.get(), depth + 1);
        for (const auto& c : s->cases) {
          if (!c.is_default || !c.labels.empty()) ++decisions;
          for (const auto& st : c.body) stmt(st.get(), depth + 1);
        }
        return;
      case K::Try:
        enter(depth + 1);
        for (const auto& r : s->resources) stmt(r.get(), depth + 1);
        for (const auto& c : s->stmts) stmt(c.get(), depth + 1);
        for (const auto& c : s->catches) {
          ++decisions;
          stmt(c.body.get(), depth + 1);
        }
        stmt(s->finally_block.get(), depth + 1);
        return;
      case K::Synchronized:
        enter(depth + 1);
        for (const auto& e : s->exprs) expr(e.get(), depth + 1);
        for (const auto& c : s->stmts) stmt(c.get(), depth + 1);
        return;
      case K::LocalClass:
        if (s->local_type) body(s->local_type->body, depth);
        return;
      default:
        for (const auto& e : s->exprs) expr(e.get(), depth);
        for (const auto& v : s->vars) expr(v.init.get(), depth);
        for (const auto& c : s->stmts) stmt(c.get(), depth);
        return;
    }
  }
};

}  // namespace

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::Class: return "class";
    case ArtifactKind::Interface: return "interface";
    case ArtifactKind::Field: return "field";
    case ArtifactKind::Constructor: return "constructor";
    case ArtifactKind::Method: return "method";
  }
  return "class";
}

ArtifactKind parse_artifact_kind(std::string_view name) {
  for (auto k : {ArtifactKind::Class, ArtifactKind::Interface, ArtifactKind::Field, ArtifactKind::Constructor,
                 ArtifactKind::Method})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown artifact kind: " + std::string(name));
}

// --- logical lines -----------------------------------------------------------

std::vector<std::string> logical_code_lines(std::string_view text) {
  std::vector<std::string> lines;
  if (text.empty()) return lines;
  enum class State { Code, LineComment, BlockComment, String, Char, TextBlock };
  State st = State::Code;
  std::string cur;
  auto keep = [&](char c) {
    if (!std::isspace(static_cast<unsigned char>(c))) cur += c;
  };
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c == '\n') {
      lines.push_back(std::move(cur));
      cur.clear();
      if (st == State::LineComment || st == State::String || st == State::Char) st = State::Code;
      continue;
    }
    switch (st) {
      case State::Code:
        if (c == '/' && i + 1 < n && text[i + 1] == '/') {
          st = State::LineComment;
          ++i;
        } else if (c == '/' && i + 1 < n && text[i + 1] == '*') {
          st = State::BlockComment;
          ++i;
        } else if (c == '"' && i + 2 < n && text[i + 1] == '"' && text[i + 2] == '"') {
          st = State::TextBlock;
          cur += "\"\"\"";
          i += 2;
        } else if (c == '"') {
          st = State::String;
          cur += c;
        } else if (c == '\'') {
          st = State::Char;
          cur += c;
        } else {
          keep(c);
        }
        break;
      case State::LineComment:
        break;
      case State::BlockComment:
        if (c == '*' && i + 1 < n && text[i + 1] == '/') {
          st = State::Code;
          ++i;
        }
        break;
      case State::String:
      case State::Char:
        if (c == '\\') {
          cur += c;
          if (i + 1 < n && text[i + 1] != '\n') cur += text[++i];
        } else {
          cur += c;
          if ((st == State::String && c == '"') || (st == State::Char && c == '\'')) st = State::Code;
        }
        break;
      case State::TextBlock:
        if (c == '\\') {
          cur += c;
          if (i + 1 < n && text[i + 1] != '\n') cur += text[++i];
        } else if (c == '"' && i + 2 < n && text[i + 1] == '"' && text[i + 2] == '"') {
          cur += "\"\"\"";
          st = State::Code;
          i += 2;
        } else {
          keep(c);
        }
        break;
    }
  }
  if (text.back() != '\n') lines.push_back(std::move(cur));
  return lines;
}

std::vector<bool> logical_line_mask(std::string_view text) {
  std::vector<bool> mask;
  for (const auto& l : logical_code_lines(text)) mask.push_back(!l.empty());
  return mask;
}

std::size_t logical_loc(std::string_view text) {
  auto mask = logical_line_mask(text);
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

// --- SourceCorpus ------------------------------------------------------------

const ArtifactInfo& SourceCorpus::info(ArtifactRef ref) const {
  if (ref < 0 || static_cast<std::size_t>(ref) >= artifacts.size())
    throw LookupError("unknown artifact reference " + std::to_string(ref));
  return artifacts[static_cast<std::size_t>(ref)];
}

bool SourceCorpus::is_type(ArtifactRef ref) const {
  auto k = kind(ref);
  return k == ArtifactKind::Class || k == ArtifactKind::Interface;
}

std::optional<ArtifactRef> SourceCorpus::find(const ArtifactId& id) const {
  auto it = by_key_.find(artifact_key(id.kind, id.qualified_name, id.signature));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::optional<ArtifactRef> SourceCorpus::find_type(std::string_view qualified_name) const {
  auto it = types_by_name_.find(qualified_name);
  if (it == types_by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<ArtifactRef> SourceCorpus::find_display(std::string_view display) const {
  auto it = by_display_.find(display);
  if (it == by_display_.end()) return std::nullopt;
  return it->second;
}

const TypeDecl& SourceCorpus::type_of(ArtifactRef type_ref) const {
  const auto& i = info(type_ref);
  if (!is_type(type_ref)) throw LookupError(i.id.display() + " is not a type");
  return types[static_cast<std::size_t>(i.type_index)];
}

const MethodDecl& SourceCorpus::method(ArtifactRef ref) const {
  const auto& i = info(ref);
  if (i.id.kind != ArtifactKind::Method && i.id.kind != ArtifactKind::Constructor)
    throw LookupError(i.id.display() + " is not a method");
  return types[static_cast<std::size_t>(i.type_index)].methods[static_cast<std::size_t>(i.member_index)];
}

const FieldDecl& SourceCorpus::field(ArtifactRef ref) const {
  const auto& i = info(ref);
  if (i.id.kind != ArtifactKind::Field) throw LookupError(i.id.display() + " is not a field");
  return types[static_cast<std::size_t>(i.type_index)].fields[static_cast<std::size_t>(i.member_index)];
}

std::vector<ArtifactRef> SourceCorpus::top_level_types() const {
  std::vector<ArtifactRef> out;
  for (const auto& t : types)
    if (t.enclosing == kNoArtifact) out.push_back(t.ref);
  return out;
}

std::vector<ArtifactRef> SourceCorpus::focal_classes() const {
  std::vector<ArtifactRef> out;
  for (const auto& t : types)
    if (t.enclosing == kNoArtifact && !t.is_interface) out.push_back(t.ref);
  return out;
}

std::vector<ArtifactRef> SourceCorpus::members_transitive(ArtifactRef type_ref) const {
  std::vector<ArtifactRef> out;
  std::function<void(ArtifactRef)> visit = [&](ArtifactRef t) {
    const auto& decl = type_of(t);
    for (const auto& f : decl.fields) out.push_back(f.ref);
    for (const auto& m : decl.methods) out.push_back(m.ref);
    for (auto nested : decl.nested_types) {
      out.push_back(nested);
      visit(nested);
    }
  };
  visit(type_ref);
  return out;
}

std::vector<ArtifactRef> SourceCorpus::superclass_chain(ArtifactRef type_ref) const {
  std::vector<ArtifactRef> chain;
  std::set<ArtifactRef> seen{type_ref};
  const TypeDecl* t = &type_of(type_ref);
  while (t->superclass && t->superclass->is_internal()) {
    ArtifactRef s = t->superclass->internal;
    if (!seen.insert(s).second) break;
    chain.push_back(s);
    t = &type_of(s);
  }
  return chain;
}

std::vector<ArtifactRef> SourceCorpus::all_supertypes(ArtifactRef type_ref) const {
  std::vector<ArtifactRef> out;
  std::set<ArtifactRef> seen{type_ref};
  std::deque<ArtifactRef> queue{type_ref};
  while (!queue.empty()) {
    const TypeDecl& t = type_of(queue.front());
    queue.pop_front();
    auto consider = [&](const ResolvedType& r) {
      if (r.is_internal() && seen.insert(r.internal).second) {
        out.push_back(r.internal);
        queue.push_back(r.internal);
      }
    };
    if (t.superclass) consider(*t.superclass);
    for (const auto& i : t.interfaces) consider(i);
  }
  return out;
}

ArtifactRef SourceCorpus::add_artifact(ArtifactInfo ai) {
  const auto ref = static_cast<ArtifactRef>(artifacts.size());
  artifacts.push_back(std::move(ai));
  return ref;
}

void SourceCorpus::finalize_index() {
  by_key_.clear();
  types_by_name_.clear();
  by_display_.clear();
  types_by_package_.clear();
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const auto& a = artifacts[i];
    const auto ref = static_cast<ArtifactRef>(i);
    by_key_.emplace(artifact_key(a.id.kind, a.id.qualified_name, a.id.signature), ref);
    by_display_.emplace(a.id.display(), ref);
    if (a.id.kind == ArtifactKind::Class || a.id.kind == ArtifactKind::Interface) {
      types_by_name_.emplace(a.id.qualified_name, ref);
    }
  }
  for (const auto& t : types) {
    if (t.enclosing != kNoArtifact) continue;
    std::string pkg = t.unit ? t.unit->package : "";
    types_by_package_.emplace(pkg, t.ref);
  }
}

std::optional<ArtifactRef> SourceCorpus::lookup_nested(ArtifactRef type_ref, std::string_view simple,
                                                       int depth) const {
  if (depth > 16) return std::nullopt;
  const TypeDecl& t = type_of(type_ref);
  for (auto n : t.nested_types)
    if (last_segment(id(n).qualified_name) == simple) return n;
  auto via = [&](const ResolvedType& r) -> std::optional<ArtifactRef> {
    if (!r.is_internal()) return std::nullopt;
    return lookup_nested(r.internal, simple, depth + 1);
  };
  if (t.superclass)
    if (auto r = via(*t.superclass)) return r;
  for (const auto& i : t.interfaces)
    if (auto r = via(i)) return r;
  return std::nullopt;
}

std::optional<ResolvedType> SourceCorpus::resolve_type_name(std::string_view name, ArtifactRef context,
                                                            const std::vector<std::string>& extra_type_params) const {
  ResolvedType out;
  if (name.empty()) return std::nullopt;
  if (is_primitive_name(name)) {
    out.primitive = std::string(name);
    return out;
  }
  auto segs = split(name, '.');
  const std::string& first = segs[0];

  auto finish_internal = [&](ArtifactRef start, std::size_t from) -> ResolvedType {
    ArtifactRef cur = start;
    for (std::size_t i = from; i < segs.size(); ++i) {
      auto n = lookup_nested(cur, segs[i], 0);
      if (!n) {
        ResolvedType ext;
        ext.external_name = id(cur).qualified_name;
        for (std::size_t j = i; j < segs.size(); ++j) ext.external_name += "." + segs[j];
        return ext;
      }
      cur = *n;
    }
    ResolvedType r;
    r.internal = cur;
    return r;
  };

  // Type variables erase to Object.
  if (segs.size() == 1) {
    bool is_tvar = std::find(extra_type_params.begin(), extra_type_params.end(), first) != extra_type_params.end();
    for (ArtifactRef t = context; !is_tvar && t != kNoArtifact; t = info(t).parent) {
      const auto& tp = type_of(t).type_params;
      is_tvar = std::find(tp.begin(), tp.end(), first) != tp.end();
    }
    if (is_tvar) {
      out.external_name = "java.lang.Object";
      return out;
    }
  }

  const java::CompilationUnit* unit = nullptr;
  if (context != kNoArtifact) {
    // Lexical scope: the context type, its members, its enclosing types.
    for (ArtifactRef t = context; t != kNoArtifact; t = info(t).parent) {
      if (last_segment(id(t).qualified_name) == first) return finish_internal(t, 1);
      if (auto n = lookup_nested(t, first, 0)) return finish_internal(*n, 1);
    }
    unit = type_of(context).unit;
  }
  if (unit) {
    for (const auto& imp : unit->imports) {
      if (imp.is_static || imp.on_demand) continue;
      if (last_segment(imp.name) == first) {
        if (auto t = find_type(imp.name)) return finish_internal(*t, 1);
        out.external_name = imp.name;
        for (std::size_t j = 1; j < segs.size(); ++j) out.external_name += "." + segs[j];
        return out;
      }
    }
    const std::string pkg_prefix = unit->package.empty() ? "" : unit->package + ".";
    if (auto t = find_type(pkg_prefix + first)) return finish_internal(*t, 1);
    for (const auto& imp : unit->imports) {
      if (imp.is_static || !imp.on_demand) continue;
      if (auto t = find_type(imp.name + "." + first)) return finish_internal(*t, 1);
    }
  } else {
    if (auto t = find_type(first)) return finish_internal(*t, 1);
  }
  // Fully qualified names.
  if (segs.size() > 1) {
    std::string prefix;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      prefix += (k ? "." : "") + segs[k];
      if (auto t = find_type(prefix)) return finish_internal(*t, k + 1);
    }
  }
  if (java_lang_types().count(first)) {
    out.external_name = "java.lang." + std::string(name);
    return out;
  }
  if (unit) {
    // Single-type static imports of nested types, e.g. import static a.B.Inner.
    for (const auto& imp : unit->imports)
      if (imp.is_static && !imp.on_demand && last_segment(imp.name) == first) {
        out.external_name = imp.name;
        return out;
      }
  }
  if (std::isupper(static_cast<unsigned char>(first[0])) || segs.size() > 1) {
    out.external_name = std::string(name);
    return out;
  }
  return std::nullopt;
}

ResolvedType SourceCorpus::resolve_type(const java::TypeRef& ref, ArtifactRef context,
                                        const std::vector<std::string>& extra_type_params) const {
  ResolvedType r;
  if (ref.name.empty()) return r;
  if (auto found = resolve_type_name(ref.name, context, extra_type_params)) {
    r = *found;
  } else {
    r.external_name = ref.name;
  }
  r.dims = ref.dims;
  return r;
}

std::vector<ArtifactRef> SourceCorpus::static_import_types(ArtifactRef context, std::string_view member) const {
  std::vector<ArtifactRef> out;
  if (context == kNoArtifact) return out;
  const auto* unit = type_of(context).unit;
  if (!unit) return out;
  for (const auto& imp : unit->imports) {
    if (!imp.is_static) continue;
    if (imp.on_demand) {
      if (auto t = find_type(imp.name)) out.push_back(*t);
    } else if (last_segment(imp.name) == member) {
      auto dot = imp.name.rfind('.');
      if (dot != std::string::npos)
        if (auto t = find_type(imp.name.substr(0, dot))) out.push_back(*t);
    }
  }
  return out;
}

ArtifactRef enclosing_class(const SourceCorpus& corpus, ArtifactRef artifact) {
  return corpus.info(artifact).top_level;
}

ArtifactId enclosing_class(const SourceCorpus& corpus, const ArtifactId& artifact) {
  auto ref = corpus.find(artifact);
  if (!ref) throw LookupError("unknown artifact " + artifact.display());
  return corpus.id(enclosing_class(corpus, *ref));
}

// --- corpus construction -----------------------------------------------------

namespace {

class CorpusBuilder {
 public:
  explicit CorpusBuilder(SourceCorpus& c) : c_(c) {}

  void register_unit(const java::CompilationUnit& unit, const std::string& file) {
    for (const auto& t : unit.types) register_type(*t, unit, file, kNoArtifact, unit.package);
  }

  void resolve_all() {
    c_.finalize_index();
    // Supertypes first so that nested-type lookup through inheritance works
    // for member types.
    for (auto& t : c_.types) resolve_supertypes(t);
    for (auto& t : c_.types) resolve_members(t);
    for (auto& t : c_.types) detect_accessors(t);
  }

 private:
  SourceCorpus& c_;

  static std::string signature_of(const java::MethodAst& m) {
    std::vector<std::string> parts;
    for (const auto& p : m.params) parts.push_back(erased_name(p.type));
    return "(" + join(parts, ",") + ")";
  }

  void register_type(const java::TypeDeclAst& ast, const java::CompilationUnit& unit, const std::string& file,
                     ArtifactRef enclosing, const std::string& prefix) {
    const std::string qn = prefix.empty() ? ast.name : prefix + "." + ast.name;
    const bool is_interface = ast.flavor == java::TypeFlavor::Interface || ast.flavor == java::TypeFlavor::Annotation;
    ArtifactId tid{c_.project, qn, is_interface ? ArtifactKind::Interface : ArtifactKind::Class, ""};
    if (seen_keys_.count(artifact_key(tid.kind, tid.qualified_name, "")) ||
        seen_keys_.count(artifact_key(is_interface ? ArtifactKind::Class : ArtifactKind::Interface, qn, ""))) {
      c_.diagnostics.push_back({file, "duplicate type " + qn + " ignored"});
      return;
    }
    seen_keys_.insert(artifact_key(tid.kind, tid.qualified_name, ""));

    const auto type_index = static_cast<std::int32_t>(c_.types.size());
    ArtifactInfo ai;
    ai.id = tid;
    ai.parent = enclosing;
    ai.type_index = type_index;
    const ArtifactRef ref = c_.add_artifact(std::move(ai));
    const ArtifactRef top = enclosing == kNoArtifact ? ref : c_.artifacts[static_cast<std::size_t>(enclosing)].top_level;
    c_.artifacts[static_cast<std::size_t>(ref)].top_level = top;

    {
      TypeDecl decl;
      decl.ref = ref;
      decl.flavor = flavor_of(ast.flavor);
      decl.is_interface = is_interface;
      decl.is_abstract = ast.mods.has(java::kAbstract) || is_interface;
      decl.visibility = visibility_of(ast.mods);
      decl.enclosing = enclosing;
      decl.top_level = top;
      decl.file = file;
      decl.type_params = ast.type_params;
      decl.ast = &ast;
      decl.unit = &unit;
      decl.loc = logical_loc(std::string_view(unit.source).substr(ast.begin, ast.end - ast.begin));
      c_.types.push_back(std::move(decl));
    }
    if (enclosing != kNoArtifact) c_.types[static_cast<std::size_t>(c_.info(enclosing).type_index)].nested_types.push_back(ref);

    auto add_field = [&](const std::string& name, Visibility vis, bool is_static, bool is_final,
                         const java::FieldAst* fast) {
      const std::string fqn = qn + "." + name;
      if (!seen_keys_.insert(artifact_key(ArtifactKind::Field, fqn, "")).second) return;
      ArtifactInfo fi;
      fi.id = ArtifactId{c_.project, fqn, ArtifactKind::Field, ""};
      fi.parent = ref;
      fi.top_level = top;
      fi.type_index = type_index;
      auto& decl = c_.types[static_cast<std::size_t>(type_index)];
      fi.member_index = static_cast<std::int32_t>(decl.fields.size());
      FieldDecl fd;
      fd.ref = c_.add_artifact(std::move(fi));
      fd.visibility = vis;
      fd.is_static = is_static;
      fd.is_final = is_final;
      fd.ast = fast;
      c_.types[static_cast<std::size_t>(type_index)].fields.push_back(std::move(fd));
    };

    for (const auto& ec : ast.enum_constants) add_field(ec.name, Visibility::Public, true, true, nullptr);
    for (const auto& rc : ast.record_components) add_field(rc.name, Visibility::Private, false, true, nullptr);
    for (const auto& f : ast.body.fields)
      add_field(f.name, visibility_of(f.mods), f.mods.has(java::kStatic), f.mods.has(java::kFinal), &f);

    for (const auto& m : ast.body.methods) {
      const bool ctor = m.is_constructor;
      const std::string mqn = ctor ? qn + ".<init>" : qn + "." + m.name;
      const std::string sig = signature_of(m);
      const ArtifactKind kind = ctor ? ArtifactKind::Constructor : ArtifactKind::Method;
      if (!seen_keys_.insert(artifact_key(kind, mqn, sig)).second) {
        c_.diagnostics.push_back({file, "duplicate member " + mqn + sig + " ignored"});
        continue;
      }
      ArtifactInfo mi;
      mi.id = ArtifactId{c_.project, mqn, kind, sig};
      mi.parent = ref;
      mi.top_level = top;
      mi.type_index = type_index;
      mi.member_index = static_cast<std::int32_t>(c_.types[static_cast<std::size_t>(type_index)].methods.size());
      MethodDecl md;
      md.ref = c_.add_artifact(std::move(mi));
      md.visibility = visibility_of(m.mods);
      md.is_constructor = ctor;
      md.is_static = m.mods.has(java::kStatic);
      md.is_abstract = !m.body;
      md.is_override = m.mods.annotated("Override");
      md.name = ctor ? "<init>" : m.name;
      for (const auto& p : m.params) md.param_types.push_back(erased_name(p.type));
      md.ast = &m;
      if (m.body) {
        md.loc = logical_loc(std::string_view(unit.source).substr(m.body_begin, m.body_end - m.body_begin));
        ComplexityWalker w;
        w.stmt(m.body.get(), 0);
        md.cyclo = 1 + w.decisions;
        md.max_nesting = w.max_depth;
      }
      c_.types[static_cast<std::size_t>(type_index)].methods.push_back(std::move(md));
    }

    for (const auto& nested : ast.body.types) register_type(*nested, unit, file, ref, qn);
  }

  void resolve_supertypes(TypeDecl& t) {
    const auto& ast = *t.ast;
    auto resolve = [&](const java::TypeRef& r) {
      // Supertype names resolve in the enclosing scope of the declaring type.
      ArtifactRef ctx = t.enclosing != kNoArtifact ? t.enclosing : t.ref;
      return c_.resolve_type(r, ctx, t.type_params);
    };
    if (t.is_interface) {
      for (const auto& e : ast.extends) {
        auto r = resolve(e);
        if (r.internal == t.ref) continue;
        t.interfaces.push_back(r);
      }
      return;
    }
    if (!ast.extends.empty()) {
      auto r = resolve(ast.extends.front());
      if (r.internal != t.ref) t.superclass = r;
    } else {
      ResolvedType root;
      root.external_name = t.flavor == TypeFlavor::Enum     ? "java.lang.Enum"
                           : t.flavor == TypeFlavor::Record ? "java.lang.Record"
                                                            : "java.lang.Object";
      t.superclass = root;
    }
    for (const auto& i : ast.implements) {
      auto r = resolve(i);
      if (r.internal == t.ref) continue;
      t.interfaces.push_back(r);
    }
  }

  void resolve_members(TypeDecl& t) {
    const auto& ast = *t.ast;
    std::size_t fi = 0;
    for (const auto& ec : ast.enum_constants) {
      (void)ec;
      if (fi < t.fields.size()) t.fields[fi++].type.internal = t.ref;
    }
    for (const auto& rc : ast.record_components) {
      if (fi < t.fields.size()) t.fields[fi++].type = c_.resolve_type(rc.type, t.ref);
    }
    for (; fi < t.fields.size(); ++fi) {
      if (t.fields[fi].ast) t.fields[fi].type = c_.resolve_type(t.fields[fi].ast->type, t.ref);
    }
    for (auto& m : t.methods) {
      const auto& mast = *m.ast;
      for (const auto& p : mast.params) m.params.push_back(c_.resolve_type(p.type, t.ref, mast.type_params));
      if (!mast.is_constructor) m.return_type = c_.resolve_type(mast.return_type, t.ref, mast.type_params);
    }
  }

  static const java::Expr* unwrap_this_field(const java::Expr* e) {
    if (!e) return nullptr;
    if (e->kind == java::Expr::Kind::Name) return e;
    if (e->kind == java::Expr::Kind::Field && e->has_target && e->kids[0] &&
        e->kids[0]->kind == java::Expr::Kind::This && e->kids[0]->type.name.empty())
      return e;
    return nullptr;
  }

  ArtifactRef own_field(const TypeDecl& t, const std::string& name) const {
    std::vector<ArtifactRef> scope{t.ref};
    for (auto s : c_.superclass_chain(t.ref)) scope.push_back(s);
    for (auto s : scope)
      for (const auto& f : c_.type_of(s).fields)
        if (last_segment(c_.id(f.ref).qualified_name) == name) return f.ref;
    return kNoArtifact;
  }

  void detect_accessors(TypeDecl& t) {
    for (auto& m : t.methods) {
      if (m.is_constructor || !m.ast->body) continue;
      const auto& body = *m.ast->body;
      if (body.stmts.size() != 1) continue;
      const java::Stmt& s = *body.stmts[0];
      auto is_param = [&](const std::string& n) {
        return std::any_of(m.ast->params.begin(), m.ast->params.end(), [&](const auto& p) { return p.name == n; });
      };
      if (s.kind == java::Stmt::Kind::Return && s.exprs.size() == 1 && m.ast->params.empty()) {
        const java::Expr* target = unwrap_this_field(s.exprs[0].get());
        if (!target) continue;
        ArtifactRef f = own_field(t, target->name);
        if (f != kNoArtifact) {
          m.is_accessor = true;
          m.accessed_field = f;
        }
      } else if (s.kind == java::Stmt::Kind::ExprStmt && s.exprs.size() == 1 && m.ast->params.size() == 1) {
        const java::Expr& e = *s.exprs[0];
        if (e.kind != java::Expr::Kind::Assign || e.name != "=") continue;
        const java::Expr* lhs = unwrap_this_field(e.kids[0].get());
        const java::Expr* rhs = e.kids[1].get();
        if (!lhs || rhs->kind != java::Expr::Kind::Name || !is_param(rhs->name)) continue;
        if (lhs->kind == java::Expr::Kind::Name && is_param(lhs->name)) continue;
        ArtifactRef f = own_field(t, lhs->name);
        if (f != kNoArtifact) {
          m.is_accessor = true;
          m.accessed_field = f;
        }
      }
    }
  }

  std::set<std::string> seen_keys_;
};

bool in_test_dir(const std::string& path) {
  for (const auto& seg : split(path, '/'))
    if (seg == "test" || seg == "tests") return true;
  return false;
}

}  // namespace

SourceCorpus ingest_sources(const std::map<std::string, std::string>& sources, std::string snapshot,
                            const IngestOptions& options) {
  SourceCorpus corpus;
  corpus.project = options.project;
  corpus.snapshot_commit = std::move(snapshot);

  std::vector<std::pair<std::string, const std::string*>> files;
  for (const auto& [path, text] : sources) {
    if (options.exclude_test_dirs && in_test_dir(path)) continue;
    files.emplace_back(path, &text);
  }
  struct Parsed {
    std::unique_ptr<java::CompilationUnit> unit;
    std::vector<std::string> recovered;
    std::string error;
  };
  std::vector<Parsed> parsed(files.size());
  parallel_for(files.size(), options.workers, [&](std::size_t i) {
    try {
      parsed[i].unit = std::make_unique<java::CompilationUnit>(
          java::parse_compilation_unit(files[i].first, *files[i].second, &parsed[i].recovered));
    } catch (const java::ParseError& e) {
      parsed[i].error = "parse error at line " + std::to_string(e.line()) + ": " + e.what();
    }
  });

  CorpusBuilder builder(corpus);
  for (std::size_t i = 0; i < files.size(); ++i) {
    for (const auto& r : parsed[i].recovered) corpus.diagnostics.push_back({files[i].first, "recovered " + r});
    if (!parsed[i].unit) {
      corpus.diagnostics.push_back({files[i].first, parsed[i].error});
      continue;
    }
    corpus.units.push_back(std::move(parsed[i].unit));
    builder.register_unit(*corpus.units.back(), files[i].first);
  }
  builder.resolve_all();
  std::sort(corpus.diagnostics.begin(), corpus.diagnostics.end());
  return corpus;
}

SourceCorpus ingest_corpus(const std::filesystem::path& root, std::string snapshot, const IngestOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw std::runtime_error("cannot read source root " + root.string());
  std::map<std::string, std::string> sources;
  std::vector<Diagnostic> unreadable;
  auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw std::runtime_error("cannot read source root " + root.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const auto& entry = *it;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] == '.') {
      it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file() || entry.path().extension() != ".java") continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    try {
      sources.emplace(rel, read_file(entry.path()));
    } catch (const std::exception& e) {
      unreadable.push_back({rel, e.what()});
    }
  }
  SourceCorpus corpus = ingest_sources(sources, std::move(snapshot), options);
  corpus.diagnostics.insert(corpus.diagnostics.end(), unreadable.begin(), unreadable.end());
  std::sort(corpus.diagnostics.begin(), corpus.diagnostics.end());
  return corpus;
}

std::string corpus_to_json(const SourceCorpus& corpus) {
  using nlohmann::json;
  auto type_json = [&](const ResolvedType& r) -> json {
    if (r.is_primitive()) {
      std::string s = r.primitive;
      for (int i = 0; i < r.dims; ++i) s += "[]";
      return s;
    }
    std::string base = r.is_internal() ? corpus.id(r.internal).qualified_name : r.external_name;
    for (int i = 0; i < r.dims; ++i) base += "[]";
    return json{{"name", base}, {"external", !r.is_internal()}};
  };
  auto vis = [](Visibility v) {
    switch (v) {
      case Visibility::Public: return "public";
      case Visibility::Protected: return "protected";
      case Visibility::Private: return "private";
      default: return "package";
    }
  };
  json types = json::array();
  for (const auto& t : corpus.types) {
    json jt;
    const auto& id = corpus.id(t.ref);
    jt["id"] = id.qualified_name;
    jt["kind"] = std::string(to_string(id.kind));
    jt["file"] = t.file;
    jt["loc"] = t.loc;
    jt["visibility"] = vis(t.visibility);
    jt["enclosing"] = t.enclosing == kNoArtifact ? json(nullptr) : json(corpus.id(t.enclosing).qualified_name);
    jt["top_level"] = corpus.id(t.top_level).qualified_name;
    jt["superclass"] = t.superclass ? type_json(*t.superclass) : json(nullptr);
    json ifaces = json::array();
    for (const auto& i : t.interfaces) ifaces.push_back(type_json(i));
    jt["interfaces"] = ifaces;
    json fields = json::array();
    for (const auto& f : t.fields) {
      fields.push_back({{"id", corpus.id(f.ref).qualified_name},
                        {"type", type_json(f.type)},
                        {"visibility", vis(f.visibility)},
                        {"static", f.is_static},
                        {"final", f.is_final}});
    }
    jt["fields"] = fields;
    json methods = json::array();
    for (const auto& m : t.methods) {
      const auto& mid = corpus.id(m.ref);
      methods.push_back({{"id", mid.qualified_name},
                         {"signature", mid.signature},
                         {"kind", std::string(to_string(mid.kind))},
                         {"visibility", vis(m.visibility)},
                         {"abstract", m.is_abstract},
                         {"override", m.is_override},
                         {"accessor", m.is_accessor},
                         {"static", m.is_static},
                         {"loc", m.loc},
                         {"cyclo", m.cyclo},
                         {"max_nesting", m.max_nesting}});
    }
    jt["methods"] = methods;
    json nested = json::array();
    for (auto n : t.nested_types) nested.push_back(corpus.id(n).qualified_name);
    jt["nested_types"] = nested;
    types.push_back(std::move(jt));
  }
  json diags = json::array();
  for (const auto& d : corpus.diagnostics) diags.push_back({{"file", d.file}, {"message", d.message}});
  json root{{"schema", "smellstab.corpus/1"},
            {"project", corpus.project},
            {"snapshot", corpus.snapshot_commit},
            {"types", types},
            {"diagnostics", diags}};
  return root.dump(2) + "\n";
}

}  // namespace smellstab
