#include <algorithm>
#include <cctype>
#include <unordered_set>
#include <utility>

#include "smellstab/java_syntax.hpp"

namespace smellstab::java {
namespace {

std::string_view last_segment(std::string_view name) {
  const auto dot = name.rfind('.');
  return dot == std::string_view::npos ? name : name.substr(dot + 1);
}

bool starts_upper(std::string_view s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])); }

bool is_primitive_keyword(std::string_view s) {
  return s == "int" || s == "long" || s == "short" || s == "byte" || s == "char" || s == "float" || s == "double" ||
         s == "boolean" || s == "void";
}

class Parser {
 public:
  Parser(std::string_view source, std::vector<std::string>* recovered)
      : toks_(tokenize(source)), recovered_(recovered) {}

  CompilationUnit parse_unit() {
    CompilationUnit cu;
    if (at_ident("module") || (at_ident("open") && peek(1).text == "module")) return cu;
    // Package annotations.
    while (at("@") && peek(1).text != "interface") skip_annotation(nullptr);
    if (accept("package")) {
      cu.package = qualified_name();
      expect(";");
    }
    while (at("import") || at(";")) {
      if (accept(";")) continue;
      advance();
      ImportAst imp;
      imp.is_static = accept("static");
      imp.name = ident();
      while (accept(".")) {
        if (accept("*")) {
          imp.on_demand = true;
          break;
        }
        imp.name += "." + ident();
      }
      expect(";");
      cu.imports.push_back(std::move(imp));
    }
    while (!at_end()) {
      if (accept(";")) continue;
      const std::size_t begin = cur().offset;
      Modifiers mods = modifiers();
      cu.types.push_back(type_declaration(std::move(mods), begin));
    }
    return cu;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::string>* recovered_;
  bool no_lambda_ = false;

  // --- token helpers -------------------------------------------------------
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_end() const { return cur().kind == TokenKind::End; }
  bool at(std::string_view text) const {
    return cur().text == text && cur().kind != TokenKind::StringLiteral && cur().kind != TokenKind::CharLiteral;
  }
  bool at_ident() const { return cur().kind == TokenKind::Identifier; }
  bool at_ident(std::string_view text) const { return at_ident() && cur().text == text; }
  void advance() {
    if (!at_end()) ++pos_;
  }
  bool accept(std::string_view text) {
    if (at(text)) {
      advance();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " near '" + cur().text + "'", cur().line);
  }
  void expect(std::string_view text) {
    if (!accept(text)) fail("expected '" + std::string(text) + "'");
  }
  std::string ident() {
    if (!at_ident()) fail("expected identifier");
    std::string s = cur().text;
    advance();
    return s;
  }
  std::string qualified_name() {
    std::string s = ident();
    while (at(".") && peek(1).kind == TokenKind::Identifier) {
      advance();
      s += "." + ident();
    }
    return s;
  }
  // Adjacent tokens (no whitespace between), used to reassemble '>>', '>=' etc.
  bool adjacent(std::size_t k) const { return peek(k).offset == peek(k - 1).end; }

  void skip_balanced(std::string_view open, std::string_view close) {
    int depth = 0;
    do {
      if (at_end()) fail("unbalanced '" + std::string(open) + "'");
      if (at(open)) ++depth;
      else if (at(close)) --depth;
      advance();
    } while (depth > 0);
  }

  // --- declarations --------------------------------------------------------
  void skip_annotation(Modifiers* mods) {
    expect("@");
    std::string name = qualified_name();
    if (mods) {
      auto dot = name.rfind('.');
      mods->annotations.push_back(dot == std::string::npos ? name : name.substr(dot + 1));
    }
    if (at("(")) skip_balanced("(", ")");
  }

  Modifiers modifiers() {
    Modifiers m;
    for (;;) {
      if (at("@") && peek(1).text != "interface") {
        skip_annotation(&m);
        continue;
      }
      const std::string& t = cur().text;
      std::uint32_t flag = 0;
      if (t == "public") flag = kPublic;
      else if (t == "protected") flag = kProtected;
      else if (t == "private") flag = kPrivate;
      else if (t == "static") flag = kStatic;
      else if (t == "final") flag = kFinal;
      else if (t == "abstract") flag = kAbstract;
      else if (t == "default" && peek(1).text != ":" && peek(1).text != "->") flag = kDefault;
      else if (t == "synchronized" && peek(1).text != "(") flag = kSynchronized;
      else if (t == "native") flag = kNative;
      else if (t == "transient") flag = kTransient;
      else if (t == "volatile") flag = kVolatile;
      else if (t == "strictfp") flag = kStrictfp;
      else if (at_ident("sealed") && peek(1).kind == TokenKind::Identifier) flag = kSealed;
      else if (at_ident("non") && peek(1).text == "-" && peek(2).text == "sealed") {
        pos_ += 3;
        m.flags |= kNonSealed;
        continue;
      }
      if (flag == 0) break;
      m.flags |= flag;
      advance();
    }
    return m;
  }

  bool at_type_decl_start() const {
    if (at("class") || at("interface") || at("enum")) return true;
    if (at("@") && peek(1).text == "interface") return true;
    if (at_ident("record") && peek(1).kind == TokenKind::Identifier && (peek(2).text == "(" || peek(2).text == "<"))
      return true;
    return false;
  }

  std::vector<std::string> type_parameters() {
    std::vector<std::string> names;
    expect("<");
    for (;;) {
      while (at("@")) skip_annotation(nullptr);
      names.push_back(ident());
      if (accept("extends")) {
        type();
        while (accept("&")) type();
      }
      if (accept(",")) continue;
      expect(">");
      break;
    }
    return names;
  }

  std::vector<TypeRef> type_list() {
    std::vector<TypeRef> out;
    do {
      out.push_back(type());
    } while (accept(","));
    return out;
  }

  std::unique_ptr<TypeDeclAst> type_declaration(Modifiers mods, std::size_t begin) {
    auto decl = std::make_unique<TypeDeclAst>();
    decl->mods = std::move(mods);
    decl->begin = begin;
    decl->line = cur().line;
    if (accept("class")) {
      decl->flavor = TypeFlavor::Class;
    } else if (accept("interface")) {
      decl->flavor = TypeFlavor::Interface;
    } else if (accept("enum")) {
      decl->flavor = TypeFlavor::Enum;
    } else if (at("@")) {
      advance();
      expect("interface");
      decl->flavor = TypeFlavor::Annotation;
    } else if (at_ident("record")) {
      advance();
      decl->flavor = TypeFlavor::Record;
    } else {
      fail("expected type declaration");
    }
    decl->name = ident();
    if (at("<")) decl->type_params = type_parameters();
    if (decl->flavor == TypeFlavor::Record) {
      expect("(");
      while (!at(")")) {
        Param p;
        p.mods = modifiers();
        p.type = type();
        if (accept("...")) {
          p.varargs = true;
          p.type.dims += 1;
        }
        p.name = ident();
        decl->record_components.push_back(std::move(p));
        if (!accept(",")) break;
      }
      expect(")");
    }
    if (accept("extends")) decl->extends = type_list();
    if (accept("implements")) decl->implements = type_list();
    if (at_ident("permits")) {
      advance();
      type_list();
    }
    expect("{");
    if (decl->flavor == TypeFlavor::Enum) enum_constants(*decl);
    type_body_members(decl->body, decl->name, decl->flavor == TypeFlavor::Interface || decl->flavor == TypeFlavor::Annotation);
    decl->end = cur().end;
    expect("}");
    return decl;
  }

  void enum_constants(TypeDeclAst& decl) {
    while (!at(";") && !at("}")) {
      while (at("@")) skip_annotation(nullptr);
      EnumConstantAst c;
      c.line = cur().line;
      c.name = ident();
      if (at("(")) c.args = arguments();
      if (accept("{")) {
        c.body = std::make_unique<TypeBody>();
        type_body_members(*c.body, "", false);
        expect("}");
      }
      decl.enum_constants.push_back(std::move(c));
      if (!accept(",")) break;
    }
    accept(";");
  }

  // Parses members until the closing '}' (not consumed).
  void type_body_members(TypeBody& body, const std::string& type_name, bool is_interface) {
    while (!at("}")) {
      if (at_end()) fail("unterminated type body");
      if (accept(";")) continue;
      if (at("{") || (at("static") && peek(1).text == "{")) {
        InitializerAst init;
        init.is_static = accept("static");
        init.body = block();
        body.initializers.push_back(std::move(init));
        continue;
      }
      const std::size_t begin = cur().offset;
      Modifiers mods = modifiers();
      if (at_type_decl_start()) {
        body.types.push_back(type_declaration(std::move(mods), begin));
        continue;
      }
      std::vector<std::string> tparams;
      if (at("<")) tparams = type_parameters();
      // Constructor (incl. compact record constructor).
      if (at_ident() && cur().text == type_name && (peek(1).text == "(" || peek(1).text == "{")) {
        MethodAst m;
        m.mods = std::move(mods);
        m.type_params = std::move(tparams);
        m.line = cur().line;
        m.name = ident();
        m.is_constructor = true;
        if (at("(")) m.params = parameters();
        if (accept("throws")) m.throws = type_list();
        method_body(m);
        body.methods.push_back(std::move(m));
        continue;
      }
      const int line = cur().line;
      TypeRef t = type();
      if (at_ident() && peek(1).text == "(") {
        MethodAst m;
        m.mods = std::move(mods);
        m.type_params = std::move(tparams);
        m.return_type = std::move(t);
        m.line = line;
        m.name = ident();
        m.params = parameters();
        while (at("[")) {
          advance();
          expect("]");
          m.return_type.dims++;
        }
        if (accept("throws")) m.throws = type_list();
        if (accept("default")) {
          // Annotation element default value.
          element_value();
          expect(";");
        } else {
          method_body(m);
        }
        if (is_interface && !m.body && !m.mods.has(kStatic) && !m.mods.has(kDefault)) m.mods.flags |= kAbstract;
        if (is_interface && !m.mods.has(kPrivate)) m.mods.flags |= kPublic;
        body.methods.push_back(std::move(m));
        continue;
      }
      // Field declarators.
      for (;;) {
        FieldAst f;
        f.mods = mods;
        f.type = t;
        f.line = cur().line;
        f.name = ident();
        while (at("[")) {
          advance();
          expect("]");
          f.type.dims++;
        }
        if (accept("=")) f.init = variable_initializer();
        if (is_interface) f.mods.flags |= kPublic | kStatic | kFinal;
        body.fields.push_back(std::move(f));
        if (!accept(",")) break;
      }
      expect(";");
    }
  }

  void element_value() {
    if (at("@")) {
      skip_annotation(nullptr);
    } else if (at("{")) {
      skip_balanced("{", "}");
    } else {
      expression();
    }
  }

  void method_body(MethodAst& m) {
    if (accept(";")) return;
    if (!at("{")) fail("expected method body");
    m.body_begin = cur().end;
    m.body = block();
    m.body_end = toks_[pos_ - 1].offset;
  }

  std::vector<Param> parameters() {
    std::vector<Param> out;
    expect("(");
    while (!at(")")) {
      Param p;
      p.mods = modifiers();
      p.type = type();
      if (accept("...")) {
        p.varargs = true;
        p.type.dims += 1;
      }
      if (at("this")) {
        // Receiver parameter: not a real parameter.
        advance();
        if (!accept(",")) break;
        continue;
      }
      if (at_ident() && peek(1).text == "." && peek(2).text == "this") {
        pos_ += 3;
        if (!accept(",")) break;
        continue;
      }
      p.name = ident();
      while (at("[")) {
        advance();
        expect("]");
        p.type.dims++;
      }
      out.push_back(std::move(p));
      if (!accept(",")) break;
    }
    expect(")");
    return out;
  }

  // --- types ---------------------------------------------------------------
  TypeRef type() {
    TypeRef t;
    while (at("@")) skip_annotation(nullptr);
    t.line = cur().line;
    if (cur().kind == TokenKind::Keyword && is_primitive_keyword(cur().text)) {
      t.name = cur().text;
      advance();
    } else if (at("?")) {
      // Wildcard inside type arguments.
      advance();
      if (accept("extends") || accept("super")) return type();
      t.name = "java.lang.Object";
      return t;
    } else {
      t.name = ident();
      if (at("<")) t.args = type_arguments();
      while (at(".") && (peek(1).kind == TokenKind::Identifier || peek(1).text == "@")) {
        advance();
        while (at("@")) skip_annotation(nullptr);
        t.name += "." + ident();
        if (at("<")) {
          auto more = type_arguments();
          t.args.insert(t.args.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
        }
      }
    }
    for (;;) {
      std::size_t save = pos_;
      while (at("@")) skip_annotation(nullptr);
      if (at("[") && peek(1).text == "]") {
        pos_ += 2;
        t.dims++;
      } else {
        pos_ = save;
        break;
      }
    }
    return t;
  }

  std::vector<TypeRef> type_arguments() {
    std::vector<TypeRef> out;
    expect("<");
    if (accept(">")) return out;  // diamond
    for (;;) {
      out.push_back(type());
      if (accept(",")) continue;
      expect(">");
      break;
    }
    return out;
  }

  template <typename F>
  bool speculate(F&& f) {
    const std::size_t save = pos_;
    try {
      if (f()) return true;
    } catch (const ParseError&) {
    }
    pos_ = save;
    return false;
  }

  // --- statements ----------------------------------------------------------
  StmtPtr block() {
    auto s = std::make_unique<Stmt>();
    s->kind = Stmt::Kind::Block;
    s->line = cur().line;
    expect("{");
    while (!at("}")) {
      if (at_end()) fail("unterminated block");
      s->stmts.push_back(block_statement());
    }
    expect("}");
    return s;
  }

  StmtPtr block_statement() {
    const std::size_t start = pos_;
    try {
      return statement();
    } catch (const ParseError& e) {
      if (recovered_) recovered_->push_back("line " + std::to_string(e.line()) + ": " + e.what());
      pos_ = start;
      int depth = 0;
      while (!at_end()) {
        if (depth == 0 && at("}")) {
          if (pos_ == start) advance();
          break;
        }
        if (at("(") || at("{") || at("[")) {
          ++depth;
        } else if (at(")") || at("}") || at("]")) {
          const bool brace = at("}");
          depth = std::max(0, depth - 1);
          if (brace && depth == 0) {
            advance();
            break;
          }
        }
        const bool semi = at(";");
        advance();
        if (semi && depth == 0) break;
      }
      auto s = std::make_unique<Stmt>();
      s->kind = Stmt::Kind::Empty;
      return s;
    }
  }

  bool local_var_follows() const {
    const std::string& t = cur().text;
    return t == "=" || t == ";" || t == "," || t == ":" || t == "[";
  }

  // Tries "mods Type name"; leaves pos at the name on success.
  bool try_local_var_head(Modifiers& mods, TypeRef& t) {
    return speculate([&] {
      mods = modifiers();
      if (!(at_ident() || (cur().kind == TokenKind::Keyword && is_primitive_keyword(cur().text)))) return false;
      t = type();
      if (!at_ident()) return false;
      return peek(1).text == "=" || peek(1).text == ";" || peek(1).text == "," || peek(1).text == ":" ||
             peek(1).text == "[" || peek(1).text == ")";
    });
  }

  std::vector<VarDeclarator> declarators() {
    std::vector<VarDeclarator> out;
    for (;;) {
      VarDeclarator d;
      d.name = ident();
      while (at("[")) {
        advance();
        expect("]");
        d.extra_dims++;
      }
      if (accept("=")) d.init = variable_initializer();
      out.push_back(std::move(d));
      if (!accept(",")) break;
    }
    return out;
  }

  ExprPtr variable_initializer() {
    if (at("{")) return array_initializer();
    return expression();
  }

  ExprPtr array_initializer() {
    auto e = make_expr(Expr::Kind::ArrayInit);
    expect("{");
    while (!at("}")) {
      e->kids.push_back(variable_initializer());
      if (!accept(",")) break;
    }
    expect("}");
    return e;
  }

  StmtPtr make_stmt(Stmt::Kind k) {
    auto s = std::make_unique<Stmt>();
    s->kind = k;
    s->line = cur().line;
    return s;
  }

  StmtPtr statement() {
    if (at("{")) return block();
    if (at(";")) {
      auto s = make_stmt(Stmt::Kind::Empty);
      advance();
      return s;
    }
    if (at("if")) {
      auto s = make_stmt(Stmt::Kind::If);
      advance();
      expect("(");
      s->exprs.push_back(expression());
      expect(")");
      s->stmts.push_back(statement());
      if (accept("else")) s->stmts.push_back(statement());
      return s;
    }
    if (at("while")) {
      auto s = make_stmt(Stmt::Kind::While);
      advance();
      expect("(");
      s->exprs.push_back(expression());
      expect(")");
      s->stmts.push_back(statement());
      return s;
    }
    if (at("do")) {
      auto s = make_stmt(Stmt::Kind::Do);
      advance();
      s->stmts.push_back(statement());
      expect("while");
      expect("(");
      s->exprs.push_back(expression());
      expect(")");
      expect(";");
      return s;
    }
    if (at("for")) return for_statement();
    if (at("switch")) {
      auto s = switch_block();
      accept(";");
      return s;
    }
    if (at("try")) return try_statement();
    if (at("return") || at("throw")) {
      auto s = make_stmt(at("return") ? Stmt::Kind::Return : Stmt::Kind::Throw);
      advance();
      if (!at(";")) s->exprs.push_back(expression());
      expect(";");
      return s;
    }
    if (at("break") || at("continue")) {
      auto s = make_stmt(at("break") ? Stmt::Kind::Break : Stmt::Kind::Continue);
      advance();
      if (at_ident()) advance();
      expect(";");
      return s;
    }
    if (at("synchronized")) {
      auto s = make_stmt(Stmt::Kind::Synchronized);
      advance();
      expect("(");
      s->exprs.push_back(expression());
      expect(")");
      s->stmts.push_back(block());
      return s;
    }
    if (at("assert")) {
      auto s = make_stmt(Stmt::Kind::Assert);
      advance();
      s->exprs.push_back(expression());
      if (accept(":")) s->exprs.push_back(expression());
      expect(";");
      return s;
    }
    if (at_ident("yield") && peek(1).text != "=" && peek(1).text != "." && peek(1).text != "(" &&
        peek(1).text != "[" && peek(1).text != "++" && peek(1).text != "--" && peek(1).text != ";") {
      auto s = make_stmt(Stmt::Kind::Yield);
      advance();
      s->exprs.push_back(expression());
      expect(";");
      return s;
    }
    if (at_ident() && peek(1).text == ":") {
      auto s = make_stmt(Stmt::Kind::Labeled);
      pos_ += 2;
      s->stmts.push_back(statement());
      return s;
    }
    {
      const std::size_t save = pos_;
      const std::size_t begin = cur().offset;
      Modifiers mods = modifiers();
      if (at_type_decl_start()) {
        auto s = make_stmt(Stmt::Kind::LocalClass);
        s->local_type = type_declaration(std::move(mods), begin);
        return s;
      }
      pos_ = save;
    }
    Modifiers mods;
    TypeRef t;
    if (try_local_var_head(mods, t)) {
      auto s = make_stmt(Stmt::Kind::LocalVar);
      s->var_type = std::move(t);
      s->vars = declarators();
      expect(";");
      return s;
    }
    auto s = make_stmt(Stmt::Kind::ExprStmt);
    s->exprs.push_back(expression());
    expect(";");
    return s;
  }

  StmtPtr for_statement() {
    const int line = cur().line;
    expect("for");
    expect("(");
    Modifiers mods;
    TypeRef t;
    const std::size_t save = pos_;
    if (try_local_var_head(mods, t) && peek(1).text == ":") {
      auto s = make_stmt(Stmt::Kind::ForEach);
      s->line = line;
      s->var_type = std::move(t);
      VarDeclarator d;
      d.name = ident();
      s->vars.push_back(std::move(d));
      expect(":");
      s->exprs.push_back(expression());
      expect(")");
      s->stmts.push_back(statement());
      return s;
    }
    pos_ = save;
    auto s = make_stmt(Stmt::Kind::For);
    s->line = line;
    if (!at(";")) {
      if (try_local_var_head(mods, t)) {
        auto decl = make_stmt(Stmt::Kind::LocalVar);
        decl->var_type = std::move(t);
        decl->vars = declarators();
        s->resources.push_back(std::move(decl));
      } else {
        do {
          auto es = make_stmt(Stmt::Kind::ExprStmt);
          es->exprs.push_back(expression());
          s->resources.push_back(std::move(es));
        } while (accept(","));
      }
    }
    expect(";");
    s->exprs.push_back(at(";") ? nullptr : expression());
    expect(";");
    while (!at(")")) {
      s->exprs.push_back(expression());
      if (!accept(",")) break;
    }
    expect(")");
    s->stmts.push_back(statement());
    return s;
  }

  StmtPtr try_statement() {
    auto s = make_stmt(Stmt::Kind::Try);
    expect("try");
    if (accept("(")) {
      while (!at(")")) {
        Modifiers mods;
        TypeRef t;
        if (try_local_var_head(mods, t)) {
          auto decl = make_stmt(Stmt::Kind::LocalVar);
          decl->var_type = std::move(t);
          VarDeclarator d;
          d.name = ident();
          expect("=");
          d.init = expression();
          decl->vars.push_back(std::move(d));
          s->resources.push_back(std::move(decl));
        } else {
          auto es = make_stmt(Stmt::Kind::ExprStmt);
          es->exprs.push_back(expression());
          s->resources.push_back(std::move(es));
        }
        if (!accept(";")) break;
      }
      expect(")");
    }
    s->stmts.push_back(block());
    while (accept("catch")) {
      CatchClause c;
      expect("(");
      modifiers();
      c.types.push_back(type());
      while (accept("|")) c.types.push_back(type());
      c.name = ident();
      expect(")");
      c.body = block();
      s->catches.push_back(std::move(c));
    }
    if (accept("finally")) s->finally_block = block();
    return s;
  }

  StmtPtr switch_block() {
    auto s = make_stmt(Stmt::Kind::Switch);
    expect("switch");
    expect("(");
    s->exprs.push_back(expression());
    expect(")");
    expect("{");
    while (!at("}")) {
      SwitchCase c;
      if (accept("default")) {
        c.is_default = true;
      } else {
        expect("case");
        const bool saved = no_lambda_;
        no_lambda_ = true;
        do {
          if (accept("default")) {
            c.is_default = true;
            continue;
          }
          c.labels.push_back(case_label());
        } while (accept(","));
        if (at_ident("when")) {
          advance();
          c.labels.push_back(expression());
        }
        no_lambda_ = saved;
      }
      if (accept("->")) {
        if (at("{")) {
          c.body.push_back(block());
        } else if (at("throw")) {
          c.body.push_back(statement());
        } else {
          auto es = make_stmt(Stmt::Kind::ExprStmt);
          es->exprs.push_back(expression());
          expect(";");
          c.body.push_back(std::move(es));
        }
      } else {
        expect(":");
        while (!at("case") && !at("default") && !at("}")) {
          if (at_end()) fail("unterminated switch");
          c.body.push_back(block_statement());
        }
        // "default" may also be a modifier-less label inside; handled by loop.
      }
      s->cases.push_back(std::move(c));
    }
    expect("}");
    return s;
  }

  ExprPtr case_label() {
    // Type pattern: "case Type name" / record pattern "case Type(...)".
    ExprPtr pattern;
    if (speculate([&] {
          modifiers();
          TypeRef t = type();
          if (at_ident() && (peek(1).text == "->" || peek(1).text == ":" || peek(1).text == "," ||
                             (peek(1).kind == TokenKind::Identifier && peek(1).text == "when"))) {
            pattern = make_expr(Expr::Kind::InstanceOf);
            pattern->type = std::move(t);
            pattern->name = ident();
            return true;
          }
          if (at("(") && starts_upper(last_segment(t.name))) {
            skip_balanced("(", ")");
            pattern = make_expr(Expr::Kind::InstanceOf);
            pattern->type = std::move(t);
            if (at_ident() && cur().text != "when") advance();
            return at("->") || at(":") || at(",") || at_ident("when");
          }
          return false;
        })) {
      return pattern;
    }
    return ternary();
  }

  // --- expressions ---------------------------------------------------------
  ExprPtr make_expr(Expr::Kind k) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->line = cur().line;
    return e;
  }

  // Index just past the ')' matching the '(' at pos, or 0 when unbalanced.
  std::size_t matching_paren(std::size_t at_pos) const {
    int depth = 0;
    for (std::size_t i = at_pos; i < toks_.size(); ++i) {
      const auto& t = toks_[i];
      if (t.kind == TokenKind::Operator) {
        if (t.text == "(") ++depth;
        else if (t.text == ")" && --depth == 0) return i + 1;
      }
      if (t.kind == TokenKind::End) break;
    }
    return 0;
  }

  bool lambda_ahead() const {
    if (no_lambda_) return false;
    if (at_ident() && peek(1).text == "->") return true;
    if (at("(")) {
      std::size_t close = matching_paren(pos_);
      return close != 0 && toks_[close].text == "->";
    }
    return false;
  }

  ExprPtr lambda() {
    auto e = make_expr(Expr::Kind::Lambda);
    if (at_ident()) {
      e->params.emplace_back(TypeRef{}, ident());
    } else {
      expect("(");
      while (!at(")")) {
        modifiers();
        if (at_ident() && (peek(1).text == "," || peek(1).text == ")")) {
          e->params.emplace_back(TypeRef{}, ident());
        } else {
          TypeRef t = type();
          if (accept("...")) t.dims++;
          std::string n = ident();
          e->params.emplace_back(std::move(t), std::move(n));
        }
        if (!accept(",")) break;
      }
      expect(")");
    }
    expect("->");
    const bool saved = no_lambda_;
    no_lambda_ = false;
    if (at("{")) {
      e->stmt = block();
    } else {
      auto es = make_stmt(Stmt::Kind::Return);
      es->exprs.push_back(expression());
      e->stmt = std::move(es);
    }
    no_lambda_ = saved;
    return e;
  }

  // Reads an operator at the cursor, reassembling '>'-sequences.
  // Returns {text, token count}; text empty when no operator.
  std::pair<std::string, std::size_t> read_op() const {
    const Token& t = cur();
    if (t.kind != TokenKind::Operator) {
      if (t.kind == TokenKind::Keyword && t.text == "instanceof") return {"instanceof", 1};
      return {"", 0};
    }
    if (t.text == ">") {
      if (peek(1).text == ">" && adjacent(1)) {
        if (peek(2).text == ">" && adjacent(2)) {
          if (peek(3).text == "=" && adjacent(3)) return {">>>=", 4};
          return {">>>", 3};
        }
        if (peek(2).text == "=" && adjacent(2)) return {">>=", 3};
        return {">>", 2};
      }
      if (peek(1).text == "=" && adjacent(1)) return {">=", 2};
      return {">", 1};
    }
    return {t.text, 1};
  }

  static int precedence(const std::string& op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "|") return 3;
    if (op == "^") return 4;
    if (op == "&") return 5;
    if (op == "==" || op == "!=") return 6;
    if (op == "<" || op == ">" || op == "<=" || op == ">=" || op == "instanceof") return 7;
    if (op == "<<" || op == ">>" || op == ">>>") return 8;
    if (op == "+" || op == "-") return 9;
    if (op == "*" || op == "/" || op == "%") return 10;
    return 0;
  }

  static bool is_assign_op(const std::string& op) {
    return op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "%=" || op == "&=" ||
           op == "|=" || op == "^=" || op == "<<=" || op == ">>=" || op == ">>>=";
  }

 public:
  ExprPtr expression() {
    if (lambda_ahead()) return lambda();
    ExprPtr lhs = ternary();
    auto [op, n] = read_op();
    if (is_assign_op(op)) {
      auto e = make_expr(Expr::Kind::Assign);
      pos_ += n;
      e->name = op;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(expression());
      return e;
    }
    return lhs;
  }

 private:
  ExprPtr ternary() {
    ExprPtr cond = binary(1);
    if (at("?")) {
      auto e = make_expr(Expr::Kind::Conditional);
      advance();
      e->kids.push_back(std::move(cond));
      const bool saved = no_lambda_;
      no_lambda_ = false;
      e->kids.push_back(expression());
      no_lambda_ = saved;
      expect(":");
      if (lambda_ahead()) e->kids.push_back(lambda());
      else e->kids.push_back(ternary());
      return e;
    }
    return cond;
  }

  ExprPtr binary(int min_prec) {
    ExprPtr lhs = unary();
    for (;;) {
      auto [op, n] = read_op();
      const int prec = precedence(op);
      if (prec == 0 || prec < min_prec) break;
      if (op == "instanceof") {
        auto e = make_expr(Expr::Kind::InstanceOf);
        advance();
        accept("final");
        e->type = type();
        if (at("(")) {
          skip_balanced("(", ")");
        }
        if (at_ident() && read_op().first.empty() && cur().text != "when") e->name = ident();
        e->kids.push_back(std::move(lhs));
        lhs = std::move(e);
        continue;
      }
      auto e = make_expr(Expr::Kind::Binary);
      pos_ += n;
      e->name = op;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(binary(prec + 1));
      lhs = std::move(e);
    }
    return lhs;
  }

  bool cast_follows() const {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Identifier:
      case TokenKind::IntLiteral:
      case TokenKind::FloatLiteral:
      case TokenKind::CharLiteral:
      case TokenKind::StringLiteral:
        return true;
      case TokenKind::Keyword:
        return t.text == "this" || t.text == "super" || t.text == "new" || t.text == "true" || t.text == "false" ||
               t.text == "null" || t.text == "switch" || is_primitive_keyword(t.text);
      case TokenKind::Operator:
        return t.text == "(" || t.text == "!" || t.text == "~";
      default:
        return false;
    }
  }

  ExprPtr unary() {
    const std::string& t = cur().text;
    if (cur().kind == TokenKind::Operator && (t == "+" || t == "-" || t == "!" || t == "~" || t == "++" || t == "--")) {
      auto e = make_expr(Expr::Kind::Unary);
      e->name = t;
      advance();
      e->kids.push_back(unary());
      return e;
    }
    if (at("(") && !lambda_ahead()) {
      ExprPtr cast;
      speculate([&] {
        const int line = cur().line;
        advance();
        TypeRef ty = type();
        while (accept("&")) type();
        if (!accept(")")) return false;
        const bool primitive = is_primitive_keyword(ty.name);
        if (primitive && ty.dims == 0) {
          // (int) -x is a cast; (x) - y is not, but a primitive name cannot be a variable.
        } else if (!cast_follows()) {
          return false;
        }
        cast = std::make_unique<Expr>();
        cast->kind = Expr::Kind::Cast;
        cast->line = line;
        cast->type = std::move(ty);
        if (lambda_ahead()) cast->kids.push_back(lambda());
        else cast->kids.push_back(unary());
        return true;
      });
      if (cast) return cast;
    }
    ExprPtr e = postfix(primary());
    return e;
  }

  static std::string chain_name(const Expr& e) {
    if (e.kind == Expr::Kind::Name) return e.name;
    if (e.kind == Expr::Kind::Field && e.has_target) {
      std::string base = chain_name(*e.kids[0]);
      return base.empty() ? "" : base + "." + e.name;
    }
    return "";
  }

  std::vector<ExprPtr> arguments() {
    std::vector<ExprPtr> args;
    expect("(");
    const bool saved = no_lambda_;
    no_lambda_ = false;
    while (!at(")")) {
      args.push_back(expression());
      if (!accept(",")) break;
    }
    no_lambda_ = saved;
    expect(")");
    return args;
  }

  ExprPtr creator() {
    auto line = cur().line;
    expect("new");
    std::vector<TypeRef> targs;
    if (at("<")) targs = type_arguments();
    TypeRef t;
    while (at("@")) skip_annotation(nullptr);
    t.line = cur().line;
    if (cur().kind == TokenKind::Keyword && is_primitive_keyword(cur().text)) {
      t.name = cur().text;
      advance();
    } else {
      t.name = ident();
      if (at("<")) t.args = type_arguments();
      while (at(".")) {
        advance();
        while (at("@")) skip_annotation(nullptr);
        t.name += "." + ident();
        if (at("<")) t.args = type_arguments();
      }
    }
    if (at("[")) {
      auto e = make_expr(Expr::Kind::NewArray);
      e->line = line;
      while (at("[")) {
        advance();
        if (accept("]")) {
          t.dims++;
          continue;
        }
        e->kids.push_back(expression());
        expect("]");
        t.dims++;
      }
      if (at("{")) e->kids.push_back(array_initializer());
      e->type = std::move(t);
      return e;
    }
    auto e = make_expr(Expr::Kind::New);
    e->line = line;
    e->type = std::move(t);
    e->kids = arguments();
    if (at("{")) {
      advance();
      e->anon = std::make_unique<TypeBody>();
      type_body_members(*e->anon, "", false);
      expect("}");
    }
    return e;
  }

  ExprPtr primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::IntLiteral: {
        auto e = make_expr(Expr::Kind::Literal);
        e->name = (t.text.back() == 'l' || t.text.back() == 'L') ? "long" : "int";
        advance();
        return e;
      }
      case TokenKind::FloatLiteral: {
        auto e = make_expr(Expr::Kind::Literal);
        e->name = (t.text.back() == 'f' || t.text.back() == 'F') ? "float" : "double";
        advance();
        return e;
      }
      case TokenKind::CharLiteral: {
        auto e = make_expr(Expr::Kind::Literal);
        e->name = "char";
        advance();
        return e;
      }
      case TokenKind::StringLiteral: {
        auto e = make_expr(Expr::Kind::Literal);
        e->name = "String";
        advance();
        return e;
      }
      default:
        break;
    }
    if (at("true") || at("false")) {
      auto e = make_expr(Expr::Kind::Literal);
      e->name = "boolean";
      advance();
      return e;
    }
    if (at("null")) {
      auto e = make_expr(Expr::Kind::Literal);
      e->name = "null";
      advance();
      return e;
    }
    if (at("(")) {
      if (lambda_ahead()) return lambda();
      advance();
      const bool saved = no_lambda_;
      no_lambda_ = false;
      ExprPtr inner = expression();
      no_lambda_ = saved;
      expect(")");
      return inner;
    }
    if (at("this")) {
      auto e = make_expr(Expr::Kind::This);
      advance();
      if (at("(")) {
        auto c = make_expr(Expr::Kind::Call);
        c->name = "this";
        c->kids.push_back(nullptr);
        auto args = arguments();
        for (auto& a : args) c->kids.push_back(std::move(a));
        return c;
      }
      return e;
    }
    if (at("super")) {
      auto e = make_expr(Expr::Kind::Super);
      advance();
      if (at("(")) {
        auto c = make_expr(Expr::Kind::Call);
        c->name = "super";
        c->kids.push_back(nullptr);
        auto args = arguments();
        for (auto& a : args) c->kids.push_back(std::move(a));
        return c;
      }
      return e;
    }
    if (at("new")) return creator();
    if (at("switch")) {
      auto e = make_expr(Expr::Kind::Switch);
      const bool saved = no_lambda_;
      no_lambda_ = false;
      e->stmt = switch_block();
      no_lambda_ = saved;
      return e;
    }
    if (at("{")) return array_initializer();
    if (cur().kind == TokenKind::Keyword && is_primitive_keyword(cur().text)) {
      TypeRef ty = type();
      if (accept("::")) {
        auto e = make_expr(Expr::Kind::MethodRef);
        e->type = std::move(ty);
        e->name = at("new") ? "new" : cur().text;
        advance();
        return e;
      }
      expect(".");
      expect("class");
      auto e = make_expr(Expr::Kind::ClassLit);
      e->type = std::move(ty);
      return e;
    }
    if (at("@")) {
      skip_annotation(nullptr);
      return primary();
    }
    if (at_ident()) {
      // Generic type method reference: Type<Args>::name
      if (peek(1).text == "<") {
        ExprPtr ref;
        if (speculate([&] {
              TypeRef ty = type();
              if (!accept("::")) return false;
              ref = make_expr(Expr::Kind::MethodRef);
              ref->type = std::move(ty);
              ref->name = at("new") ? "new" : ident();
              if (ref->name == "new") advance();
              return true;
            }))
          return ref;
      }
      if (peek(1).text == "(") {
        auto e = make_expr(Expr::Kind::Call);
        e->name = ident();
        e->kids.push_back(nullptr);
        auto args = arguments();
        for (auto& a : args) e->kids.push_back(std::move(a));
        return e;
      }
      auto e = make_expr(Expr::Kind::Name);
      e->name = ident();
      return e;
    }
    fail("expected expression");
  }

  ExprPtr postfix(ExprPtr e) {
    for (;;) {
      if (at(".")) {
        advance();
        if (at("new")) {
          // Qualified inner instance creation: outer.new Inner(...)
          ExprPtr c = creator();
          c->kids.insert(c->kids.begin(), std::move(e));
          c->has_target = true;
          e = std::move(c);
          continue;
        }
        std::vector<TypeRef> targs;
        if (at("<")) targs = type_arguments();
        if (at("this") || at("super")) {
          auto q = make_expr(at("this") ? Expr::Kind::This : Expr::Kind::Super);
          q->type.name = chain_name(*e);
          advance();
          e = std::move(q);
          continue;
        }
        if (at("class")) {
          auto q = make_expr(Expr::Kind::ClassLit);
          q->type.name = chain_name(*e);
          advance();
          e = std::move(q);
          continue;
        }
        const int line = cur().line;
        std::string name = ident();
        if (at("(")) {
          auto c = make_expr(Expr::Kind::Call);
          c->line = line;
          c->name = std::move(name);
          c->has_target = true;
          c->type_args = std::move(targs);
          c->kids.push_back(std::move(e));
          auto args = arguments();
          for (auto& a : args) c->kids.push_back(std::move(a));
          e = std::move(c);
        } else {
          auto f = make_expr(Expr::Kind::Field);
          f->line = line;
          f->name = std::move(name);
          f->has_target = true;
          f->kids.push_back(std::move(e));
          e = std::move(f);
        }
        continue;
      }
      if (at("[")) {
        if (peek(1).text == "]") {
          // Array type in class literal or method reference: Foo[].class / Foo[]::new
          TypeRef ty;
          ty.name = chain_name(*e);
          while (at("[") && peek(1).text == "]") {
            pos_ += 2;
            ty.dims++;
          }
          if (accept("::")) {
            auto r = make_expr(Expr::Kind::MethodRef);
            r->type = std::move(ty);
            r->name = at("new") ? "new" : cur().text;
            advance();
            e = std::move(r);
            continue;
          }
          expect(".");
          expect("class");
          auto q = make_expr(Expr::Kind::ClassLit);
          q->type = std::move(ty);
          e = std::move(q);
          continue;
        }
        auto a = make_expr(Expr::Kind::ArrayAccess);
        advance();
        a->kids.push_back(std::move(e));
        const bool saved = no_lambda_;
        no_lambda_ = false;
        a->kids.push_back(expression());
        no_lambda_ = saved;
        expect("]");
        e = std::move(a);
        continue;
      }
      if (at("::")) {
        advance();
        auto r = make_expr(Expr::Kind::MethodRef);
        if (at("<")) type_arguments();
        r->name = at("new") ? "new" : cur().text;
        advance();
        r->has_target = true;
        r->type.name = chain_name(*e);
        r->kids.push_back(std::move(e));
        e = std::move(r);
        continue;
      }
      if (at("++") || at("--")) {
        auto u = make_expr(Expr::Kind::Unary);
        u->name = "post" + cur().text;
        advance();
        u->kids.push_back(std::move(e));
        e = std::move(u);
        continue;
      }
      return e;
    }
  }
};

}  // namespace

CompilationUnit parse_compilation_unit(std::string path, std::string source, std::vector<std::string>* recovered) {
  Parser p(source, recovered);
  CompilationUnit cu = p.parse_unit();
  cu.path = std::move(path);
  cu.source = std::move(source);
  return cu;
}

}  // namespace smellstab::java
