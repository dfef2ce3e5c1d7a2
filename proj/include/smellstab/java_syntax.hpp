#pragma once

// Lexer and tolerant recursive-descent parser for Java source files.
//
// Declarations are parsed structurally; method, constructor and initializer
// bodies are parsed down to expressions so that the dependency extractor can
// see calls, instantiations, casts and field accesses. Generic type arguments
// are retained on type references but are erased for resolution.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smellstab::java {

enum class TokenKind { Identifier, Keyword, IntLiteral, FloatLiteral, CharLiteral, StringLiteral, Operator, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  int line = 0;
  std::size_t offset = 0;  // byte offset of the first character
  std::size_t end = 0;     // one past the last character
};

std::vector<Token> tokenize(std::string_view source);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct TypeRef {
  std::string name;  // dotted name as written, without type arguments
  std::vector<TypeRef> args;
  int dims = 0;
  int line = 0;

  bool empty() const { return name.empty(); }
  bool is_primitive() const;
  bool is_var() const { return name == "var"; }
};

enum Modifier : std::uint32_t {
  kPublic = 1u << 0,
  kProtected = 1u << 1,
  kPrivate = 1u << 2,
  kStatic = 1u << 3,
  kFinal = 1u << 4,
  kAbstract = 1u << 5,
  kDefault = 1u << 6,
  kSynchronized = 1u << 7,
  kNative = 1u << 8,
  kTransient = 1u << 9,
  kVolatile = 1u << 10,
  kStrictfp = 1u << 11,
  kSealed = 1u << 12,
  kNonSealed = 1u << 13,
};

struct Modifiers {
  std::uint32_t flags = 0;
  std::vector<std::string> annotations;  // simple names, e.g. "Override"

  bool has(Modifier m) const { return (flags & m) != 0; }
  bool annotated(std::string_view name) const;
};

struct Stmt;
struct TypeBody;

struct Expr {
  enum class Kind {
    Name,         // name
    Field,        // kids[0].name
    Call,         // [kids[0].]name(kids[1..]); has_target tells whether kids[0] is a receiver
    New,          // new type(kids...) [anon]
    NewArray,     // new type[kids...] {init}
    ArrayInit,    // {kids...}
    Cast,         // (type) kids[0]
    Literal,      // name holds the literal kind: int, long, float, double, char, String, boolean, null
    This,         // [type.]this
    Super,        // [type.]super
    ClassLit,     // type.class
    InstanceOf,   // kids[0] instanceof type [name]
    Binary,       // kids[0] name kids[1]
    Unary,        // name kids[0]
    Assign,       // kids[0] name kids[1]
    Conditional,  // kids[0] ? kids[1] : kids[2]
    ArrayAccess,  // kids[0][kids[1]]
    Lambda,       // params -> body
    MethodRef,    // kids[0]::name or type::name
    Switch,       // switch expression; body in stmt
  };

  Kind kind = Kind::Name;
  std::string name;
  TypeRef type;
  std::vector<std::unique_ptr<Expr>> kids;
  bool has_target = false;
  std::vector<TypeRef> type_args;  // explicit generic method arguments

  // Lambda parameters (type may be empty) and body.
  std::vector<std::pair<TypeRef, std::string>> params;
  std::unique_ptr<Stmt> stmt;
  std::unique_ptr<TypeBody> anon;  // anonymous class body for New
  int line = 0;
};

using ExprPtr = std::unique_ptr<Expr>;

struct VarDeclarator {
  std::string name;
  int extra_dims = 0;
  ExprPtr init;
};

struct CatchClause {
  std::vector<TypeRef> types;
  std::string name;
  std::unique_ptr<Stmt> body;
};

struct SwitchCase {
  std::vector<ExprPtr> labels;  // empty for default
  bool is_default = false;
  std::vector<std::unique_ptr<Stmt>> body;
};

struct TypeDeclAst;

struct Stmt {
  enum class Kind {
    Block,
    LocalVar,
    ExprStmt,
    If,
    For,
    ForEach,
    While,
    Do,
    Switch,
    Try,
    Return,
    Throw,
    Break,
    Continue,
    Yield,
    Synchronized,
    Labeled,
    LocalClass,
    Assert,
    Empty,
  };

  Kind kind = Kind::Empty;
  int line = 0;
  std::vector<std::unique_ptr<Stmt>> stmts;  // children (block contents, branches, init/update of for)
  std::vector<ExprPtr> exprs;                // conditions, expressions, for updates
  TypeRef var_type;                          // LocalVar / ForEach variable type
  std::vector<VarDeclarator> vars;           // LocalVar declarators / ForEach variable (no init)
  std::vector<CatchClause> catches;          // Try
  std::vector<std::unique_ptr<Stmt>> resources;  // try-with-resources
  std::unique_ptr<Stmt> finally_block;
  std::vector<SwitchCase> cases;  // Switch
  std::unique_ptr<TypeDeclAst> local_type;
};

using StmtPtr = std::unique_ptr<Stmt>;

struct Param {
  TypeRef type;
  std::string name;
  bool varargs = false;
  Modifiers mods;
};

struct FieldAst {
  Modifiers mods;
  TypeRef type;
  std::string name;
  ExprPtr init;
  int line = 0;
  bool implicit_enum_constant = false;
};

struct MethodAst {
  Modifiers mods;
  std::vector<std::string> type_params;
  TypeRef return_type;  // empty for constructors
  std::string name;
  std::vector<Param> params;
  std::vector<TypeRef> throws;
  StmtPtr body;  // null when abstract / interface without body
  bool is_constructor = false;
  std::size_t body_begin = 0;  // offset just after '{'
  std::size_t body_end = 0;    // offset of the closing '}'
  int line = 0;
};

struct InitializerAst {
  bool is_static = false;
  StmtPtr body;
};

struct EnumConstantAst {
  std::string name;
  std::vector<ExprPtr> args;
  std::unique_ptr<TypeBody> body;
  int line = 0;
};

struct TypeBody {
  std::vector<FieldAst> fields;
  std::vector<MethodAst> methods;  // methods and constructors in declaration order
  std::vector<std::unique_ptr<TypeDeclAst>> types;
  std::vector<InitializerAst> initializers;
};

enum class TypeFlavor { Class, Interface, Enum, Record, Annotation };

struct TypeDeclAst {
  TypeFlavor flavor = TypeFlavor::Class;
  Modifiers mods;
  std::string name;
  std::vector<std::string> type_params;
  std::vector<TypeRef> extends;  // superclass (class) or superinterfaces (interface)
  std::vector<TypeRef> implements;
  std::vector<Param> record_components;
  std::vector<EnumConstantAst> enum_constants;
  TypeBody body;
  std::size_t begin = 0;  // offset of the first modifier/keyword
  std::size_t end = 0;    // one past the closing '}'
  int line = 0;
};

struct ImportAst {
  std::string name;  // dotted, without trailing ".*"
  bool is_static = false;
  bool on_demand = false;
};

struct CompilationUnit {
  std::string path;
  std::string package;
  std::vector<ImportAst> imports;
  std::vector<std::unique_ptr<TypeDeclAst>> types;
  std::string source;
};

// Parses a complete compilation unit. Throws ParseError on unrecoverable
// syntax errors at declaration level; statement-level errors inside bodies
// are recovered and reported through `recovered`.
CompilationUnit parse_compilation_unit(std::string path, std::string source, std::vector<std::string>* recovered = nullptr);

}  // namespace smellstab::java
