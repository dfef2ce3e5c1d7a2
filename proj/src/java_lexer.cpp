#include "smellstab/java_syntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace smellstab::java {
namespace {

const std::unordered_set<std::string_view>& keywords() {
  static const std::unordered_set<std::string_view> k = {
      "abstract", "assert",     "boolean",   "break",     "byte",       "case",      "catch",    "char",
      "class",    "const",      "continue",  "default",   "do",         "double",    "else",     "enum",
      "extends",  "final",      "finally",   "float",     "for",        "goto",      "if",       "implements",
      "import",   "instanceof", "int",       "interface", "long",       "native",    "new",      "package",
      "private",  "protected",  "public",    "return",    "short",      "static",    "strictfp", "super",
      "switch",   "synchronized", "this",    "throw",     "throws",     "transient", "try",      "void",
      "volatile", "while",      "true",      "false",     "null"};
  return k;
}

// '>' is never merged here; the expression parser reassembles shift and
// comparison operators from adjacent tokens so that nested generics close.
constexpr std::array<std::string_view, 36> kOperators = {
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", "+=", "-=", "*=", "/=", "&=", "|=", "^=",
    "%=",  "<<",  "(",  ")",  "{",  "}",  "[",  "]",  ";",  ",",  ".",  "@",  "=",  "<",  "!",  "~",  "?",  ":"};
constexpr std::string_view kSingleOps = "+-*/&|^%>";

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool ident_part(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  const std::size_t n = src.size();

  auto push = [&](TokenKind kind, std::size_t begin, std::size_t end, int tok_line) {
    out.push_back(Token{kind, std::string(src.substr(begin, end - begin)), tok_line, begin, end});
  };

  while (i < n) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == '\f') {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      i += 2;
      while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) {
        if (src[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 2);
      continue;
    }
    const std::size_t begin = i;
    const int tok_line = line;
    if (ident_start(static_cast<unsigned char>(c))) {
      while (i < n && ident_part(static_cast<unsigned char>(src[i]))) ++i;
      const auto word = src.substr(begin, i - begin);
      push(keywords().count(word) ? TokenKind::Keyword : TokenKind::Identifier, begin, i, tok_line);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      bool is_float = false;
      if (c == '0' && i + 1 < n && (src[i + 1] == 'x' || src[i + 1] == 'X')) {
        i += 2;
        while (i < n && (std::isxdigit(static_cast<unsigned char>(src[i])) || src[i] == '_' || src[i] == '.')) {
          if (src[i] == '.') is_float = true;
          ++i;
        }
        if (i < n && (src[i] == 'p' || src[i] == 'P')) {
          is_float = true;
          ++i;
          if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      } else {
        while (i < n && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '_' || src[i] == 'b' || src[i] == 'B')) ++i;
        if (i < n && src[i] == '.' && !(i + 1 < n && src[i + 1] == '.')) {
          is_float = true;
          ++i;
          while (i < n && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
        }
        if (i < n && (src[i] == 'e' || src[i] == 'E')) {
          is_float = true;
          ++i;
          if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      }
      if (i < n && (src[i] == 'f' || src[i] == 'F' || src[i] == 'd' || src[i] == 'D')) {
        is_float = true;
        ++i;
      } else if (i < n && (src[i] == 'l' || src[i] == 'L')) {
        ++i;
      }
      push(is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, begin, i, tok_line);
      continue;
    }
    if (c == '"' && i + 2 < n && src[i + 1] == '"' && src[i + 2] == '"') {
      i += 3;
      while (i < n && !(src[i] == '"' && i + 2 < n && src[i + 1] == '"' && src[i + 2] == '"')) {
        if (src[i] == '\\') ++i;
        if (i < n && src[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 3);
      push(TokenKind::StringLiteral, begin, i, tok_line);
      continue;
    }
    if (c == '"' || c == '\'') {
      ++i;
      while (i < n && src[i] != c && src[i] != '\n') {
        if (src[i] == '\\') ++i;
        ++i;
      }
      if (i < n && src[i] == c) ++i;
      push(c == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, begin, i, tok_line);
      continue;
    }
    bool matched = false;
    for (auto op : kOperators) {
      if (src.substr(i, op.size()) == op) {
        i += op.size();
        push(TokenKind::Operator, begin, i, tok_line);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (kSingleOps.find(c) != std::string_view::npos) {
      ++i;
      push(TokenKind::Operator, begin, i, tok_line);
      continue;
    }
    // Unknown byte (e.g. stray '#' or '\\'): skip it.
    ++i;
  }
  out.push_back(Token{TokenKind::End, "", line, n, n});
  return out;
}

bool TypeRef::is_primitive() const {
  static const std::unordered_set<std::string_view> prim = {"int",  "long",  "short",   "byte", "char",
                                                            "float", "double", "boolean", "void"};
  return dims == 0 && prim.count(name) > 0;
}

bool Modifiers::annotated(std::string_view name) const {
  return std::find(annotations.begin(), annotations.end(), name) != annotations.end();
}

}  // namespace smellstab::java
