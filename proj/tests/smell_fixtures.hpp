#pragma once

// Engineered Java fixtures, one per smell, plus a near-miss twin for each
// where exactly one metric sits just past the configured threshold.

#include <map>
#include <string>
#include <vector>

#include "smellstab/smells.hpp"

namespace smellstab::testing {

struct SmellFixture {
  SmellType target;
  std::map<std::string, std::string> sources;
  std::vector<std::string> hosts;  // expected host displays for the target smell
  std::map<std::string, std::vector<std::string>> implied;  // smell -> hosts required by the target's definition
};

namespace detail {

inline std::string fields(const std::string& prefix, int n, const std::string& vis = "") {
  std::string out;
  for (int i = 0; i < n; ++i) out += "  " + vis + "int " + prefix + std::to_string(i) + ";\n";
  return out;
}

// A method with `params` int parameters, nesting depth 5 and `ifs` extra
// single-line branches; loc = 13 + ifs.
inline std::string brain_method(const std::string& name, int params, int ifs) {
  std::string sig;
  for (int i = 0; i < params; ++i) sig += (i ? ", int p" : "int p") + std::to_string(i);
  std::string b = "  int " + name + "(" + sig + ") {\n";
  b += "    int x = 0;\n";
  for (int d = 0; d < 5; ++d) b += std::string(4 + 2 * d, ' ') + "if (p" + std::to_string(d % params) + " > " + std::to_string(d) + ") {\n";
  b += "              x++;\n";
  for (int d = 4; d >= 0; --d) b += std::string(4 + 2 * d, ' ') + "}\n";
  for (int i = 0; i < ifs; ++i) b += "    if (p" + std::to_string(i % params) + " > " + std::to_string(i + 10) + ") x += " + std::to_string(i) + ";\n";
  b += "    return x;\n";
  b += "  }\n";
  return b;
}

inline std::string branches(const std::string& name, const std::string& param, int cyclo,
                            const std::string& cond_prefix, const std::string& vis = "") {
  std::string b = "  " + vis + "int " + name + "(" + param + ") {\n    int x = 0;\n";
  for (int i = 1; i < cyclo; ++i) b += "    if (" + cond_prefix + " > " + std::to_string(i) + ") x++;\n";
  b += "    return x;\n  }\n";
  return b;
}

}  // namespace detail

// target = true builds the smelly variant, false the near miss.
inline SmellFixture make_smell_fixture(SmellType s, bool target) {
  using namespace detail;
  SmellFixture f;
  f.target = s;
  switch (s) {
    case SmellType::FE: {
      const int n = target ? 6 : 5;  // atfd must exceed FEW_ATFD = 5
      f.sources["Data.java"] = "class Data {\n" + fields("f", n) + "}\n";
      std::string sum;
      for (int i = 0; i < n; ++i) sum += (i ? " + d.f" : "d.f") + std::to_string(i);
      f.sources["Envy.java"] = "class Envy {\n  int sum(Data d) {\n    return " + sum + ";\n  }\n}\n";
      f.hosts = {"Envy.sum(Data)"};
      break;
    }
    case SmellType::BM: {
      // loc = 13 + ifs must exceed LOC_HIGH = 65.
      f.sources["Brain.java"] = "class Brain {\n" + brain_method("think", 9, target ? 53 : 52) + "}\n";
      f.hosts = {"Brain.think(int,int,int,int,int,int,int,int,int)"};
      break;
    }
    case SmellType::DiCo: {
      // 4 providers x 2 methods; cint must exceed MEMCAP = 7.
      std::string calls;
      int made = 0;
      for (int p = 1; p <= 4; ++p) {
        f.sources["P" + std::to_string(p) + ".java"] =
            "class P" + std::to_string(p) + " {\n  void a() {}\n  void b() {}\n}\n";
        for (const char* m : {"a", "b"}) {
          if (!target && made == 7) break;
          calls += "        x" + std::to_string(p) + "." + m + "();\n";
          ++made;
        }
      }
      f.sources["Disp.java"] =
          "class Disp {\n  void run(P1 x1, P2 x2, P3 x3, P4 x4) {\n    if (x1 != null) {\n      if (x2 != null) {\n" +
          calls + "      }\n    }\n  }\n}\n";
      f.hosts = {"Disp.run(P1,P2,P3,P4)"};
      break;
    }
    case SmellType::IC: {
      // 8 methods of one provider; the near miss keeps nesting at 1.
      std::string prov = "class Prov {\n";
      std::string calls;
      for (int i = 0; i < 8; ++i) {
        prov += "  void m" + std::to_string(i) + "() {}\n";
        calls += "      p.m" + std::to_string(i) + "();\n";
      }
      f.sources["Prov.java"] = prov + "}\n";
      f.sources["Intense.java"] = target ? "class Intense {\n  void run(Prov p) {\n    if (p != null) {\n      while (p != null) {\n" +
                                               calls + "        break;\n      }\n    }\n  }\n}\n"
                                         : "class Intense {\n  void run(Prov p) {\n    if (p != null) {\n" + calls +
                                               "    }\n  }\n}\n";
      f.hosts = {"Intense.run(Prov)"};
      break;
    }
    case SmellType::SS: {
      // 11 caller methods (cm > CM_HIGH = 10) spread over 6 classes (cc > CC_MANY = 5).
      f.sources["Hub.java"] = "class Hub {\n  void m() {}\n}\n";
      const std::vector<int> spread = target ? std::vector<int>{2, 2, 2, 2, 2, 1} : std::vector<int>{3, 2, 2, 2, 2};
      for (std::size_t c = 0; c < spread.size(); ++c) {
        std::string body = "class C" + std::to_string(c) + " {\n";
        for (int k = 0; k < spread[c]; ++k) body += "  void a" + std::to_string(k) + "(Hub h) { h.m(); }\n";
        f.sources["C" + std::to_string(c) + ".java"] = body + "}\n";
      }
      f.hosts = {"Hub.m()"};
      break;
    }
    case SmellType::GC: {
      // 6 foreign fields (atfd > FEW), wmc 48 >= WMC_VH = 47, no own fields (tcc 0).
      f.sources["Data.java"] = "class Data {\n" + fields("f", 6) + "}\n";
      std::string god = "class God {\n";
      const int cyclos[] = {8, 8, 8, 8, 8, target ? 8 : 6};  // 48 vs 46
      for (int i = 0; i < 6; ++i)
        god += branches("m" + std::to_string(i), "Data d", cyclos[i], "d.f" + std::to_string(i));
      f.sources["God.java"] = god + "}\n";
      f.hosts = {"God"};
      break;
    }
    case SmellType::BC: {
      // Three brain methods give loc >= BC_LOC = 197; the near miss keeps each
      // method one line short of LOC_HIGH so no Brain Method exists.
      std::string body = "class Huge {\n";
      const int ifs = target ? 53 : 52;
      for (int i = 0; i < 3; ++i) body += brain_method("b" + std::to_string(i), 9, ifs);
      body += "  int pad() {\n";
      for (int i = 0; i < 6; ++i) body += "    int v" + std::to_string(i) + " = " + std::to_string(i) + ";\n";
      body += "    return 0;\n  }\n";
      f.sources["Huge.java"] = body + "}\n";
      f.hosts = {"Huge"};
      if (target) {
        const std::string sig = "(int,int,int,int,int,int,int,int,int)";
        f.implied["BM"] = {"Huge.b0" + sig, "Huge.b1" + sig, "Huge.b2" + sig};
      }
      break;
    }
    case SmellType::DC: {
      // Public non-constant fields: nopa must exceed FEW = 5.
      f.sources["Bag.java"] = "public class Bag {\n" + fields("v", target ? 6 : 5, "public ") + "}\n";
      f.hosts = {"Bag"};
      break;
    }
    case SmellType::RB: {
      // Child overrides nothing (bovr 0), amw 3, nom must exceed NOM_AVG = 7.
      f.sources["Base.java"] = "class Base {\n  public void p0() {}\n  public void p1() {}\n}\n";
      std::string child = "class Heir extends Base {\n";
      for (int i = 0; i < (target ? 8 : 7); ++i) child += branches("m" + std::to_string(i), "int a", 3, "a");
      f.sources["Heir.java"] = child + "}\n";
      f.hosts = {"Heir"};
      break;
    }
    case SmellType::TB: {
      // Seven new public services (nas >= NOM_AVG = 7); the near miss makes one non-public.
      f.sources["Root.java"] = "class Root {\n  public void p0() {}\n}\n";
      std::string child = "class Rebel extends Root {\n";
      for (int i = 0; i < 7; ++i)
        child += branches("s" + std::to_string(i), "int a", 3, "a", (target || i > 0) ? "public " : "");
      f.sources["Rebel.java"] = child + "}\n";
      f.hosts = {"Rebel"};
      break;
    }
  }
  return f;
}

}  // namespace smellstab::testing
