#include <gtest/gtest.h>

#include <random>
#include <set>

#include "smell_fixtures.hpp"
#include "smellstab/smells.hpp"
#include "smellstab/util.hpp"
#include "test_support.hpp"

using namespace smellstab;
using smellstab::testing::corpus_of;
using smellstab::testing::make_smell_fixture;
using smellstab::testing::ref_of;

namespace {

struct Analyzed {
  SourceCorpus corpus;
  DependencyGraph graph;
};

Analyzed analyze(const std::map<std::string, std::string>& sources) {
  Analyzed a{corpus_of(sources), {}};
  a.graph = extract_dependencies(a.corpus);
  return a;
}

std::set<std::pair<std::string, std::string>> smell_set(const Analyzed& a, const ThresholdConfig& cfg) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& s : detect_smells(a.corpus, a.graph, cfg).instances)
    out.emplace(std::string(to_string(s.smell)), a.corpus.id(s.host).display());
  return out;
}

}  // namespace

TEST(ThresholdConfig, DefaultsRoundTripAndEcho) {
  auto d = ThresholdConfig::defaults();
  EXPECT_EQ(d.get("FEW"), 5);
  EXPECT_EQ(d.get("WMC_VH"), 47);
  EXPECT_EQ(d.get("TCC_LOW"), 1.0 / 3);
  auto again = ThresholdConfig::parse(d.serialize());
  EXPECT_EQ(again.values(), d.values());
  std::string echoed;
  for (const auto& l : d.echo_lines()) echoed += "# cfg " + l + "\n";
  EXPECT_EQ(ThresholdConfig::parse(echoed).values(), d.values());
}

TEST(ThresholdConfig, OverridesAndErrors) {
  auto c = ThresholdConfig::parse("version=1\n# comment\nFEW = 3\nLAA_LOW=0.5\n");
  EXPECT_EQ(c.get("FEW"), 3);
  EXPECT_EQ(c.get("LAA_LOW"), 0.5);
  EXPECT_NE(c.hash(), ThresholdConfig::defaults().hash());
  EXPECT_THROW(ThresholdConfig::parse("NOPE=1"), ConfigError);
  EXPECT_THROW(ThresholdConfig::parse("version=2"), ConfigError);
  EXPECT_THROW(ThresholdConfig::parse("FEW=abc"), ConfigError);
  EXPECT_THROW(ThresholdConfig::parse("FEW=0"), ConfigError);
  EXPECT_THROW(ThresholdConfig::parse("TCC_LOW=1.5"), ConfigError);
  EXPECT_THROW(ThresholdConfig::parse("FEW"), ConfigError);
}

TEST(SmellNames, LevelsMatchGrouping) {
  std::size_t method = 0;
  for (auto s : kAllSmells) {
    EXPECT_EQ(parse_smell_type(to_string(s)), s);
    if (level_of(s) == SmellLevel::Method) ++method;
  }
  EXPECT_EQ(method, 5u);
  EXPECT_EQ(level_of(SmellType::DiCo), SmellLevel::Method);
  EXPECT_EQ(level_of(SmellType::RB), SmellLevel::Class);
}

TEST(MethodMetrics, EmptyBody) {
  auto a = analyze({{"E.java", "class E { void m() {} }"}});
  auto m = compute_method_metrics(a.corpus, a.graph, ref_of(a.corpus, "E.m()"));
  EXPECT_EQ(m.loc, 0u);
  EXPECT_EQ(m.cyclo, 1u);
  EXPECT_EQ(m.max_nesting, 0u);
  EXPECT_EQ(m.noav, 0u);
}

TEST(MethodMetrics, AbstractMethodAllZero) {
  auto a = analyze({{"A.java", "abstract class A { abstract int m(int x); }"}});
  auto m = compute_method_metrics(a.corpus, a.graph, ref_of(a.corpus, "A.m(int)"));
  EXPECT_EQ(m.cyclo, 0u);
  EXPECT_EQ(m.loc, 0u);
  EXPECT_EQ(m.noav, 0u);
}

TEST(MethodMetrics, CouplingIntensityAndDispersion) {
  auto f = make_smell_fixture(SmellType::DiCo, true);
  auto a = analyze(f.sources);
  auto m = compute_method_metrics(a.corpus, a.graph, ref_of(a.corpus, "Disp.run(P1,P2,P3,P4)"));
  EXPECT_EQ(m.cint, 8u);
  EXPECT_DOUBLE_EQ(m.cdisp, 4.0 / 8.0);
}

TEST(MethodMetrics, ForeignDataAccess) {
  auto a = analyze({{"X.java", "class X { int a; int b; }"},
                    {"Y.java", "class Y { int c; int getC() { return c; } }"},
                    {"U.java", "class U { int own; int use(X x, Y y) { return x.a + x.b + y.getC(); } }"}});
  auto m = compute_method_metrics(a.corpus, a.graph, ref_of(a.corpus, "U.use(X,Y)"));
  EXPECT_EQ(m.atfd, 3u);  // two direct reads and one accessor
  EXPECT_EQ(m.laa, 0.0);
  EXPECT_EQ(m.fdp, 2u);
  EXPECT_EQ(m.noav, 2u + 2u);  // params x, y + fields X.a, X.b
}

TEST(MethodMetrics, ChangingMethodsAndClasses) {
  auto a = analyze({{"H.java", "class H { void m() {} void self() { m(); } }"},
                    {"A.java", "class A { void a1(H h) { h.m(); } void a2(H h) { h.m(); h.m(); } }"},
                    {"B.java", "class B { void b(H h) { h.m(); } }"}});
  auto m = compute_method_metrics(a.corpus, a.graph, ref_of(a.corpus, "H.m()"));
  EXPECT_EQ(m.cm, 3u);
  EXPECT_EQ(m.cc, 2u);
}

TEST(ClassMetrics, EmptyClass) {
  auto a = analyze({{"E.java", "class E {}"}});
  auto c = compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "E"));
  EXPECT_EQ(c.wmc, 0u);
  EXPECT_EQ(c.tcc, 0.0);
  EXPECT_EQ(c.amw, 0.0);
  EXPECT_EQ(c.bovr, 0.0);
  EXPECT_EQ(c.bur, 0.0);
}

TEST(ClassMetrics, TightCohesionSinglePair) {
  auto a = analyze({{"T.java", "class T { int f; void a() { f++; } int b() { return f; } }"}});
  EXPECT_DOUBLE_EQ(compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "T")).tcc, 1.0);
}

TEST(ClassMetrics, BaseOverrideRatio) {
  auto a = analyze({{"P.java", "class P { void a() {} void b() {} void c() {} void d() {} }"},
                    {"S.java", "class S extends P { void a() { } @Override void b() { } void extra() {} }"}});
  auto c = compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "S"));
  EXPECT_DOUBLE_EQ(c.bovr, 0.5);
}

TEST(ClassMetrics, ProtectedUsageAndNewServices) {
  auto a = analyze({{"P.java", "class P { protected int x; protected int y; protected void h() {} public void s() {} }"},
                    {"S.java",
                     "class S extends P {\n"
                     "  public int get() { return x; }\n"
                     "  public void s() {}\n"
                     "  public void fresh() { h(); }\n"
                     "}\n"}});
  auto c = compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "S"));
  EXPECT_EQ(c.nprotm, 3u);
  EXPECT_DOUBLE_EQ(c.bur, 2.0 / 3.0);
  EXPECT_EQ(c.nas, 2u);  // get, fresh
  EXPECT_DOUBLE_EQ(c.pnas, 2.0 / 3.0);
  EXPECT_EQ(c.noam, 1u);  // get() returns an inherited field
}

TEST(ClassMetrics, DataClassMeasures) {
  auto a = analyze({{"D.java",
                     "public class D {\n"
                     "  public int a; public static final int K = 1; private int b;\n"
                     "  public int getB() { return b; }\n"
                     "  public void setB(int v) { b = v; }\n"
                     "  public int work() { return a * 2; }\n"
                     "}\n"}});
  auto c = compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "D"));
  EXPECT_EQ(c.nopa, 1u);
  EXPECT_EQ(c.noam, 2u);
  EXPECT_EQ(c.nom, 3u);
  EXPECT_DOUBLE_EQ(c.woc, 1.0 / 5.0);  // 1 functional of 3 public methods + 2 public fields
}

TEST(ClassMetrics, InterfaceIsDomainError) {
  auto a = analyze({{"I.java", "interface I { void m(); }"}});
  EXPECT_THROW(compute_class_metrics(a.corpus, a.graph, ref_of(a.corpus, "I")), DomainError);
}

TEST(DetectSmells, CleanCodeYieldsNothing) {
  auto a = analyze({{"Clean.java",
                     "class Clean {\n"
                     "  private int count;\n"
                     "  void inc() { count++; }\n"
                     "  int get() { return count; }\n"
                     "  void reset() { count = 0; }\n"
                     "}\n"}});
  EXPECT_TRUE(detect_smells(a.corpus, a.graph, ThresholdConfig::defaults()).instances.empty());
}

class SmellFixtureTest : public ::testing::TestWithParam<SmellType> {};

TEST_P(SmellFixtureTest, TargetTriggersExactlyItsSmell) {
  auto f = make_smell_fixture(GetParam(), true);
  auto a = analyze(f.sources);
  std::set<std::pair<std::string, std::string>> expected;
  for (const auto& h : f.hosts) expected.emplace(std::string(to_string(f.target)), h);
  for (const auto& [smell, hosts] : f.implied)
    for (const auto& h : hosts) expected.emplace(smell, h);
  EXPECT_EQ(smell_set(a, ThresholdConfig::defaults()), expected);
}

TEST_P(SmellFixtureTest, NearMissTriggersNothing) {
  auto f = make_smell_fixture(GetParam(), false);
  auto a = analyze(f.sources);
  EXPECT_TRUE(smell_set(a, ThresholdConfig::defaults()).empty());
}

INSTANTIATE_TEST_SUITE_P(AllSmells, SmellFixtureTest, ::testing::ValuesIn(kAllSmells),
                         [](const auto& info) { return std::string(to_string(info.param)); });

namespace {

// Union of all fixtures in one corpus, for property checks.
std::map<std::string, std::string> combined_corpus() {
  std::map<std::string, std::string> all;
  for (auto s : kAllSmells) {
    for (bool t : {true, false}) {
      const std::string pkg = std::string(t ? "t" : "n") + std::string(to_string(s));
      for (const auto& [file, text] : make_smell_fixture(s, t).sources)
        all[pkg + "/" + file] = "package " + pkg + ";\n" + text;
    }
  }
  return all;
}

}  // namespace

TEST(SmellProperties, HostKindMatchesLevelAndBrainClassImpliesBrainMethod) {
  auto a = analyze(combined_corpus());
  auto report = detect_smells(a.corpus, a.graph, ThresholdConfig::defaults(), 3);
  ASSERT_FALSE(report.instances.empty());
  std::set<ArtifactRef> bm_classes;
  for (const auto& s : report.instances) {
    const auto k = a.corpus.kind(s.host);
    if (level_of(s.smell) == SmellLevel::Method)
      EXPECT_TRUE(k == ArtifactKind::Method || k == ArtifactKind::Constructor);
    else
      EXPECT_EQ(k, ArtifactKind::Class);
    EXPECT_EQ(s.enclosing, enclosing_class(a.corpus, s.host));
    if (s.smell == SmellType::BM) bm_classes.insert(s.enclosing);
  }
  for (const auto& s : report.instances)
    if (s.smell == SmellType::BC) EXPECT_TRUE(bm_classes.count(s.host));
  // Sorted, unique by (smell, host).
  for (std::size_t i = 1; i < report.instances.size(); ++i) {
    const auto& p = report.instances[i - 1];
    const auto& q = report.instances[i];
    EXPECT_TRUE(p.smell < q.smell ||
                (p.smell == q.smell && a.corpus.id(p.host).display() < a.corpus.id(q.host).display()));
  }
}

TEST(SmellProperties, RaisingLowerBoundThresholdsNeverAddsInstances) {
  auto a = analyze(combined_corpus());
  const auto base = ThresholdConfig::defaults();
  const std::size_t n0 = detect_smells(a.corpus, a.graph, base).instances.size();
  // Keys used only as lower bounds ("metric > key" or "metric >= key").
  for (const char* key : {"LOC_HIGH", "NEST_SEV", "NOAV_MANY", "FEW_ATFD", "MEMCAP", "CM_HIGH", "CC_MANY", "WMC_VH",
                          "BC_LOC", "NOM_AVG", "CYCLO_RATIO", "PNAS_HIGH"}) {
    for (double factor : {1.01, 1.5, 3.0}) {
      auto cfg = base;
      double v = base.get(key) * factor;
      if (v >= 1 && base.get(key) < 1) v = 0.99;
      cfg.set(key, v);
      EXPECT_LE(detect_smells(a.corpus, a.graph, cfg).instances.size(), n0) << key << " x" << factor;
    }
  }
}

namespace {

// Independent re-evaluation of the strategies from the exported metrics CSV.
std::set<std::pair<std::string, std::string>> oracle_from_csv(const std::string& metrics_csv) {
  auto table = csv::parse(metrics_csv);
  std::string cfg_text;
  for (const auto& c : table.comments) cfg_text += c + "\n";
  auto cfg = ThresholdConfig::parse(cfg_text);
  auto T = [&](const char* k) { return cfg.get(k); };
  auto col = [&](const std::vector<std::string>& row, const char* name) { return row[table.column(name)]; };
  auto num = [&](const std::vector<std::string>& row, const char* name) { return std::stod(col(row, name)); };
  std::set<std::pair<std::string, std::string>> out;
  std::map<std::string, int> bm;
  for (const auto& r : table.rows) {
    if (col(r, "level") != "method" || col(r, "abstract") == "true") continue;
    const double loc = num(r, "loc"), cyclo = num(r, "cyclo"), nest = num(r, "max_nesting");
    const double cint = num(r, "cint"), cdisp = num(r, "cdisp");
    const std::string host = col(r, "artifact");
    if (loc > T("LOC_HIGH") && cyclo / loc >= T("CYCLO_RATIO") && nest >= T("NEST_SEV") && num(r, "noav") > T("NOAV_MANY")) {
      out.emplace("BM", host);
      ++bm[col(r, "enclosing_class")];
    }
    if (num(r, "atfd") > T("FEW_ATFD") && num(r, "laa") < T("LAA_LOW") && num(r, "fdp") <= T("FEW_FDP")) out.emplace("FE", host);
    if (cint > T("MEMCAP") && cdisp >= T("CDISP_HIGH") && nest > T("NEST_SHALLOW")) out.emplace("DiCo", host);
    if (((cint > T("MEMCAP") && cdisp < T("CDISP_HIGH")) || (cint > T("FEW") && cdisp < T("CDISP_LOW"))) && nest > T("NEST_SHALLOW"))
      out.emplace("IC", host);
    if (num(r, "cm") > T("CM_HIGH") && num(r, "cc") > T("CC_MANY")) out.emplace("SS", host);
  }
  for (const auto& r : table.rows) {
    if (col(r, "level") != "class") continue;
    const std::string host = col(r, "artifact");
    const double wmc = num(r, "wmc"), tcc = num(r, "tcc"), loc = num(r, "loc"), amw = num(r, "amw"), nom = num(r, "nom");
    const bool sup = col(r, "internal_superclass") == "true";
    const int b = bm[host];
    if (num(r, "atfd") > T("FEW") && wmc >= T("WMC_VH") && tcc < T("TCC_LOW")) out.emplace("GC", host);
    const double data = num(r, "nopa") + num(r, "noam");
    if (num(r, "woc") < T("WOC_LOW") && ((data > T("FEW") && wmc < T("WMC_H")) || (data > T("MANY") && wmc < T("WMC_VH"))))
      out.emplace("DC", host);
    if (((b >= 2 && loc >= T("BC_LOC") && wmc >= T("WMC_VH")) || (b == 1 && loc >= 2 * T("BC_LOC") && wmc >= 2 * T("WMC_VH"))) &&
        tcc < T("BC_TCC"))
      out.emplace("BC", host);
    if (sup && ((num(r, "nprotm") > T("FEW") && num(r, "bur") < T("BUR_LOW")) || num(r, "bovr") < T("BOVR_LOW")) &&
        (amw > T("AMW_AVG") || wmc > T("WMC_AVG")) && nom > T("NOM_AVG"))
      out.emplace("RB", host);
    if (sup && num(r, "nas") >= T("NOM_AVG") && num(r, "pnas") >= T("PNAS_HIGH") && (amw > T("AMW_AVG") || wmc >= T("WMC_H")) &&
        nom >= T("NOM_AVG"))
      out.emplace("TB", host);
  }
  return out;
}

}  // namespace

TEST(SmellProperties, DetectionEqualsOracleOverExportedMetrics) {
  auto a = analyze(combined_corpus());
  std::mt19937_64 rng(11);
  std::vector<ThresholdConfig> configs{ThresholdConfig::defaults()};
  const auto defaults = ThresholdConfig::defaults();
  for (int i = 0; i < 5; ++i) {
    auto c = defaults;
    for (const auto& [k, v] : defaults.values()) {
      std::uniform_real_distribution<double> jitter(0.6, 1.4);
      double nv = v * jitter(rng);
      if (v < 1) nv = std::min(nv, 0.95);
      c.set(k, nv);
    }
    configs.push_back(c);
  }
  for (const auto& cfg : configs) {
    EXPECT_EQ(smell_set(a, cfg), oracle_from_csv(metrics_to_csv(a.corpus, a.graph, cfg)));
  }
}

TEST(SmellExports, SmellsCsvShape) {
  auto f = make_smell_fixture(SmellType::FE, true);
  auto a = analyze(f.sources);
  auto cfg = ThresholdConfig::defaults();
  auto text = smells_to_csv(a.corpus, detect_smells(a.corpus, a.graph, cfg).instances, cfg);
  auto t = csv::parse(text);
  EXPECT_EQ(t.header, (std::vector<std::string>{"smell", "level", "host", "enclosing_class"}));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0], (std::vector<std::string>{"FE", "method", "Envy.sum(Data)", "Envy"}));
  EXPECT_EQ(ThresholdConfig::parse(join(t.comments, "\n")).values(), cfg.values());
}
