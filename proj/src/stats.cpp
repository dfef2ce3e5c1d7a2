#include "smellstab/stats.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "smellstab/util.hpp"

namespace smellstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ975 = 1.959963984540054;
constexpr double kLogThetaMin = -10.0;
constexpr double kLogThetaMax = 20.0;
constexpr double kLogSigma2Min = -25.0;
constexpr double kLogSigma2Max = 5.0;

const boost::math::normal kStdNormal;

double normal_upper(double z) { return boost::math::cdf(boost::math::complement(kStdNormal, z)); }

}  // namespace

// --- dataset -----------------------------------------------------------------

const std::vector<double>& Dataset::column(const std::string& name) const {
  auto it = columns.find(name);
  if (it == columns.end()) throw StatsError("dataset has no column " + name);
  return it->second;
}

Dataset dataset_from_csv(std::string_view text) {
  const auto t = csv::parse(text);
  const auto cp = t.column("project");
  const auto cc = t.column("class");
  Dataset d;
  std::vector<std::size_t> numeric;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j == cp || j == cc || t.header[j] == "lineage_status") continue;
    numeric.push_back(j);
    d.columns[t.header[j]];
  }
  for (const auto& row : t.rows) {
    d.project.push_back(row.at(cp));
    d.cls.push_back(row.at(cc));
    for (auto j : numeric) {
      const auto& cell = row.at(j);
      double v = 0;
      if (cell == "true")
        v = 1;
      else if (cell == "false")
        v = 0;
      else
        v = std::stod(cell);
      d.columns[t.header[j]].push_back(v);
    }
  }
  return d;
}

// --- specs -------------------------------------------------------------------

std::vector<ModelSpec> hypothesis_specs() {
  const std::vector<std::string> base = {"ClSize", "#EffNei"};
  struct H {
    const char* id;
    const char* iv;
    std::vector<std::string> extra;
    Population pop;
    int family;
  };
  const std::vector<H> hs = {
      {"H1.1", "IsSmelly", {}, Population::All, 1},
      {"H1.2", "#SmellFoc", {}, Population::All, 1},
      {"H1.3", "VarSmellFoc", {}, Population::All, 1},
      {"H2.1", "HasSmellEff", {}, Population::All, 2},
      {"H2.2", "#SmellEff", {}, Population::All, 2},
      {"H2.3", "VarSmellEff", {}, Population::All, 2},
      {"H2.4", "HasSmellEff", {}, Population::NonSmelly, 2},
      {"H2.5", "#SmellEff", {}, Population::NonSmelly, 2},
      {"H2.6", "VarSmellEff", {}, Population::NonSmelly, 2},
      {"H3.1", "HasEffCoup", {}, Population::All, 3},
      {"H3.2", "HasEffCoup", {"IsSmelly", "HasSmellEff"}, Population::All, 3},
      {"H4.1", "HasEffInt", {}, Population::All, 4},
      {"H4.2", "#EffSmellInt", {}, Population::All, 4},
      {"H4.3", "EffIntInten", {}, Population::All, 4},
      {"H4.4", "HasEffInt", {"#SmellFoc", "#SmellEff"}, Population::All, 4},
      {"H4.5", "#EffSmellInt", {"#SmellFoc", "#SmellEff"}, Population::All, 4},
      {"H4.6", "EffIntInten", {"#SmellFoc", "#SmellEff"}, Population::All, 4},
  };
  std::vector<ModelSpec> out;
  for (const auto& h : hs)
    for (const char* dv : {"ChF", "ChS"}) {
      ModelSpec s;
      s.id = h.id;
      s.dv = dv;
      s.iv = h.iv;
      s.cvs = base;
      s.cvs.insert(s.cvs.end(), h.extra.begin(), h.extra.end());
      s.population = h.pop;
      s.direction = 1;
      s.family = h.family;
      out.push_back(std::move(s));
    }
  return out;
}

bool is_log_transformed(const std::string& v) {
  static const std::set<std::string> logs = {"ClSize",      "#EffNei",     "#SmellFoc",    "#SmellEff",
                                             "VarSmellFoc", "VarSmellEff", "#EffSmellInt", "EffIntInten"};
  return logs.count(v) > 0;
}

bool is_binary(const std::string& v) {
  static const std::set<std::string> flags = {"IsSmelly", "HasSmellEff", "HasEffCoup", "HasEffInt"};
  return flags.count(v) > 0;
}

int Design::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<int>(j);
  return -1;
}

Design prepare_design(const Dataset& data, const ModelSpec& spec) {
  std::vector<std::size_t> rows;
  const auto* smelly = spec.population == Population::NonSmelly ? &data.column("IsSmelly") : nullptr;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!smelly || (*smelly)[i] == 0) rows.push_back(i);
  if (rows.empty()) throw StatsError(spec.label() + ": empty population");
  std::vector<std::string> vars = {spec.iv};
  vars.insert(vars.end(), spec.cvs.begin(), spec.cvs.end());
  Design d;
  d.label = spec.label();
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.y.resize(n);
  d.X.resize(n, static_cast<Eigen::Index>(vars.size() + 1));
  d.names = {"(Intercept)"};
  d.binary = {false};
  const auto& y = data.column(spec.dv);
  std::vector<const std::vector<double>*> cols;
  for (const auto& v : vars) {
    cols.push_back(&data.column(v));
    d.names.push_back(v);
    d.binary.push_back(is_binary(v));
  }
  std::map<std::string, int> gid;
  for (auto i : rows) gid.emplace(data.project[i], 0);
  for (auto& [name, id] : gid) {
    id = static_cast<int>(d.group_names.size());
    d.group_names.push_back(name);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = rows[static_cast<std::size_t>(r)];
    const double yi = y[i];
    if (yi < 0 || std::floor(yi) != yi) throw StatsError(spec.label() + ": response must be a non-negative count");
    d.y[r] = yi;
    d.X(r, 0) = 1.0;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      double x = (*cols[j])[i];
      if (is_log_transformed(vars[j])) {
        if (x < 0) throw StatsError(spec.label() + ": negative count in " + vars[j]);
        x = std::log1p(x);
      }
      d.X(r, static_cast<Eigen::Index>(j + 1)) = x;
    }
    d.group.push_back(gid.at(data.project[i]));
  }
  return d;
}

Design null_design(const Design& d) {
  Design n = d;
  n.X = d.X.leftCols(1);
  n.names = {d.names[0]};
  n.binary = {false};
  n.label = d.label + " (null)";
  return n;
}

int FitResult::index(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<int>(j);
  throw StatsError("fit has no coefficient " + name);
}

namespace {

void finish_wald(FitResult& f) {
  f.ci_low = f.beta - kZ975 * f.se;
  f.ci_high = f.beta + kZ975 * f.se;
}

// Constant non-intercept columns make the model unidentifiable.
std::optional<std::string> degenerate_column(const Design& d) {
  for (Eigen::Index j = 1; j < d.X.cols(); ++j) {
    const auto c = d.X.col(j);
    if ((c.array() == c(0)).all()) return "constant predictor " + d.names[static_cast<std::size_t>(j)];
  }
  return std::nullopt;
}

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double ll = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] > 0) ll += y[i] * std::log(mu[i]);
    ll -= mu[i] + std::lgamma(y[i] + 1.0);
  }
  return ll;
}

FitResult failed_fit(const Design& d, std::string family, std::string message) {
  FitResult f;
  f.family = std::move(family);
  f.names = d.names;
  const auto p = static_cast<Eigen::Index>(d.p());
  f.beta = Eigen::VectorXd::Zero(p);
  f.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  f.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.n()));
  f.random_effects = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.groups()));
  f.loglik = std::numeric_limits<double>::quiet_NaN();
  f.converged = false;
  f.message = std::move(message);
  finish_wald(f);
  return f;
}

}  // namespace

// --- Poisson -----------------------------------------------------------------

FitResult fit_poisson(const Design& d, int max_iter) {
  if (auto bad = degenerate_column(d)) return failed_fit(d, "poisson", *bad);
  const auto n = static_cast<Eigen::Index>(d.n());
  const auto p = static_cast<Eigen::Index>(d.p());
  FitResult f;
  f.family = "poisson";
  f.names = d.names;
  f.theta = kInf;
  Eigen::VectorXd mu = (d.y.array() + 0.1).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double dev_old = kInf;
  bool ok = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd z = eta + ((d.y - mu).array() / mu.array()).matrix();
    Eigen::MatrixXd Xw = d.X.array().colwise() * mu.array().sqrt();
    Eigen::VectorXd zw = (z.array() * mu.array().sqrt()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Xw.transpose() * Xw);
    if (ldlt.info() != Eigen::Success) break;
    beta = ldlt.solve(Xw.transpose() * zw);
    eta = d.X * beta;
    if (!eta.allFinite() || eta.maxCoeff() > 50 || beta.cwiseAbs().maxCoeff() > 30) break;
    mu = eta.array().exp().matrix();
    double dev = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      dev += 2 * ((d.y[i] > 0 ? d.y[i] * std::log(d.y[i] / mu[i]) : 0.0) - (d.y[i] - mu[i]));
    if (std::isfinite(dev_old) && std::abs(dev - dev_old) / (std::abs(dev) + 0.1) < 1e-10) {
      ok = true;
      ++it;
      break;
    }
    dev_old = dev;
  }
  f.iterations = it;
  f.beta = beta;
  f.mu = mu;
  f.random_effects = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.groups()));
  f.loglik = poisson_loglik(d.y, mu);
  Eigen::MatrixXd info = d.X.transpose() * (d.X.array().colwise() * mu.array()).matrix();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ok && ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all()) {
    f.se = ldlt.solve(Eigen::MatrixXd::Identity(p, p)).diagonal().cwiseSqrt();
    f.converged = f.se.allFinite();
  } else {
    f.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  }
  if (!f.converged) f.message = "IRLS did not converge (separation or degenerate response)";
  finish_wald(f);
  return f;
}

double dispersion_statistic(const FitResult& fit, const Design& d) {
  const auto df = static_cast<long>(d.n()) - static_cast<long>(d.p());
  if (df <= 0) throw StatsError("dispersion statistic needs positive residual degrees of freedom");
  double chi2 = 0;
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double r = d.y[i] - fit.mu[i];
    chi2 += r * r / fit.mu[i];
  }
  return chi2 / static_cast<double>(df);
}

// --- negative binomial GLMM --------------------------------------------------

namespace {

// log Gamma(y + theta) - log Gamma(theta) and its theta derivative.
inline double lgamma_ratio(double y, double theta) {
  if (y < 50) {
    double s = 0;
    for (int k = 0; k < static_cast<int>(y); ++k) s += std::log(theta + k);
    return s;
  }
  return std::lgamma(y + theta) - std::lgamma(theta);
}

inline double digamma_ratio(double y, double theta) {
  if (y < 50) {
    double s = 0;
    for (int k = 0; k < static_cast<int>(y); ++k) s += 1.0 / (theta + k);
    return s;
  }
  return boost::math::digamma(y + theta) - boost::math::digamma(theta);
}

struct Row {
  double y;
  double lfact;  // log y!
};

class NegBinObjective {
 public:
  NegBinObjective(const Design& d, const NegBinOptions& opt) : d_(d), opt_(opt) {
    random_ = opt.random_intercept && d.groups() >= 2;
    rows_.reserve(d.n());
    for (Eigen::Index i = 0; i < d.y.size(); ++i) rows_.push_back({d.y[i], std::lgamma(d.y[i] + 1.0)});
    members_.resize(d.groups());
    for (std::size_t i = 0; i < d.group.size(); ++i) members_[static_cast<std::size_t>(d.group[i])].push_back(i);
    u_.assign(d.groups(), 0.0);
  }

  bool random() const { return random_; }
  int p() const { return static_cast<int>(d_.p()); }
  bool has_theta() const { return !opt_.fixed_theta.has_value(); }
  int size() const { return p() + (has_theta() ? 1 : 0) + (random_ ? 1 : 0); }
  int theta_index() const { return has_theta() ? p() : -1; }
  int sigma_index() const { return random_ ? p() + (has_theta() ? 1 : 0) : -1; }

  double theta_of(const Eigen::VectorXd& params) const {
    if (!has_theta()) return *opt_.fixed_theta;
    return std::exp(std::clamp(params[theta_index()], kLogThetaMin, kLogThetaMax));
  }
  double sigma2_of(const Eigen::VectorXd& params) const {
    if (!random_) return 0.0;
    return std::exp(std::clamp(params[sigma_index()], kLogSigma2Min, kLogSigma2Max));
  }

  const std::vector<double>& modes() const { return u_; }

  // Log-likelihood (Laplace-approximated with a random intercept) and
  // gradient in the parameterization [beta, log theta, log sigma2].
  double eval(const Eigen::VectorXd& params, Eigen::VectorXd* grad) {
    const int pp = p();
    const Eigen::VectorXd beta = params.head(pp);
    const double theta = theta_of(params);
    const double s2 = sigma2_of(params);
    const Eigen::VectorXd eta = d_.X * beta;
    Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(pp);
    double g_theta = 0, g_s2 = 0;
    double ll = 0;

    auto row_terms = [&](std::size_t i, double e, double& l, double& s, double& w, double& wp, double& dl_dth,
                         double& ds_dth, double& dw_dth) {
      const double y = rows_[i].y;
      const double mu = std::exp(e);
      const double tm = theta + mu;
      l = lgamma_ratio(y, theta) - rows_[i].lfact - theta * std::log1p(mu / theta) + y * (e - std::log(tm));
      s = theta * (y - mu) / tm;
      w = (y + theta) * theta * mu / (tm * tm);
      wp = w * (theta - mu) / tm;
      dl_dth = digamma_ratio(y, theta) - std::log1p(mu / theta) + (mu - y) / tm;
      ds_dth = (y - mu) * mu / (tm * tm);
      dw_dth = mu * ((y + 2 * theta) / (tm * tm) - 2 * (y + theta) * theta / (tm * tm * tm));
    };

    if (!random_) {
      for (std::size_t i = 0; i < rows_.size(); ++i) {
        double l, s, w, wp, dl, ds, dw;
        row_terms(i, eta[static_cast<Eigen::Index>(i)], l, s, w, wp, dl, ds, dw);
        ll += l;
        if (grad) {
          g_beta += s * d_.X.row(static_cast<Eigen::Index>(i)).transpose();
          g_theta += dl;
        }
      }
    } else {
      for (std::size_t g = 0; g < members_.size(); ++g) {
        const auto& idx = members_[g];
        double u = solve_mode(idx, eta, theta, s2, u_[g]);
        u_[g] = u;
        double sum_l = 0, sum_w = 0, sum_wp = 0, sum_dl = 0, sum_ds = 0, sum_dw = 0;
        Eigen::VectorXd sx = Eigen::VectorXd::Zero(pp), wx = Eigen::VectorXd::Zero(pp), wpx = Eigen::VectorXd::Zero(pp);
        for (auto i : idx) {
          double l, s, w, wp, dl, ds, dw;
          row_terms(i, eta[static_cast<Eigen::Index>(i)] + u, l, s, w, wp, dl, ds, dw);
          sum_l += l;
          sum_w += w;
          sum_wp += wp;
          sum_dl += dl;
          sum_ds += ds;
          sum_dw += dw;
          if (grad) {
            const auto xi = d_.X.row(static_cast<Eigen::Index>(i)).transpose();
            sx += s * xi;
            wx += w * xi;
            wpx += wp * xi;
          }
        }
        const double H = sum_w + 1.0 / s2;
        ll += sum_l - u * u / (2 * s2) - 0.5 * std::log(s2 * H);
        if (grad) {
          // Envelope terms plus the mode's dependence through -1/2 log H.
          g_beta += sx - 0.5 * (wpx - sum_wp * wx / H) / H;
          const double du_dth = sum_ds / H;
          g_theta += sum_dl - 0.5 * (sum_dw + sum_wp * du_dth) / H;
          const double s4 = s2 * s2;
          const double du_ds2 = u / (s4 * H);
          const double dH_ds2 = -1.0 / s4 + sum_wp * du_ds2;
          g_s2 += u * u / (2 * s4) - 1.0 / (2 * s2) - 0.5 * dH_ds2 / H;
        }
      }
    }
    if (grad) {
      grad->resize(size());
      grad->head(pp) = g_beta;
      if (has_theta()) {
        const double lt = params[theta_index()];
        (*grad)[theta_index()] = (lt < kLogThetaMin || lt > kLogThetaMax) ? 0.0 : g_theta * theta;
      }
      if (random_) {
        const double ls = params[sigma_index()];
        (*grad)[sigma_index()] = (ls < kLogSigma2Min || ls > kLogSigma2Max) ? 0.0 : g_s2 * s2;
      }
    }
    return ll;
  }

 private:
  const Design& d_;
  NegBinOptions opt_;
  bool random_ = false;
  std::vector<Row> rows_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> u_;

  // Newton iterations for the conditional mode of one group's intercept; the
  // objective is strictly concave in u.
  double solve_mode(const std::vector<std::size_t>& idx, const Eigen::VectorXd& eta, double theta, double s2,
                    double start) const {
    auto h = [&](double u) {
      double v = -u * u / (2 * s2);
      for (auto i : idx) {
        const double mu = std::exp(eta[static_cast<Eigen::Index>(i)] + u);
        v += rows_[i].y * (eta[static_cast<Eigen::Index>(i)] + u) - (rows_[i].y + theta) * std::log(theta + mu);
      }
      return v;
    };
    double u = std::isfinite(start) ? start : 0.0;
    for (int it = 0; it < 200; ++it) {
      double gsum = -u / s2, H = 1.0 / s2;
      for (auto i : idx) {
        const double mu = std::exp(eta[static_cast<Eigen::Index>(i)] + u);
        const double tm = theta + mu;
        const double y = rows_[i].y;
        gsum += theta * (y - mu) / tm;
        H += (y + theta) * theta * mu / (tm * tm);
      }
      double step = gsum / H;
      if (std::abs(step) < 1e-13 * (1 + std::abs(u))) break;
      const double h0 = h(u);
      double t = 1.0;
      while (t > 1e-8 && !(h(u + t * step) >= h0 - 1e-12 * std::abs(h0))) t *= 0.5;
      u += t * step;
      if (std::abs(t * step) < 1e-13 * (1 + std::abs(u))) break;
    }
    return u;
  }
};

class CeresAdapter : public ceres::FirstOrderFunction {
 public:
  explicit CeresAdapter(NegBinObjective& obj) : obj_(obj) {}
  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    Eigen::Map<const Eigen::VectorXd> x(parameters, obj_.size());
    Eigen::VectorXd g;
    const double ll = obj_.eval(x, gradient ? &g : nullptr);
    if (!std::isfinite(ll)) return false;
    *cost = -ll;
    if (gradient) {
      if (!g.allFinite()) return false;
      for (int i = 0; i < obj_.size(); ++i) gradient[i] = -g[i];
    }
    return true;
  }
  int NumParameters() const override { return obj_.size(); }

 private:
  NegBinObjective& obj_;
};

// Hessian of the log-likelihood by central differences of the analytic gradient.
Eigen::MatrixXd numeric_hessian(NegBinObjective& obj, const Eigen::VectorXd& x) {
  const int k = obj.size();
  Eigen::MatrixXd H(k, k);
  for (int j = 0; j < k; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x, gp, gm;
    xp[j] += h;
    xm[j] -= h;
    obj.eval(xp, &gp);
    obj.eval(xm, &gm);
    H.col(j) = (gp - gm) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace

double negbin_laplace_loglik(const Design& d, const Eigen::VectorXd& params, Eigen::VectorXd* grad,
                             const NegBinOptions& options) {
  NegBinObjective obj(d, options);
  if (params.size() != obj.size()) throw StatsError("parameter vector has the wrong length");
  // Warm the conditional modes so the result does not depend on the start.
  obj.eval(params, nullptr);
  return obj.eval(params, grad);
}

FitResult fit_negbin_random_intercept(const Design& d, const NegBinOptions& options) {
  if (auto bad = degenerate_column(d)) return failed_fit(d, "negbin", *bad);
  if (d.y.sum() == 0) return failed_fit(d, "negbin", "all-zero response");
  NegBinObjective obj(d, options);
  FitResult f;
  f.family = "negbin";
  f.names = d.names;
  f.random_intercept = obj.random();
  if (options.random_intercept && !obj.random())
    f.warnings.push_back("single project: fitted a fixed-intercept negative binomial model");

  // Start from the Poisson fit and a moment estimate of theta.
  const int pp = obj.p();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(obj.size());
  const auto pois = fit_poisson(d);
  if (pois.converged) {
    x.head(pp) = pois.beta;
  } else {
    x[0] = std::log(d.y.mean() + 0.5);
  }
  if (obj.has_theta()) {
    const double m = d.y.mean();
    const double var = (d.y.array() - m).square().sum() / std::max<double>(1.0, static_cast<double>(d.n()) - 1);
    const double th = var > m * 1.01 ? m * m / (var - m) : 100.0;
    x[obj.theta_index()] = std::clamp(std::log(std::max(th, 1e-3)), kLogThetaMin + 1, kLogThetaMax - 1);
  }
  if (obj.random()) x[obj.sigma_index()] = std::log(0.1);

  ceres::GradientProblemSolver::Options copt;
  copt.line_search_direction_type = ceres::BFGS;
  copt.max_num_iterations = options.max_iter;
  copt.function_tolerance = 1e-12;
  copt.gradient_tolerance = 1e-12;
  copt.parameter_tolerance = 1e-14;
  copt.logging_type = ceres::SILENT;
  copt.minimizer_progress_to_stdout = false;
  ceres::GradientProblem problem(new CeresAdapter(obj));
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(copt, problem, x.data(), &summary);
  f.iterations = static_cast<int>(summary.iterations.size());

  // Parameters pinned at a bound (theta -> infinity, sigma2 -> 0) are held
  // fixed for the Newton polish and the covariance.
  auto free_mask = [&](const Eigen::VectorXd& v) {
    std::vector<int> idx;
    for (int j = 0; j < obj.size(); ++j) {
      if (j == obj.theta_index() && v[j] > kLogThetaMax - 2) continue;
      if (j == obj.sigma_index() && v[j] < kLogSigma2Min + 5) continue;
      idx.push_back(j);
    }
    return idx;
  };
  Eigen::VectorXd g;
  double ll = obj.eval(x, &g);
  obj.eval(x, &g);  // modes now warm for this point
  ll = obj.eval(x, &g);
  bool hess_ok = false;
  Eigen::MatrixXd cov_free;
  std::vector<int> free;
  double ll_change = kInf;
  for (int it = 0; it < 30; ++it) {
    free = free_mask(x);
    const Eigen::MatrixXd H = numeric_hessian(obj, x);
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Hf(k, k);
    Eigen::VectorXd gf(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      gf[a] = g[free[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < k; ++b) Hf(a, b) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-Hf);
    hess_ok = ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all();
    if (!hess_ok) break;
    cov_free = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    if (gf.cwiseAbs().maxCoeff() < 1e-8) break;
    const Eigen::VectorXd step = ldlt.solve(gf);
    double t = 1.0;
    bool moved = false;
    while (t > 1e-4) {
      Eigen::VectorXd xn = x;
      for (Eigen::Index a = 0; a < k; ++a) xn[free[static_cast<std::size_t>(a)]] += t * step[a];
      Eigen::VectorXd gn;
      obj.eval(xn, &gn);
      const double lln = obj.eval(xn, &gn);
      if (std::isfinite(lln) && lln >= ll - 1e-10 * std::abs(ll)) {
        ll_change = std::abs(lln - ll) / (std::abs(ll) + 1e-12);
        x = xn;
        g = gn;
        ll = lln;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }

  const auto k = static_cast<Eigen::Index>(free.size());
  double gmax = 0;
  for (auto j : free) gmax = std::max(gmax, std::abs(g[j]));
  f.beta = x.head(pp);
  f.theta = obj.theta_of(x);
  if (obj.has_theta() && x[obj.theta_index()] > kLogThetaMax - 2) f.theta = kInf;
  f.sigma2 = obj.sigma2_of(x);
  if (obj.random() && x[obj.sigma_index()] < kLogSigma2Min + 5) f.sigma2 = 0.0;
  f.loglik = ll;
  f.random_effects = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.groups()));
  if (obj.random())
    for (std::size_t gi = 0; gi < obj.modes().size(); ++gi) f.random_effects[static_cast<Eigen::Index>(gi)] = obj.modes()[gi];
  f.mu.resize(static_cast<Eigen::Index>(d.n()));
  const Eigen::VectorXd eta = d.X * f.beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    f.mu[i] = std::exp(eta[i] + f.random_effects[d.group[static_cast<std::size_t>(i)]]);
  f.se = Eigen::VectorXd::Constant(pp, std::numeric_limits<double>::quiet_NaN());
  if (hess_ok && cov_free.rows() == k) {
    for (Eigen::Index a = 0; a < k; ++a) {
      const int j = free[static_cast<std::size_t>(a)];
      if (j < pp) f.se[j] = std::sqrt(cov_free(a, a));
    }
  }
  f.converged = hess_ok && gmax < 1e-5 && f.se.allFinite() && std::isfinite(ll) &&
                (ll_change < 1e-8 || gmax < 1e-8);
  if (!f.converged)
    f.message = !hess_ok ? "Hessian not negative definite" : "gradient norm " + format_double(gmax) + " above tolerance";
  finish_wald(f);
  return f;
}

// --- inference ---------------------------------------------------------------

double one_sided_p(const FitResult& fit, const std::string& iv, int direction) {
  const int j = fit.index(iv);
  const double se = fit.se[j];
  if (!(se > 0) || !std::isfinite(se)) throw StatsError("no standard error for " + iv);
  const double z = fit.beta[j] / se;
  return normal_upper(direction >= 0 ? z : -z);
}

std::vector<double> bh_adjust(const std::vector<double>& p) {
  const std::size_t m = p.size();
  if (m == 0) throw StatsError("BH adjustment of an empty family");
  for (double v : p)
    if (!(v >= 0 && v <= 1)) throw StatsError("p-value outside [0,1]: " + format_double(v));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double v = static_cast<double>(m) * p[order[r]] / static_cast<double>(r + 1);
    running = std::min(running, v);
    adj[order[r]] = std::min(1.0, running);
  }
  return adj;
}

double mean_prediction(const FitResult& fit, const Design& d, int col, std::optional<double> value, double offset) {
  double s = 0;
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    double eta = d.X.row(i).dot(fit.beta) + fit.random_effects[d.group[static_cast<std::size_t>(i)]];
    if (col >= 0) {
      const double x = d.X(i, col);
      const double xn = (value ? *value : x) + offset;
      eta += fit.beta[col] * (xn - x);
    }
    s += std::exp(eta);
  }
  return s / static_cast<double>(d.X.rows());
}

std::map<std::string, EffectSize> effect_sizes(const FitResult& fit, const Design& d) {
  std::map<std::string, EffectSize> out;
  for (std::size_t j = 1; j < d.names.size(); ++j) {
    const int c = static_cast<int>(j);
    EffectSize e;
    e.irr = std::exp(fit.beta[c]);
    if (d.binary[j])
      e.ame = mean_prediction(fit, d, c, 1.0) - mean_prediction(fit, d, c, 0.0);
    else
      e.ame = fit.beta[c] * fit.mu.mean();
    out[d.names[j]] = e;
  }
  return out;
}

FitQuality fit_quality(const FitResult& fit, const FitResult& null_fit) {
  if (null_fit.loglik == 0) throw StatsError("null log-likelihood is zero");
  return {fit.loglik, 1.0 - fit.loglik / null_fit.loglik};
}

std::vector<double> quantile_residuals(const FitResult& fit, const Design& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out;
  out.reserve(d.n());
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double y = d.y[i];
    const double mu = std::max(fit.mu[i], 1e-300);
    double lo, hi;
    if (std::isinf(fit.theta)) {
      boost::math::poisson_distribution<> dist(mu);
      lo = y > 0 ? boost::math::cdf(dist, y - 1) : 0.0;
      hi = boost::math::cdf(dist, y);
    } else {
      boost::math::negative_binomial_distribution<> dist(fit.theta, fit.theta / (fit.theta + mu));
      lo = y > 0 ? boost::math::cdf(dist, y - 1) : 0.0;
      hi = boost::math::cdf(dist, y);
    }
    double u = lo + unif(rng) * (hi - lo);
    u = std::clamp(u, 1e-15, 1 - 1e-15);
    out.push_back(boost::math::quantile(kStdNormal, u));
  }
  return out;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::NotAccepted: return "not_accepted";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict verdict_rule(bool converged, double beta, int direction, double p_bh, double alpha) {
  if (!converged) return Verdict::Inconclusive;
  const bool right_way = direction >= 0 ? beta > 0 : beta < 0;
  return right_way && p_bh < alpha ? Verdict::Accepted : Verdict::NotAccepted;
}

// --- suite -------------------------------------------------------------------

SuiteResult run_hypothesis_suite(const Dataset& data, const SuiteOptions& options) {
  const auto specs = hypothesis_specs();
  SuiteResult out;
  out.rows.resize(specs.size());
  // Null fits depend only on (population, dv).
  std::map<std::pair<Population, std::string>, FitResult> nulls;
  for (const auto& s : specs) {
    const auto key = std::make_pair(s.population, s.dv);
    if (nulls.count(key)) continue;
    try {
      nulls[key] = fit_negbin_random_intercept(null_design(prepare_design(data, s)));
    } catch (const StatsError& e) {
      FitResult f;
      f.message = e.what();
      nulls[key] = f;
    }
  }
  parallel_for(specs.size(), options.workers, [&](std::size_t i) {
    const auto& s = specs[i];
    auto& r = out.rows[i];
    r.spec = s;
    try {
      const auto d = prepare_design(data, s);
      r.n = d.n();
      r.fit = fit_negbin_random_intercept(d);
      r.poisson = fit_poisson(d);
      if (r.poisson.converged) r.dispersion_stat = dispersion_statistic(r.poisson, d);
      const int j = r.fit.index(s.iv);
      r.beta = r.fit.beta[j];
      r.se = r.fit.se[j];
      r.ci_low = r.fit.ci_low[j];
      r.ci_high = r.fit.ci_high[j];
      r.loglik = r.fit.loglik;
      r.converged = r.fit.converged;
      r.message = r.fit.message;
      if (r.converged) {
        r.p_raw = one_sided_p(r.fit, s.iv, s.direction);
        const auto eff = effect_sizes(r.fit, d).at(s.iv);
        r.irr = eff.irr;
        r.ame = eff.ame;
        const auto& nf = nulls.at({s.population, s.dv});
        if (nf.converged) r.mcfadden_r2 = fit_quality(r.fit, nf).mcfadden_r2;
      } else {
        r.p_raw = 1.0;
        r.irr = std::exp(r.beta);
      }
    } catch (const StatsError& e) {
      r.converged = false;
      r.p_raw = 1.0;
      r.message = e.what();
    }
  });
  for (int fam = 1; fam <= 4; ++fam) {
    std::vector<std::size_t> idx;
    std::vector<double> ps;
    for (std::size_t i = 0; i < out.rows.size(); ++i)
      if (out.rows[i].spec.family == fam) {
        idx.push_back(i);
        ps.push_back(out.rows[i].p_raw);
      }
    if (idx.empty()) continue;
    const auto adj = bh_adjust(ps);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto& r = out.rows[idx[k]];
      r.p_bh = adj[k];
      r.verdict = verdict_rule(r.converged, r.beta, r.spec.direction, r.p_bh, options.alpha);
    }
  }
  if (options.residuals) {
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      const auto& r = out.rows[i];
      if (!r.converged) continue;
      out.residuals[r.spec.label()] = quantile_residuals(r.fit, prepare_design(data, r.spec), options.seed + i);
    }
  }
  return out;
}

const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols = {"hypothesis", "dv",     "beta",        "se",          "ci_low",
                                                "ci_high",    "p_raw",  "p_bh",        "irr",         "ame",
                                                "ll",         "mcfadden_r2", "dispersion_stat", "converged",
                                                "accepted",   "verdict", "n"};
  return cols;
}

std::string results_to_csv(const SuiteResult& res) {
  std::string out = csv::row(results_columns());
  for (const auto& r : res.rows)
    out += csv::row({r.spec.id, r.spec.dv, format_double(r.beta), format_double(r.se), format_double(r.ci_low),
                     format_double(r.ci_high), format_double(r.p_raw), format_double(r.p_bh), format_double(r.irr),
                     format_double(r.ame), format_double(r.loglik), format_double(r.mcfadden_r2),
                     format_double(r.dispersion_stat), r.converged ? "true" : "false",
                     r.verdict == Verdict::Accepted ? "true" : "false", std::string(to_string(r.verdict)),
                     std::to_string(r.n)});
  return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v[i]) ? nlohmann::json(v[i]) : nlohmann::json(nullptr));
  return a;
}

nlohmann::json num_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); }

nlohmann::json fit_json(const FitResult& f) {
  return {{"family", f.family},
          {"names", f.names},
          {"beta", vec_json(f.beta)},
          {"se", vec_json(f.se)},
          {"ci_low", vec_json(f.ci_low)},
          {"ci_high", vec_json(f.ci_high)},
          {"theta", num_json(f.theta)},
          {"sigma2", num_json(f.sigma2)},
          {"random_intercept", f.random_intercept},
          {"random_effects", vec_json(f.random_effects)},
          {"loglik", num_json(f.loglik)},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"message", f.message},
          {"warnings", f.warnings}};
}

}  // namespace

std::string results_to_json(const SuiteResult& res) {
  nlohmann::json j;
  j["schema"] = "smellstab.results/1";
  auto fits = nlohmann::json::array();
  for (const auto& r : res.rows) {
    nlohmann::json e = {{"hypothesis", r.spec.id},     {"dv", r.spec.dv},
                        {"iv", r.spec.iv},             {"controls", r.spec.cvs},
                        {"population", r.spec.population == Population::All ? "all" : "non_smelly"},
                        {"family", r.spec.family},     {"n", r.n},
                        {"p_raw", num_json(r.p_raw)},  {"p_bh", num_json(r.p_bh)},
                        {"verdict", std::string(to_string(r.verdict))},
                        {"negbin", fit_json(r.fit)},   {"poisson", fit_json(r.poisson)},
                        {"dispersion_stat", num_json(r.dispersion_stat)}};
    auto it = res.residuals.find(r.spec.label());
    if (it != res.residuals.end()) e["quantile_residuals"] = it->second;
    fits.push_back(std::move(e));
  }
  j["fits"] = std::move(fits);
  return j.dump(2) + "\n";
}

}  // namespace smellstab
