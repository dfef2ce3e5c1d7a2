#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace smellstab {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column-oriented dataset: one entry per class, grouped by project. Column
// names follow the dataset CSV ("IsSmelly", "#SmellFoc", ..., "ChF", "ChS").
struct Dataset {
  std::vector<std::string> project;
  std::vector<std::string> cls;
  std::map<std::string, std::vector<double>> columns;

  std::size_t size() const { return project.size(); }
  const std::vector<double>& column(const std::string& name) const;  // throws StatsError
};

// Reads the dataset CSV written by the pipeline (project, class, observation
// columns, ChF, ChS, lineage_status). Non-numeric columns other than project
// and class are ignored.
Dataset dataset_from_csv(std::string_view text);

enum class Population { All, NonSmelly };

struct ModelSpec {
  std::string id;  // "H1.1"
  std::string dv;  // "ChF" or "ChS"
  std::string iv;
  std::vector<std::string> cvs;
  Population population = Population::All;
  int direction = 1;  // predicted sign of the IV coefficient
  int family = 1;     // research question

  std::string label() const { return id + "^" + dv; }
};

// The 17 hypotheses times both outcomes, in report order.
std::vector<ModelSpec> hypothesis_specs();

// Count-based predictors that enter as log(1 + x).
bool is_log_transformed(const std::string& variable);
// Binary flags that enter untransformed.
bool is_binary(const std::string& variable);

struct Design {
  std::string label;
  Eigen::VectorXd y;
  Eigen::MatrixXd X;  // column 0 is the intercept
  std::vector<std::string> names;  // "(Intercept)", then predictors
  std::vector<bool> binary;
  std::vector<int> group;  // 0-based project index per row
  std::vector<std::string> group_names;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t groups() const { return group_names.size(); }
  int column(const std::string& name) const;  // -1 when absent
};

// Builds the design for a spec; throws StatsError when the population is empty.
Design prepare_design(const Dataset& data, const ModelSpec& spec);
// Intercept-only design on the same rows and response.
Design null_design(const Design& d);

struct FitResult {
  std::string family;  // "poisson" or "negbin"
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  double theta = 0;   // NB2 dispersion (variance mu + mu^2 / theta); infinity for Poisson
  double sigma2 = 0;  // random-intercept variance, 0 without random effect
  bool random_intercept = false;
  Eigen::VectorXd random_effects;  // conditional modes per group
  Eigen::VectorXd mu;              // conditional fitted means per row
  double loglik = 0;
  bool converged = false;
  int iterations = 0;
  std::string message;
  std::vector<std::string> warnings;

  int index(const std::string& name) const;  // throws StatsError when absent
};

// Poisson GLM with log link by iteratively reweighted least squares.
FitResult fit_poisson(const Design& d, int max_iter = 500);

// Pearson chi-square over residual degrees of freedom; throws when df <= 0.
double dispersion_statistic(const FitResult& fit, const Design& d);

struct NegBinOptions {
  bool random_intercept = true;        // single-project designs fall back to a fixed intercept
  std::optional<double> fixed_theta;   // hold the dispersion fixed
  int max_iter = 500;
};

// NB2 GLMM with a per-project random intercept, marginal likelihood by the
// Laplace approximation, maximized by BFGS with analytic gradients followed by
// Newton polishing. Converged means gradient inf-norm < 1e-5 with a negative
// definite Hessian.
FitResult fit_negbin_random_intercept(const Design& d, const NegBinOptions& options = {});

// Laplace log-likelihood and its analytic gradient at
// params = [beta..., log theta (unless fixed), log sigma2 (if random)].
double negbin_laplace_loglik(const Design& d, const Eigen::VectorXd& params, Eigen::VectorXd* grad,
                             const NegBinOptions& options = {});

// Wald normal tail probability of beta/se in the predicted direction.
double one_sided_p(const FitResult& fit, const std::string& iv, int direction);

// Benjamini-Hochberg step-up adjustment, returned in input order.
std::vector<double> bh_adjust(const std::vector<double>& p);

struct EffectSize {
  double irr = 1;
  double ame = 0;
};

// IRR = exp(beta); AME from conditional fitted means: beta * mean(mu) for
// continuous predictors, mean(mu(x=1) - mu(x=0)) for binary ones.
std::map<std::string, EffectSize> effect_sizes(const FitResult& fit, const Design& d);
// Mean conditional prediction with column `col` of X replaced by `value` + offset.
double mean_prediction(const FitResult& fit, const Design& d, int col, std::optional<double> value, double offset = 0);

struct FitQuality {
  double loglik = 0;
  double mcfadden_r2 = 0;
};

FitQuality fit_quality(const FitResult& fit, const FitResult& null_fit);

// Randomized quantile residuals of an NB fit (Poisson when theta is infinite).
std::vector<double> quantile_residuals(const FitResult& fit, const Design& d, std::uint64_t seed);

enum class Verdict { Accepted, NotAccepted, Inconclusive };
std::string_view to_string(Verdict v);

// accepted iff converged, beta in the predicted direction and p_bh < alpha.
Verdict verdict_rule(bool converged, double beta, int direction, double p_bh, double alpha = 0.05);

struct HypothesisResult {
  ModelSpec spec;
  std::size_t n = 0;
  double beta = 0, se = 0, ci_low = 0, ci_high = 0;
  double p_raw = 1, p_bh = 1;
  double irr = 1, ame = 0;
  double loglik = 0, mcfadden_r2 = 0;
  double dispersion_stat = 0;
  bool converged = false;
  Verdict verdict = Verdict::Inconclusive;
  std::string message;
  FitResult fit;
  FitResult poisson;
};

struct SuiteOptions {
  unsigned workers = 1;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  bool residuals = false;  // attach randomized quantile residuals to the archive
};

struct SuiteResult {
  std::vector<HypothesisResult> rows;  // hypothesis_specs() order
  std::map<std::string, std::vector<double>> residuals;  // label -> residuals
};

SuiteResult run_hypothesis_suite(const Dataset& data, const SuiteOptions& options = {});

const std::vector<std::string>& results_columns();
std::string results_to_csv(const SuiteResult& r);
std::string results_to_json(const SuiteResult& r);

}  // namespace smellstab
