#pragma once

// Simulators for count-regression oracles: NB2 / Poisson responses with a
// project random intercept, and whole observation datasets for the
// hypothesis suite.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "smellstab/stats.hpp"

namespace smellstab::testing {

inline constexpr double kPoissonTheta = std::numeric_limits<double>::infinity();

// NB2 draw by the gamma-Poisson mixture; theta = infinity gives Poisson.
inline double draw_count(std::mt19937_64& rng, double mu, double theta) {
  if (std::isinf(theta)) return static_cast<double>(std::poisson_distribution<long>(mu)(rng));
  const double lambda = std::gamma_distribution<double>(theta, mu / theta)(rng);
  if (lambda <= 0) return 0.0;
  return static_cast<double>(std::poisson_distribution<long>(lambda)(rng));
}

// Design with an intercept and standard-normal covariates; beta includes the
// intercept.
inline Design simulate_design(std::mt19937_64& rng, int groups, int per_group, const std::vector<double>& beta,
                              double sigma2, double theta) {
  Design d;
  const int n = groups * per_group;
  const auto p = static_cast<Eigen::Index>(beta.size());
  d.X.resize(n, p);
  d.y.resize(n);
  d.names = {"(Intercept)"};
  d.binary = {false};
  for (Eigen::Index j = 1; j < p; ++j) {
    d.names.push_back("x" + std::to_string(j));
    d.binary.push_back(false);
  }
  std::normal_distribution<double> z(0.0, 1.0);
  for (int g = 0; g < groups; ++g) d.group_names.push_back("g" + std::to_string(100 + g));
  int r = 0;
  for (int g = 0; g < groups; ++g) {
    const double b = sigma2 > 0 ? std::sqrt(sigma2) * z(rng) : 0.0;
    for (int k = 0; k < per_group; ++k, ++r) {
      double eta = beta[0] + b;
      d.X(r, 0) = 1.0;
      for (Eigen::Index j = 1; j < p; ++j) {
        d.X(r, j) = z(rng);
        eta += beta[static_cast<std::size_t>(j)] * d.X(r, j);
      }
      d.y[r] = draw_count(rng, std::exp(eta), theta);
      d.group.push_back(g);
    }
  }
  return d;
}

struct SuiteSim {
  int projects = 8;
  int classes = 60;
  double theta_chf = 1.5;
  double theta_chs = 0.8;
  double sigma2 = 0.25;
  double planted_smellfoc_chf = 0.0;  // coefficient on log(1 + #SmellFoc) for ChF
};

// Observation dataset whose outcomes depend only on ClSize, #EffNei and the
// project intercept (plus an optional planted #SmellFoc effect on ChF). The
// smell columns respect the structural implications of the real data.
inline Dataset simulate_suite_dataset(std::mt19937_64& rng, const SuiteSim& s) {
  Dataset d;
  for (const char* c : {"IsSmelly", "#SmellFoc", "VarSmellFoc", "HasSmellEff", "#SmellEff", "VarSmellEff",
                        "HasEffCoup", "HasEffInt", "#EffSmellInt", "EffIntInten", "ClSize", "#EffNei", "ChF", "ChS"})
    d.columns[c];
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int g = 0; g < s.projects; ++g) {
    const double b_f = std::sqrt(s.sigma2) * z(rng);
    const double b_s = std::sqrt(s.sigma2) * z(rng);
    for (int k = 0; k < s.classes; ++k) {
      const double size = std::round(std::exp(3.5 + 0.8 * z(rng)));
      const double nei = static_cast<double>(std::poisson_distribution<int>(3.0)(rng));
      const double foc = u01(rng) < 0.6 ? 0.0 : 1.0 + static_cast<double>(std::poisson_distribution<int>(1.0)(rng));
      const double var_foc = foc == 0 ? 0.0 : 1.0 + std::floor(u01(rng) * foc);
      const double eff = nei == 0 ? 0.0 : static_cast<double>(std::poisson_distribution<int>(0.6 * nei)(rng));
      const double var_eff = eff == 0 ? 0.0 : 1.0 + std::floor(u01(rng) * std::min(eff, 4.0));
      const bool coup = foc > 0 && eff > 0;
      const double pairs = coup && u01(rng) < 0.5 ? 1.0 + static_cast<double>(std::poisson_distribution<int>(1.0)(rng)) : 0.0;
      const double inten = pairs == 0 ? 0.0 : pairs + static_cast<double>(std::poisson_distribution<int>(1.5)(rng));
      d.project.push_back("proj" + std::to_string(100 + g));
      d.cls.push_back("C" + std::to_string(k));
      d.columns["IsSmelly"].push_back(foc > 0);
      d.columns["#SmellFoc"].push_back(foc);
      d.columns["VarSmellFoc"].push_back(var_foc);
      d.columns["HasSmellEff"].push_back(eff > 0);
      d.columns["#SmellEff"].push_back(eff);
      d.columns["VarSmellEff"].push_back(var_eff);
      d.columns["HasEffCoup"].push_back(coup);
      d.columns["HasEffInt"].push_back(pairs > 0);
      d.columns["#EffSmellInt"].push_back(pairs);
      d.columns["EffIntInten"].push_back(inten);
      d.columns["ClSize"].push_back(size);
      d.columns["#EffNei"].push_back(nei);
      const double eta_f = -1.0 + 0.35 * std::log1p(size) + 0.2 * std::log1p(nei) + b_f +
                           s.planted_smellfoc_chf * std::log1p(foc);
      const double eta_s = 0.5 + 0.5 * std::log1p(size) + 0.1 * std::log1p(nei) + b_s;
      d.columns["ChF"].push_back(draw_count(rng, std::exp(eta_f), s.theta_chf));
      d.columns["ChS"].push_back(draw_count(rng, std::exp(eta_s), s.theta_chs));
    }
  }
  return d;
}

}  // namespace smellstab::testing
