#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drate/data.hpp"
#include "drate/estimators.hpp"
#include "drate/rng.hpp"

namespace drate {

/// A data-generating process with known nuisances, for Monte Carlo
/// evaluation of population quantities.
struct GenerativeModel {
  std::function<Vector(RandomStream&)> draw_covariates;
  CovariateFunction propensity;
  CovariateFunction m1;
  CovariateFunction m0;
  /// Var[Y(1) | X] and Var[Y(0) | X].
  CovariateFunction var1;
  CovariateFunction var0;
};

enum class VarianceSource { PlugIn, McOracle };

/// The efficiency bound
///   E{ Var[Y(1)|X]/p(X) + Var[Y(0)|X]/(1-p(X)) + [m1(X) - E Y(1) - m0(X) + E Y(0)]^2 }
/// split into its three summands.
struct VarianceReport {
  double sigma1 = 0.0;
  VarianceSource source = VarianceSource::PlugIn;
  std::int64_t n_oracle_draws = 0;
  double ipw1_term = 0.0;
  double ipw0_term = 0.0;
  double heterogeneity_term = 0.0;
  /// Monte Carlo standard error of sigma1; 0 for plug-in reports.
  double standard_error = 0.0;
};

/// Averages the bound's integrand over `draws` fresh covariate draws from
/// a dedicated stream. Throws ConfigError for draws < 1000 and
/// FitError(OutOfRange) if p(X) leaves (0, 1).
VarianceReport sigma1_mc_oracle(const GenerativeModel& truth, std::int64_t draws,
                                std::uint64_t seed);

/// Sample analogue: squared within-arm residuals weighted by 1/p^2
/// (resp. 1/(1-p)^2) and the spread of m1 - m0 around theta1 - theta0.
VarianceReport sigma1_plugin(const ObservationSet& obs, const NuisanceFit& fit);
VarianceReport sigma1_plugin(const ObservationSet& obs, const NuisanceValues& values);

/// p*/g^2 + (1-p*)/(1-g)^2 - 1/p* - 1/(1-p*): the excess variance factor
/// when a constant true propensity p* is modelled by a constant g.
/// Throws ConfigError unless both arguments lie strictly inside (0, 1).
double f_super(double p_star, double g);

/// E{Var[Y(1)|X]} * f_super(p_star, g): the closed-form gap between the
/// misspecified-propensity variance and the bound when both propensities
/// are constant, the arm variances agree and E X = 0.
double sigma4_gap_constant_ps(double p_star, double g, double mean_var_y1);

struct GridSpec {
  double lo = 0.01;
  double hi = 0.99;
  double step = 0.01;

  /// floor((hi - lo) / step) + 1, tolerant to representation error.
  Index count() const;
};

struct CurvePoint {
  double g;
  double f;
};

/// Throws ConfigError if the grid touches {0, 1}, is empty or has a step
/// larger than its span.
std::vector<CurvePoint> curve_emit(double p_star, const GridSpec& grid);

/// CSV with header "g,f", 17 significant digits, LF endings.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

struct VarianceComparison {
  std::int64_t replicates = 0;
  /// Sample variance (divisor R - 1) of sqrt(n) * delta_hat.
  double empirical_variance = 0.0;
  double ratio = 0.0;
  /// Two-sided 95% chi-square interval for the ratio (assumes normal
  /// replicates).
  double ratio_lower = 0.0;
  double ratio_upper = 0.0;
};

/// Throws ConfigError for fewer than 30 replicates or sigma1 <= 0.
VarianceComparison variance_check(std::span<const double> estimates, double sigma1, Index n,
                                  double confidence = 0.95);

void to_json(nlohmann::json& j, const VarianceReport& report);
void to_json(nlohmann::json& j, const VarianceComparison& comparison);

}  // namespace drate
