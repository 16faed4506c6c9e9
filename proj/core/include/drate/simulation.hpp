#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drate/data.hpp"
#include "drate/efficiency.hpp"
#include "drate/error.hpp"
#include "drate/estimators.hpp"
#include "drate/kernel.hpp"
#include "drate/parametric.hpp"

namespace drate {

/// How a nuisance is misspecified in a scenario.
enum class MisspecKind {
  Correct,
  /// Parametric fits on z_transform(x) and single-index fits on the wrong
  /// direction, together (the layout of the published tables).
  Global,
  /// Parametric fits on z_transform(x) only.
  ZOnly,
  /// Single-index fits on the wrong direction only.
  WrongIndex,
  /// The truth itself is perturbed by delta * s(x); every fit is as usual.
  Local,
};

const char* to_string(MisspecKind kind);

struct PropensityMisspec {
  MisspecKind kind = MisspecKind::Correct;
  double delta = 0.0;
  Perturbation s = Perturbation::Sine;
};

struct RegressionMisspec {
  MisspecKind kind = MisspecKind::Correct;
  double delta1 = 0.0;
  double delta0 = 0.0;
  Perturbation s1 = Perturbation::Sine;
  Perturbation s0 = Perturbation::Sine;
};

/// X ~ N(0, I_p); Y(j) = mu_j + beta'X + N(0, 1);
/// D ~ Bernoulli(logistic(alpha'X + s0)) with alpha built from (beta, s1)
/// and s0 calibrated to the requested untreated share.
struct ScenarioConfig {
  Index n = 1000;
  Index p = 10;
  Index reps = 1000;
  std::uint64_t seed = 20220917;
  /// Empty selects (0.5, 0.5, 0.5, 0.5, 0, ..., 0).
  Vector beta;
  double mu1 = 10.0;
  double mu0 = 5.0;
  double s1 = 1.0;
  double target_untreated = 0.5;
  /// Empty selects the default set for the misspecification layout.
  std::vector<EstimatorId> estimators;
  PropensityMisspec ps_misspec;
  RegressionMisspec or_misspec;
  KernelSettings kernels;
  double clip = kDefaultClip;
  Index calibration_draws = 200000;
  /// A run aborts if any estimator fails on more than this share of replicates.
  double max_failure_fraction = 0.05;
};

/// Throws ConfigError on any invariant violation.
void validate(const ScenarioConfig& cfg);

Vector default_beta(Index p);
std::vector<EstimatorId> default_estimators(const PropensityMisspec& ps, const RegressionMisspec& reg);

/// alpha = (beta/|beta| + s1 e_p) / sqrt(1 + s1^2). Throws ConfigError if
/// beta is zero or its last coordinate is not 0.
Vector make_alpha(const Vector& beta, double s1);

double angle_degrees(const Vector& a, const Vector& b);

struct Calibration {
  double s0 = 0.0;
  /// Estimated P(D = 0) at s0 on the calibration draws.
  double untreated = 0.0;
};

/// Bisection on s0 in [-10, 10] against the Monte Carlo mean of
/// 1 - logistic(alpha'X + s0) over `draws` fixed covariate draws.
Calibration calibrate_s0(const Vector& alpha, double target_untreated, Index draws,
                         std::uint64_t seed);

/// Known nuisances at the sampled rows, plus both potential outcomes.
struct OracleTruth {
  Vector propensity;
  Vector m1;
  Vector m0;
  Vector y1;
  Vector y0;
};

struct SimulatedDraw {
  ObservationSet data;
  OracleTruth truth;
};

/// A validated, calibrated scenario.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  const Vector& beta() const { return beta_; }
  const Vector& alpha() const { return alpha_; }
  double s0() const { return calibration_.s0; }
  const Calibration& calibration() const { return calibration_; }
  double true_ate() const { return true_ate_; }

  /// True propensity, including any local perturbation (not range-checked).
  double propensity(const ConstVectorRef& x) const;
  double m1(const ConstVectorRef& x) const;
  double m0(const ConstVectorRef& x) const;

  /// Covariate rows whose locally perturbed propensity leaves
  /// (clip, 1 - clip) are rejected and redrawn; always true otherwise.
  bool admissible(const ConstVectorRef& x) const;

  GenerativeModel generative_model() const;
  EstimationOptions estimation_options() const;
  std::vector<EstimatorId> estimators() const;

  /// Deterministic in (seed, rep_index) and independent across replicates.
  SimulatedDraw draw(Index rep_index, Index n) const;
  SimulatedDraw draw(Index rep_index) const { return draw(rep_index, cfg_.n); }

 private:
  Vector draw_covariates(RandomStream& rng) const;

  ScenarioConfig cfg_;
  Vector beta_;
  Vector alpha_;
  Calibration calibration_;
  double true_ate_ = 0.0;
};

inline SimulatedDraw generate_draw(const Scenario& scenario, Index rep_index) {
  return scenario.draw(rep_index);
}

struct EstimatorSummary {
  EstimatorId estimator{1};
  double bias = 0.0;
  /// Sample standard deviation (divisor R_ok - 1); 0 when R_ok = 1.
  double std = 0.0;
  bool std_defined = false;
  /// Mean of (delta_hat - true ATE)^2.
  double mse = 0.0;
  /// Divisor-R_ok variance, so mse = bias^2 + variance.
  double variance = 0.0;
  Index reps_ok = 0;
  Index reps_failed = 0;
  std::int64_t clips = 0;
  /// Successful estimates in replicate order.
  std::vector<double> estimates;
  std::string first_error;
};

struct McReport {
  ScenarioConfig config;
  Vector alpha;
  double s0 = 0.0;
  double achieved_untreated = 0.0;
  double true_ate = 0.0;
  std::vector<EstimatorSummary> rows;

  const EstimatorSummary& row(EstimatorId id) const;
};

/// Raised when replicate failures exceed the configured share.
class SimulationAborted : public Error {
 public:
  using Error::Error;
};

/// Runs every replicate of the scenario on `jobs` worker threads. The
/// report does not depend on `jobs`.
McReport run_mc(const ScenarioConfig& cfg, unsigned jobs = 1);
McReport run_mc(const Scenario& scenario, unsigned jobs = 1);

/// estimator,bias,std,mse,reps_failed,clips; one row per estimator.
void write_report_csv(std::ostream& out, const McReport& report);

}  // namespace drate
