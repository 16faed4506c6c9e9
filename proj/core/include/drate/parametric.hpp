#pragma once

#include <nlohmann/json_fwd.hpp>

#include "drate/data.hpp"

namespace drate {

/// Newton-Raphson controls for the logistic MLE.
struct NewtonOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 30;
  /// An iterate with sup-norm above this has no finite maximizer in sight.
  double separation_bound = 1e4;
};

struct LogisticFit {
  Vector beta_hat;
  /// Observed information sum_i p_i (1 - p_i) x_i x_i' at beta_hat.
  Matrix information;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;

  /// p(x; beta_hat); x must already be a design row.
  double predict(const ConstVectorRef& x) const;
};

/// Logistic MLE of `target` on `design` (no implicit intercept).
/// Throws FitError on a constant target, separation or a singular
/// information matrix.
LogisticFit fit_logistic(const Matrix& design, const IntVector& target,
                         const NewtonOptions& options = {});

/// Propensity fit of the treatments on the raw covariates.
LogisticFit fit_logistic(const ObservationSet& obs, const NewtonOptions& options = {});

/// Score sum_i x_i (d_i - p(x_i; beta)).
Vector logistic_score(const Matrix& design, const IntVector& target, const Vector& beta);

struct LinearFit {
  Vector gamma_hat;
  /// RSS / n_arm.
  double sigma2_hat = 0.0;
  Arm arm = Arm::Treated;
  Index n_arm = 0;

  double predict(const ConstVectorRef& x) const { return x.dot(gamma_hat); }
};

/// Least squares of the arm's outcomes on its design rows via
/// column-pivoted QR. Throws FitError if the arm has fewer than p rows or
/// is rank deficient.
LinearFit fit_linear(const Matrix& design, const IntVector& treatments, const Vector& outcomes,
                     Arm arm);

LinearFit fit_linear(const ObservationSet& obs, Arm arm);

void to_json(nlohmann::json& j, const LogisticFit& fit);
void to_json(nlohmann::json& j, const LinearFit& fit);

/// Named perturbation shapes s(x) for local misspecification.
enum class Perturbation {
  Sine,         ///< sin(x1)
  Square,       ///< x1^2
  TanhProduct,  ///< tanh(x1 x2)
  Unit,         ///< 1
};

double evaluate_perturbation(Perturbation s, const ConstVectorRef& x);
const char* to_string(Perturbation s);
/// Throws ConfigError on an unknown name.
Perturbation perturbation_from_string(const std::string& name);

enum class MisspecMode { None, GlobalZ, LocalPS, LocalOR };

struct MisspecSpec {
  MisspecMode mode = MisspecMode::None;
  double delta = 0.0;
  Perturbation s = Perturbation::Sine;
};

/// LocalPS: x -> truth(x) (1 + delta s(x)); the returned function throws
/// FitError(OutOfRange) wherever that leaves (clip, 1 - clip).
/// LocalOR: x -> truth(x) + delta s(x).
/// Throws ConfigError for the other modes.
CovariateFunction apply_local_misspec(CovariateFunction truth, const MisspecSpec& spec,
                                      double clip = kDefaultClip);

}  // namespace drate
