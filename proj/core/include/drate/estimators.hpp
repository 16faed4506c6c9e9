#pragma once

#include <exception>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drate/data.hpp"
#include "drate/design.hpp"
#include "drate/kernel.hpp"

namespace drate {

/// Fitted (or oracle) nuisance functions for one estimator.
struct NuisanceFit {
  CovariateFunction propensity;
  CovariateFunction m1;
  CovariateFunction m0;
  Backend propensity_backend = Backend::Parametric;
  Backend regression_backend = Backend::Parametric;
  std::int64_t clip_count = 0;

  EstimatorId estimator() const {
    return EstimatorId::from_backends(propensity_backend, regression_backend);
  }
};

/// Nuisance values at the sample rows.
struct NuisanceValues {
  Vector propensity;
  Vector m1;
  Vector m0;
  std::int64_t clipped = 0;
};

/// Evaluates a NuisanceFit at every row; throws FitError(NonFinite) naming
/// the first row with a non-finite output.
NuisanceValues evaluate_at_sample(const ObservationSet& obs, const NuisanceFit& fit);

struct AipwTerms {
  double theta1 = 0.0;
  double theta0 = 0.0;
  double delta = 0.0;
};

/// theta1 = mean[d y / p + (1 - d / p) m1], theta0 its mirror, both
/// accumulated in row order with compensated summation.
AipwTerms aipw(const ObservationSet& obs, const NuisanceValues& values);

double theta1_hat(const ObservationSet& obs, const NuisanceFit& fit);
double theta0_hat(const ObservationSet& obs, const NuisanceFit& fit);

struct EstimationOptions {
  /// Required by any estimator with a semiparametric backend.
  std::optional<IndexDirections> directions;
  KernelSettings kernels;
  DesignSpec propensity_design;
  DesignSpec regression_design;
  double clip = kDefaultClip;
  /// In-sample kernel matrices are cached up to this sample size; larger
  /// samples are evaluated one query at a time.
  Index max_cached_kernel = 3000;
};

/// Fits the two nuisances selected by `estimator` and returns
/// delta_hat = theta1_hat - theta0_hat. Fit errors are rethrown with the
/// failing nuisance named.
EstimateResult dr_estimate(const ObservationSet& obs, EstimatorId estimator,
                           const EstimationOptions& options);

/// Outcome of one estimator inside a sweep.
struct SweepEntry {
  EstimatorId estimator;
  std::optional<EstimateResult> result;
  std::string error;
  std::exception_ptr failure;
};

/// Evaluates several estimators on one sample, fitting each backend once.
/// Failures of one backend only affect the estimators that use it.
std::vector<SweepEntry> dr_estimate_sweep(const ObservationSet& obs,
                                          std::span<const EstimatorId> estimators,
                                          const EstimationOptions& options);

/// AIPW with caller-supplied nuisances, no fitting and no clipping.
EstimateResult dr_estimate_with_oracle(const ObservationSet& obs, const CovariateFunction& p,
                                       const CovariateFunction& m1, const CovariateFunction& m0);

}  // namespace drate
