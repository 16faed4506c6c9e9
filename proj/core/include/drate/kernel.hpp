#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "drate/data.hpp"

namespace drate {

/// Kernel denominators below this fall back to the unweighted arm mean
/// (regressions) or the global treated fraction (propensity).
inline constexpr double kUnderflowThreshold = 1e-300;

enum class KernelType {
  GaussianUnivariate,  ///< (2 pi)^(-1/2) exp(-t^2 / 2) on a projected index
  GaussianProduct,     ///< (2 pi)^(-p/2) exp(-|t|^2 / 2) on the full covariate vector
};

enum class KernelRole {
  PropensityIndex,         ///< b
  TreatedIndex,            ///< h_{m1}
  ControlIndex,            ///< h_{m0}
  PropensityMultivariate,  ///< b~
  RegressionMultivariate,  ///< h~ (both arms)
};

KernelType kernel_type(KernelRole role);
bool is_single_index(KernelRole role);

/// h = c * scale * n^(-0.3) for single-index roles and
/// h = c * scale * n^(-1/(p+4)) for multivariate roles.
struct RuleOfThumb {
  double c = 1.0;
};

struct FixedBandwidth {
  double h = 0.0;
};

using BandwidthRule = std::variant<RuleOfThumb, FixedBandwidth>;

struct KernelConfig {
  KernelRole role = KernelRole::PropensityIndex;
  BandwidthRule rule = RuleOfThumb{};

  KernelType kernel() const { return kernel_type(role); }
};

/// Bandwidth configuration for every kernel-based nuisance.
struct KernelSettings {
  KernelConfig propensity_index{KernelRole::PropensityIndex};
  KernelConfig treated_index{KernelRole::TreatedIndex};
  KernelConfig control_index{KernelRole::ControlIndex};
  KernelConfig propensity_multivariate{KernelRole::PropensityMultivariate};
  KernelConfig regression_multivariate{KernelRole::RegressionMultivariate};
};

/// Throws ConfigError if the resolved bandwidth is not positive (or if a
/// rule-of-thumb constant is not positive, n < 2, or scale <= 0).
double resolve_bandwidth(const KernelConfig& config, double scale, Index n, Index p);

/// Geometric mean of the per-column sample standard deviations.
double multivariate_scale(const Matrix& covariates);

struct KernelPrediction {
  double value = 0.0;
  bool clipped = false;
  bool fallback = false;
};

enum class SmoothingTarget { Propensity, TreatedRegression, ControlRegression };

/// Symmetric matrix of kernel weights between all pairs of training rows,
/// for evaluating a fit at its own sample. Entry (i, j) is bit-identical to
/// the weight a single-query prediction at x_i assigns to x_j.
class InSampleKernel {
 public:
  static InSampleKernel index(const Vector& projected, double bandwidth);
  static InSampleKernel multivariate(const Matrix& covariates, double bandwidth);

  Index size() const { return n_; }
  double bandwidth() const { return bandwidth_; }
  KernelType type() const { return type_; }
  const double* row(Index i) const { return weights_.data() + i * n_; }

 private:
  InSampleKernel(Index n, double bandwidth, KernelType type)
      : n_(n), bandwidth_(bandwidth), type_(type), weights_(static_cast<std::size_t>(n * n)) {}

  Index n_;
  double bandwidth_;
  KernelType type_;
  std::vector<double> weights_;
};

/// Nadaraya-Watson smoother on a single index direction'x.
///
/// Propensity: sum_j d_j L_b / sum_j L_b over all rows, clipped to
/// [clip, 1 - clip]. Regression: sum_j y_j K_h / sum_j K_h over the rows of
/// one arm. Training rows stay in their own sums.
class SemiparFit {
 public:
  static SemiparFit propensity(const ObservationSet& obs, Vector direction, double bandwidth,
                               double clip = kDefaultClip);
  /// Throws FitError if the arm is empty.
  static SemiparFit regression(const ObservationSet& obs, Vector direction, Arm arm,
                               double bandwidth);

  KernelPrediction predict(const ConstVectorRef& x) const;
  KernelPrediction predict_index(double t) const;
  /// Predictions at every training row, reusing `kernel`, which must have
  /// been built from `projected_train()` with `bandwidth()`.
  std::vector<KernelPrediction> predict_in_sample(const InSampleKernel& kernel) const;

  const Vector& direction() const { return direction_; }
  const Vector& projected_train() const { return projected_; }
  double bandwidth() const { return bandwidth_; }
  SmoothingTarget target() const { return target_; }

 private:
  SemiparFit() = default;
  KernelPrediction finish(double numerator, double denominator) const;

  Vector direction_;
  Vector projected_;
  /// Rows entering the sums: every row for the propensity, the arm's rows
  /// for a regression.
  std::vector<Index> members_;
  /// d_j for the propensity, y_j for a regression, indexed like projected_.
  Vector response_;
  double fallback_ = 0.0;
  double bandwidth_ = 0.0;
  double clip_ = kDefaultClip;
  SmoothingTarget target_ = SmoothingTarget::Propensity;
};

/// Nadaraya-Watson smoother with a Gaussian product kernel on the full
/// covariate vector; same contracts as SemiparFit.
class NonparFit {
 public:
  static NonparFit propensity(const ObservationSet& obs, double bandwidth,
                              double clip = kDefaultClip);
  static NonparFit regression(const ObservationSet& obs, Arm arm, double bandwidth);

  KernelPrediction predict(const ConstVectorRef& x) const;
  std::vector<KernelPrediction> predict_in_sample(const InSampleKernel& kernel) const;

  double bandwidth() const { return bandwidth_; }
  SmoothingTarget target() const { return target_; }

 private:
  NonparFit() = default;
  KernelPrediction finish(double numerator, double denominator) const;

  /// p x n, so each training row is a contiguous column.
  Matrix train_t_;
  std::vector<Index> members_;
  Vector response_;
  double fallback_ = 0.0;
  double bandwidth_ = 0.0;
  double normalizer_ = 0.0;
  double clip_ = kDefaultClip;
  SmoothingTarget target_ = SmoothingTarget::Propensity;
};

}  // namespace drate
