#include "drate/kernel.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <utility>

#include "drate/error.hpp"
#include "drate/numeric.hpp"

namespace drate {

namespace {

constexpr double kSingleIndexExponent = -0.3;

double univariate_normalizer(double h) { return 1.0 / (h * std::sqrt(2.0 * std::numbers::pi)); }

double product_normalizer(double h, Index p) {
  return std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(p)) *
         std::pow(h, -static_cast<double>(p));
}

// Both weight helpers are symmetric in their arguments bit for bit, which
// InSampleKernel relies on.
inline double index_weight(double u, double v, double h, double normalizer) {
  const double t = (u - v) / h;
  return normalizer * std::exp(-0.5 * t * t);
}

inline double product_weight(const double* a, const double* b, Index p, double h,
                             double normalizer) {
  double d2 = 0.0;
  for (Index k = 0; k < p; ++k) {
    const double diff = a[k] - b[k];
    d2 += diff * diff;
  }
  return normalizer * std::exp(-0.5 * d2 / (h * h));
}

void require_unit(const Vector& direction, Index p) {
  if (direction.size() != p) {
    throw DataError("index direction has length " + std::to_string(direction.size()) +
                    ", covariates have " + std::to_string(p));
  }
  if (std::abs(direction.norm() - 1.0) > 1e-10) {
    throw DataError("index direction must have unit norm");
  }
}

void require_positive_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ConfigError("bandwidth must be positive and finite, got " + std::to_string(h));
  }
}

struct ArmSelection {
  std::vector<Index> members;
  double mean = 0.0;
};

ArmSelection select_arm(const ObservationSet& obs, Arm arm) {
  ArmSelection sel;
  CompensatedSum sum;
  for (Index i = 0; i < obs.size(); ++i) {
    if (obs.treated(i) == (arm == Arm::Treated)) {
      sel.members.push_back(i);
      sum.add(obs.outcomes()[i]);
    }
  }
  if (sel.members.empty()) {
    throw FitError(FitError::Kind::EmptyArm,
                   std::string("kernel regression: the ") + to_string(arm) + " arm is empty");
  }
  sel.mean = sum.value() / static_cast<double>(sel.members.size());
  return sel;
}

KernelPrediction finish_prediction(double numerator, double denominator, double fallback,
                                   bool is_propensity, double clip) {
  KernelPrediction out;
  if (denominator < kUnderflowThreshold) {
    out.value = fallback;
    out.fallback = true;
  } else {
    out.value = numerator / denominator;
  }
  if (is_propensity) {
    if (out.value < clip) {
      out.value = clip;
      out.clipped = true;
    } else if (out.value > 1.0 - clip) {
      out.value = 1.0 - clip;
      out.clipped = true;
    }
  }
  return out;
}

}  // namespace

KernelType kernel_type(KernelRole role) {
  return is_single_index(role) ? KernelType::GaussianUnivariate : KernelType::GaussianProduct;
}

bool is_single_index(KernelRole role) {
  return role == KernelRole::PropensityIndex || role == KernelRole::TreatedIndex ||
         role == KernelRole::ControlIndex;
}

double resolve_bandwidth(const KernelConfig& config, double scale, Index n, Index p) {
  double h = 0.0;
  if (const auto* fixed = std::get_if<FixedBandwidth>(&config.rule)) {
    h = fixed->h;
  } else {
    const double c = std::get<RuleOfThumb>(config.rule).c;
    if (!(c > 0.0)) throw ConfigError("rule-of-thumb constant must be positive");
    if (n < 2) throw ConfigError("bandwidth rule needs n >= 2");
    if (!(scale > 0.0)) throw ConfigError("smoothing scale must be positive");
    const double exponent = is_single_index(config.role)
                                ? kSingleIndexExponent
                                : -1.0 / (static_cast<double>(p) + 4.0);
    h = c * scale * std::pow(static_cast<double>(n), exponent);
  }
  require_positive_bandwidth(h);
  return h;
}

double multivariate_scale(const Matrix& covariates) {
  double log_sum = 0.0;
  for (Index j = 0; j < covariates.cols(); ++j) {
    const Vector col = covariates.col(j);
    log_sum += std::log(sample_sd(std::span<const double>(col.data(), col.size())));
  }
  return std::exp(log_sum / static_cast<double>(covariates.cols()));
}

InSampleKernel InSampleKernel::index(const Vector& projected, double bandwidth) {
  require_positive_bandwidth(bandwidth);
  const Index n = projected.size();
  InSampleKernel k(n, bandwidth, KernelType::GaussianUnivariate);
  const double norm = univariate_normalizer(bandwidth);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double w = index_weight(projected[i], projected[j], bandwidth, norm);
      k.weights_[static_cast<std::size_t>(i * n + j)] = w;
      k.weights_[static_cast<std::size_t>(j * n + i)] = w;
    }
  }
  return k;
}

InSampleKernel InSampleKernel::multivariate(const Matrix& covariates, double bandwidth) {
  require_positive_bandwidth(bandwidth);
  const Index n = covariates.rows();
  const Index p = covariates.cols();
  const Matrix t = covariates.transpose();
  InSampleKernel k(n, bandwidth, KernelType::GaussianProduct);
  const double norm = product_normalizer(bandwidth, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double w = product_weight(t.col(i).data(), t.col(j).data(), p, bandwidth, norm);
      k.weights_[static_cast<std::size_t>(i * n + j)] = w;
      k.weights_[static_cast<std::size_t>(j * n + i)] = w;
    }
  }
  return k;
}

SemiparFit SemiparFit::propensity(const ObservationSet& obs, Vector direction, double bandwidth,
                                  double clip) {
  require_unit(direction, obs.dimension());
  require_positive_bandwidth(bandwidth);
  if (obs.size() < 1) throw DataError("kernel propensity needs n >= 1");
  SemiparFit fit;
  fit.projected_ = obs.covariates() * direction;
  fit.direction_ = std::move(direction);
  fit.members_.resize(static_cast<std::size_t>(obs.size()));
  for (Index i = 0; i < obs.size(); ++i) fit.members_[static_cast<std::size_t>(i)] = i;
  fit.response_ = obs.treatments().cast<double>();
  fit.fallback_ = static_cast<double>(obs.arm_size(Arm::Treated)) / static_cast<double>(obs.size());
  fit.bandwidth_ = bandwidth;
  fit.clip_ = clip;
  fit.target_ = SmoothingTarget::Propensity;
  return fit;
}

SemiparFit SemiparFit::regression(const ObservationSet& obs, Vector direction, Arm arm,
                                  double bandwidth) {
  require_unit(direction, obs.dimension());
  require_positive_bandwidth(bandwidth);
  auto sel = select_arm(obs, arm);
  SemiparFit fit;
  fit.projected_ = obs.covariates() * direction;
  fit.direction_ = std::move(direction);
  fit.members_ = std::move(sel.members);
  fit.response_ = obs.outcomes();
  fit.fallback_ = sel.mean;
  fit.bandwidth_ = bandwidth;
  fit.target_ = arm == Arm::Treated ? SmoothingTarget::TreatedRegression
                                    : SmoothingTarget::ControlRegression;
  return fit;
}

KernelPrediction SemiparFit::finish(double numerator, double denominator) const {
  return finish_prediction(numerator, denominator, fallback_,
                           target_ == SmoothingTarget::Propensity, clip_);
}

KernelPrediction SemiparFit::predict_index(double t) const {
  const double norm = univariate_normalizer(bandwidth_);
  double num = 0.0;
  double den = 0.0;
  for (Index j : members_) {
    const double w = index_weight(t, projected_[j], bandwidth_, norm);
    num += response_[j] * w;
    den += w;
  }
  return finish(num, den);
}

KernelPrediction SemiparFit::predict(const ConstVectorRef& x) const {
  if (x.size() != direction_.size()) throw DataError("query has wrong dimension");
  return predict_index(x.dot(direction_));
}

std::vector<KernelPrediction> SemiparFit::predict_in_sample(const InSampleKernel& kernel) const {
  if (kernel.size() != projected_.size() || kernel.bandwidth() != bandwidth_ ||
      kernel.type() != KernelType::GaussianUnivariate) {
    throw ConfigError("in-sample kernel does not match the fit");
  }
  std::vector<KernelPrediction> out(static_cast<std::size_t>(kernel.size()));
  for (Index i = 0; i < kernel.size(); ++i) {
    const double* w = kernel.row(i);
    double num = 0.0;
    double den = 0.0;
    for (Index j : members_) {
      num += response_[j] * w[j];
      den += w[j];
    }
    out[static_cast<std::size_t>(i)] = finish(num, den);
  }
  return out;
}

NonparFit NonparFit::propensity(const ObservationSet& obs, double bandwidth, double clip) {
  require_positive_bandwidth(bandwidth);
  if (obs.size() < 1) throw DataError("kernel propensity needs n >= 1");
  NonparFit fit;
  fit.train_t_ = obs.covariates().transpose();
  fit.members_.resize(static_cast<std::size_t>(obs.size()));
  for (Index i = 0; i < obs.size(); ++i) fit.members_[static_cast<std::size_t>(i)] = i;
  fit.response_ = obs.treatments().cast<double>();
  fit.fallback_ = static_cast<double>(obs.arm_size(Arm::Treated)) / static_cast<double>(obs.size());
  fit.bandwidth_ = bandwidth;
  fit.normalizer_ = product_normalizer(bandwidth, obs.dimension());
  fit.clip_ = clip;
  fit.target_ = SmoothingTarget::Propensity;
  return fit;
}

NonparFit NonparFit::regression(const ObservationSet& obs, Arm arm, double bandwidth) {
  require_positive_bandwidth(bandwidth);
  auto sel = select_arm(obs, arm);
  NonparFit fit;
  fit.train_t_ = obs.covariates().transpose();
  fit.members_ = std::move(sel.members);
  fit.response_ = obs.outcomes();
  fit.fallback_ = sel.mean;
  fit.bandwidth_ = bandwidth;
  fit.normalizer_ = product_normalizer(bandwidth, obs.dimension());
  fit.target_ = arm == Arm::Treated ? SmoothingTarget::TreatedRegression
                                    : SmoothingTarget::ControlRegression;
  return fit;
}

KernelPrediction NonparFit::finish(double numerator, double denominator) const {
  return finish_prediction(numerator, denominator, fallback_,
                           target_ == SmoothingTarget::Propensity, clip_);
}

KernelPrediction NonparFit::predict(const ConstVectorRef& x) const {
  const Index p = train_t_.rows();
  if (x.size() != p) throw DataError("query has wrong dimension");
  const Vector query = x;
  double num = 0.0;
  double den = 0.0;
  for (Index j : members_) {
    const double w = product_weight(query.data(), train_t_.col(j).data(), p, bandwidth_,
                                    normalizer_);
    num += response_[j] * w;
    den += w;
  }
  return finish(num, den);
}

std::vector<KernelPrediction> NonparFit::predict_in_sample(const InSampleKernel& kernel) const {
  if (kernel.size() != train_t_.cols() || kernel.bandwidth() != bandwidth_ ||
      kernel.type() != KernelType::GaussianProduct) {
    throw ConfigError("in-sample kernel does not match the fit");
  }
  std::vector<KernelPrediction> out(static_cast<std::size_t>(kernel.size()));
  for (Index i = 0; i < kernel.size(); ++i) {
    const double* w = kernel.row(i);
    double num = 0.0;
    double den = 0.0;
    for (Index j : members_) {
      num += response_[j] * w[j];
      den += w[j];
    }
    out[static_cast<std::size_t>(i)] = finish(num, den);
  }
  return out;
}

}  // namespace drate
