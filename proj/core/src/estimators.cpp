#include "drate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <span>
#include <utility>

#include "drate/error.hpp"
#include "drate/numeric.hpp"
#include "drate/parametric.hpp"

namespace drate {

namespace {

double treated_term(int d, double y, double p, double m1) {
  return d * y / p + (1.0 - d / p) * m1;
}

double control_term(int d, double y, double p, double m0) {
  return (1 - d) * y / (1.0 - p) + (1.0 - (1 - d) / (1.0 - p)) * m0;
}

void require_finite(const Vector& values, const char* what) {
  for (Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw FitError(FitError::Kind::NonFinite, std::string("non-finite ") + what +
                                                    " value at row " + std::to_string(i));
    }
  }
}

Vector evaluate(const ObservationSet& obs, const CovariateFunction& f, const char* what) {
  if (!f) throw ConfigError(std::string("missing ") + what + " function");
  Vector out(obs.size());
  for (Index i = 0; i < obs.size(); ++i) out[i] = f(obs.covariates().row(i).transpose());
  require_finite(out, what);
  return out;
}

double projected_scale(const Vector& projected) {
  return sample_sd(std::span<const double>(projected.data(), projected.size()));
}

struct PropensitySlot {
  bool ready = false;
  Vector values;
  std::int64_t clipped = 0;
  std::exception_ptr error;
};

struct RegressionSlot {
  bool ready = false;
  Vector m1;
  Vector m0;
  std::exception_ptr error;
};

int slot_of(Backend b) { return static_cast<int>(b); }

/// Per-sample cache of nuisance fits and in-sample kernel matrices.
class BackendCache {
 public:
  BackendCache(const ObservationSet& obs, const EstimationOptions& options)
      : obs_(obs), options_(options) {}

  const PropensitySlot& propensity(Backend b) {
    auto& slot = propensity_[slot_of(b)];
    if (!slot.ready) {
      slot.ready = true;
      try {
        fit_propensity(b, slot);
      } catch (...) {
        slot.error = tagged(std::string("propensity score (") + to_string(b) + ")");
      }
    }
    return slot;
  }

  const RegressionSlot& regression(Backend b) {
    auto& slot = regression_[slot_of(b)];
    if (!slot.ready) {
      slot.ready = true;
      try {
        fit_regression(b, slot);
      } catch (...) {
        slot.error = tagged(std::string("outcome regression (") + to_string(b) + ")");
      }
    }
    return slot;
  }

 private:
  struct CachedIndexKernel {
    Vector direction;
    double bandwidth;
    std::unique_ptr<InSampleKernel> kernel;
  };

  struct CachedProductKernel {
    double bandwidth;
    std::unique_ptr<InSampleKernel> kernel;
  };

  bool use_cache() const { return obs_.size() <= options_.max_cached_kernel; }

  const IndexDirections& directions() const {
    if (!options_.directions) {
      throw ConfigError("semiparametric backends need index directions");
    }
    return *options_.directions;
  }

  // Converts the in-flight exception into one that names the nuisance.
  static std::exception_ptr tagged(const std::string& who) {
    try {
      throw;
    } catch (const FitError& e) {
      return std::make_exception_ptr(FitError(e.kind(), who + ": " + e.what()));
    } catch (const DataError& e) {
      return std::make_exception_ptr(DataError(who + ": " + e.what()));
    } catch (const ConfigError& e) {
      return std::make_exception_ptr(ConfigError(who + ": " + e.what()));
    } catch (const std::exception& e) {
      return std::make_exception_ptr(Error(who + ": " + e.what()));
    }
  }

  const InSampleKernel& index_kernel(const Vector& direction, const Vector& projected, double h) {
    for (const auto& c : index_kernels_) {
      if (c.bandwidth == h && c.direction == direction) return *c.kernel;
    }
    index_kernels_.push_back(
        {direction, h, std::make_unique<InSampleKernel>(InSampleKernel::index(projected, h))});
    return *index_kernels_.back().kernel;
  }

  const InSampleKernel& product_kernel(double h) {
    for (const auto& c : product_kernels_) {
      if (c.bandwidth == h) return *c.kernel;
    }
    product_kernels_.push_back(
        {h, std::make_unique<InSampleKernel>(InSampleKernel::multivariate(obs_.covariates(), h))});
    return *product_kernels_.back().kernel;
  }

  template <typename Fit, typename KernelFn>
  std::vector<KernelPrediction> in_sample(const Fit& fit, KernelFn&& kernel) {
    if (use_cache()) return fit.predict_in_sample(kernel());
    std::vector<KernelPrediction> out(static_cast<std::size_t>(obs_.size()));
    for (Index i = 0; i < obs_.size(); ++i) {
      out[static_cast<std::size_t>(i)] = fit.predict(obs_.covariates().row(i).transpose());
    }
    return out;
  }

  static Vector values_of(const std::vector<KernelPrediction>& preds, std::int64_t* clipped) {
    Vector v(static_cast<Index>(preds.size()));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      v[static_cast<Index>(i)] = preds[i].value;
      if (clipped && preds[i].clipped) ++*clipped;
    }
    return v;
  }

  void fit_propensity(Backend b, PropensitySlot& slot) {
    const Index n = obs_.size();
    const Index p = obs_.dimension();
    const double clip = options_.clip;
    switch (b) {
      case Backend::Parametric: {
        const Matrix design = build_design(obs_.covariates(), options_.propensity_design);
        const LogisticFit fit = fit_logistic(design, obs_.treatments());
        slot.values.resize(n);
        for (Index i = 0; i < n; ++i) {
          double v = fit.predict(design.row(i).transpose());
          if (v < clip || v > 1.0 - clip) {
            v = std::clamp(v, clip, 1.0 - clip);
            ++slot.clipped;
          }
          slot.values[i] = v;
        }
        break;
      }
      case Backend::Semiparametric: {
        const Vector& alpha = directions().alpha;
        const Vector projected = obs_.covariates() * alpha;
        const double h = resolve_bandwidth(options_.kernels.propensity_index,
                                           projected_scale(projected), n, p);
        const auto fit = SemiparFit::propensity(obs_, alpha, h, clip);
        slot.values = values_of(
            in_sample(fit, [&]() -> const InSampleKernel& {
              return index_kernel(alpha, fit.projected_train(), h);
            }),
            &slot.clipped);
        break;
      }
      case Backend::Nonparametric: {
        const double h = resolve_bandwidth(options_.kernels.propensity_multivariate,
                                           multivariate_scale(obs_.covariates()), n, p);
        const auto fit = NonparFit::propensity(obs_, h, clip);
        slot.values = values_of(
            in_sample(fit, [&]() -> const InSampleKernel& { return product_kernel(h); }),
            &slot.clipped);
        break;
      }
    }
    require_finite(slot.values, "propensity");
  }

  void fit_regression(Backend b, RegressionSlot& slot) {
    const Index n = obs_.size();
    const Index p = obs_.dimension();
    switch (b) {
      case Backend::Parametric: {
        const Matrix design = build_design(obs_.covariates(), options_.regression_design);
        const LinearFit f1 = fit_linear(design, obs_.treatments(), obs_.outcomes(), Arm::Treated);
        const LinearFit f0 = fit_linear(design, obs_.treatments(), obs_.outcomes(), Arm::Control);
        slot.m1 = design * f1.gamma_hat;
        slot.m0 = design * f0.gamma_hat;
        break;
      }
      case Backend::Semiparametric: {
        const auto& dirs = directions();
        auto fit_arm = [&](const Vector& dir, Arm arm, const KernelConfig& cfg) {
          const Vector projected = obs_.covariates() * dir;
          const double h = resolve_bandwidth(cfg, projected_scale(projected), n, p);
          const auto fit = SemiparFit::regression(obs_, dir, arm, h);
          return values_of(in_sample(fit,
                                     [&]() -> const InSampleKernel& {
                                       return index_kernel(dir, fit.projected_train(), h);
                                     }),
                           nullptr);
        };
        slot.m1 = fit_arm(dirs.alpha1, Arm::Treated, options_.kernels.treated_index);
        slot.m0 = fit_arm(dirs.alpha0, Arm::Control, options_.kernels.control_index);
        break;
      }
      case Backend::Nonparametric: {
        const double h = resolve_bandwidth(options_.kernels.regression_multivariate,
                                           multivariate_scale(obs_.covariates()), n, p);
        const auto f1 = NonparFit::regression(obs_, Arm::Treated, h);
        const auto f0 = NonparFit::regression(obs_, Arm::Control, h);
        auto kernel = [&]() -> const InSampleKernel& { return product_kernel(h); };
        slot.m1 = values_of(in_sample(f1, kernel), nullptr);
        slot.m0 = values_of(in_sample(f0, kernel), nullptr);
        break;
      }
    }
    require_finite(slot.m1, "treated regression");
    require_finite(slot.m0, "control regression");
  }

  const ObservationSet& obs_;
  const EstimationOptions& options_;
  PropensitySlot propensity_[3];
  RegressionSlot regression_[3];
  std::vector<CachedIndexKernel> index_kernels_;
  std::vector<CachedProductKernel> product_kernels_;
};

void check_lengths(const ObservationSet& obs, const NuisanceValues& values) {
  const Index n = obs.size();
  if (values.propensity.size() != n || values.m1.size() != n || values.m0.size() != n) {
    throw DataError("nuisance values do not match the sample size");
  }
}

}  // namespace

NuisanceValues evaluate_at_sample(const ObservationSet& obs, const NuisanceFit& fit) {
  NuisanceValues v;
  v.propensity = evaluate(obs, fit.propensity, "propensity");
  v.m1 = evaluate(obs, fit.m1, "treated regression");
  v.m0 = evaluate(obs, fit.m0, "control regression");
  v.clipped = fit.clip_count;
  return v;
}

AipwTerms aipw(const ObservationSet& obs, const NuisanceValues& values) {
  check_lengths(obs, values);
  CompensatedSum s1;
  CompensatedSum s0;
  for (Index i = 0; i < obs.size(); ++i) {
    const int d = obs.treatments()[i];
    const double y = obs.outcomes()[i];
    const double p = values.propensity[i];
    s1.add(treated_term(d, y, p, values.m1[i]));
    s0.add(control_term(d, y, p, values.m0[i]));
  }
  const double n = static_cast<double>(obs.size());
  AipwTerms out;
  out.theta1 = s1.value() / n;
  out.theta0 = s0.value() / n;
  out.delta = out.theta1 - out.theta0;
  return out;
}

double theta1_hat(const ObservationSet& obs, const NuisanceFit& fit) {
  const Vector p = evaluate(obs, fit.propensity, "propensity");
  const Vector m1 = evaluate(obs, fit.m1, "treated regression");
  CompensatedSum s;
  for (Index i = 0; i < obs.size(); ++i) {
    s.add(treated_term(obs.treatments()[i], obs.outcomes()[i], p[i], m1[i]));
  }
  return s.value() / static_cast<double>(obs.size());
}

double theta0_hat(const ObservationSet& obs, const NuisanceFit& fit) {
  const Vector p = evaluate(obs, fit.propensity, "propensity");
  const Vector m0 = evaluate(obs, fit.m0, "control regression");
  CompensatedSum s;
  for (Index i = 0; i < obs.size(); ++i) {
    s.add(control_term(obs.treatments()[i], obs.outcomes()[i], p[i], m0[i]));
  }
  return s.value() / static_cast<double>(obs.size());
}

std::vector<SweepEntry> dr_estimate_sweep(const ObservationSet& obs,
                                          std::span<const EstimatorId> estimators,
                                          const EstimationOptions& options) {
  require_estimable(obs);
  BackendCache cache(obs, options);
  std::vector<SweepEntry> out;
  out.reserve(estimators.size());
  for (EstimatorId id : estimators) {
    SweepEntry entry{id, std::nullopt, {}, nullptr};
    const auto& ps = cache.propensity(id.propensity_backend());
    const auto& reg = cache.regression(id.regression_backend());
    const std::exception_ptr failure = ps.error ? ps.error : reg.error;
    if (failure) {
      try {
        std::rethrow_exception(failure);
      } catch (const std::exception& e) {
        entry.error = e.what();
      }
      entry.failure = failure;
    } else {
      NuisanceValues values{ps.values, reg.m1, reg.m0, ps.clipped};
      const AipwTerms terms = aipw(obs, values);
      entry.result = EstimateResult{terms.delta, terms.theta1, terms.theta0, id, ps.clipped};
    }
    out.push_back(std::move(entry));
  }
  return out;
}

EstimateResult dr_estimate(const ObservationSet& obs, EstimatorId estimator,
                           const EstimationOptions& options) {
  const EstimatorId ids[] = {estimator};
  auto entries = dr_estimate_sweep(obs, ids, options);
  if (entries.front().failure) std::rethrow_exception(entries.front().failure);
  return *entries.front().result;
}

EstimateResult dr_estimate_with_oracle(const ObservationSet& obs, const CovariateFunction& p,
                                       const CovariateFunction& m1, const CovariateFunction& m0) {
  NuisanceValues values;
  values.propensity = evaluate(obs, p, "propensity");
  values.m1 = evaluate(obs, m1, "treated regression");
  values.m0 = evaluate(obs, m0, "control regression");
  const AipwTerms terms = aipw(obs, values);
  return EstimateResult{terms.delta, terms.theta1, terms.theta0, std::nullopt, 0};
}

}  // namespace drate
