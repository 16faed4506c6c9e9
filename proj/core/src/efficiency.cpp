#include "drate/efficiency.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include "drate/error.hpp"
#include "drate/numeric.hpp"

namespace drate {

namespace {

void require_open_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ConfigError(std::string(name) + " must lie strictly inside (0, 1), got " +
                      std::to_string(v));
  }
}

}  // namespace

VarianceReport sigma1_mc_oracle(const GenerativeModel& truth, std::int64_t draws,
                                std::uint64_t seed) {
  if (draws < 1000) throw ConfigError("sigma1_mc_oracle needs at least 1000 draws");
  RandomStream rng(seed, StreamKind::EfficiencyOracle);

  const auto count = static_cast<std::size_t>(draws);
  std::vector<double> ipw(count);
  std::vector<double> tau(count);
  CompensatedSum ipw1;
  CompensatedSum ipw0;
  for (std::size_t k = 0; k < count; ++k) {
    const Vector x = truth.draw_covariates(rng);
    const double p = truth.propensity(x);
    if (!(p > 0.0 && p < 1.0)) {
      throw FitError(FitError::Kind::OutOfRange,
                     "oracle propensity " + std::to_string(p) + " outside (0, 1)");
    }
    const double a = truth.var1(x) / p;
    const double b = truth.var0(x) / (1.0 - p);
    ipw1.add(a);
    ipw0.add(b);
    ipw[k] = a + b;
    tau[k] = truth.m1(x) - truth.m0(x);
  }

  const double n = static_cast<double>(draws);
  const double tau_bar = compensated_mean(tau);
  CompensatedSum het;
  std::vector<double> integrand(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double dev = (tau[k] - tau_bar) * (tau[k] - tau_bar);
    het.add(dev);
    integrand[k] = ipw[k] + dev;
  }

  VarianceReport r;
  r.source = VarianceSource::McOracle;
  r.n_oracle_draws = draws;
  r.ipw1_term = ipw1.value() / n;
  r.ipw0_term = ipw0.value() / n;
  r.heterogeneity_term = het.value() / n;
  r.sigma1 = r.ipw1_term + r.ipw0_term + r.heterogeneity_term;
  r.standard_error = sample_sd(integrand) / std::sqrt(n);
  return r;
}

VarianceReport sigma1_plugin(const ObservationSet& obs, const NuisanceValues& values) {
  require_estimable(obs);
  const AipwTerms theta = aipw(obs, values);
  CompensatedSum ipw1;
  CompensatedSum ipw0;
  CompensatedSum het;
  for (Index i = 0; i < obs.size(); ++i) {
    const double p = values.propensity[i];
    const double y = obs.outcomes()[i];
    if (obs.treated(i)) {
      const double r = y - values.m1[i];
      ipw1.add(r * r / (p * p));
    } else {
      const double r = y - values.m0[i];
      ipw0.add(r * r / ((1.0 - p) * (1.0 - p)));
    }
    const double dev = values.m1[i] - theta.theta1 - values.m0[i] + theta.theta0;
    het.add(dev * dev);
  }
  const double n = static_cast<double>(obs.size());
  VarianceReport r;
  r.source = VarianceSource::PlugIn;
  r.ipw1_term = ipw1.value() / n;
  r.ipw0_term = ipw0.value() / n;
  r.heterogeneity_term = het.value() / n;
  r.sigma1 = r.ipw1_term + r.ipw0_term + r.heterogeneity_term;
  return r;
}

VarianceReport sigma1_plugin(const ObservationSet& obs, const NuisanceFit& fit) {
  return sigma1_plugin(obs, evaluate_at_sample(obs, fit));
}

double f_super(double p_star, double g) {
  require_open_unit(p_star, "p*");
  require_open_unit(g, "g");
  return p_star / (g * g) + (1.0 - p_star) / ((1.0 - g) * (1.0 - g)) - 1.0 / p_star -
         1.0 / (1.0 - p_star);
}

double sigma4_gap_constant_ps(double p_star, double g, double mean_var_y1) {
  return mean_var_y1 * f_super(p_star, g);
}

Index GridSpec::count() const {
  return static_cast<Index>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::vector<CurvePoint> curve_emit(double p_star, const GridSpec& grid) {
  require_open_unit(p_star, "p*");
  require_open_unit(grid.lo, "grid lower end");
  require_open_unit(grid.hi, "grid upper end");
  if (!(grid.lo <= grid.hi)) throw ConfigError("grid lower end exceeds upper end");
  if (!(grid.step > 0.0)) throw ConfigError("grid step must be positive");
  if (grid.step > grid.hi - grid.lo) {
    throw ConfigError("grid step is larger than the grid interval");
  }
  const Index rows = grid.count();
  std::vector<CurvePoint> out;
  out.reserve(static_cast<std::size_t>(rows));
  for (Index k = 0; k < rows; ++k) {
    const double g = grid.lo + static_cast<double>(k) * grid.step;
    out.push_back({g, f_super(p_star, g)});
  }
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  out << "g,f\n";
  char buf[64];
  for (const auto& pt : points) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", pt.g, pt.f);
    out.write(buf, len);
  }
}

VarianceComparison variance_check(std::span<const double> estimates, double sigma1, Index n,
                                  double confidence) {
  if (estimates.size() < 30) {
    throw ConfigError("variance_check needs at least 30 replicates, got " +
                      std::to_string(estimates.size()));
  }
  if (!(sigma1 > 0.0)) throw ConfigError("sigma1 must be positive");
  if (n < 1) throw ConfigError("sample size must be positive");

  VarianceComparison c;
  c.replicates = static_cast<std::int64_t>(estimates.size());
  const double sd = sample_sd(estimates);
  c.empirical_variance = static_cast<double>(n) * sd * sd;
  c.ratio = c.empirical_variance / sigma1;

  const double dof = static_cast<double>(c.replicates - 1);
  const boost::math::chi_squared_distribution<double> chi2(dof);
  const double tail = 0.5 * (1.0 - confidence);
  c.ratio_lower = c.ratio * dof / boost::math::quantile(chi2, 1.0 - tail);
  c.ratio_upper = c.ratio * dof / boost::math::quantile(chi2, tail);
  return c;
}

void to_json(nlohmann::json& j, const VarianceReport& r) {
  j = nlohmann::json{{"sigma1", r.sigma1},
                     {"source", r.source == VarianceSource::PlugIn ? "plug_in" : "mc_oracle"},
                     {"n_oracle_draws", r.n_oracle_draws},
                     {"ipw1_term", r.ipw1_term},
                     {"ipw0_term", r.ipw0_term},
                     {"heterogeneity_term", r.heterogeneity_term},
                     {"standard_error", r.standard_error}};
}

void to_json(nlohmann::json& j, const VarianceComparison& c) {
  j = nlohmann::json{{"replicates", c.replicates},
                     {"empirical_variance", c.empirical_variance},
                     {"ratio", c.ratio},
                     {"ratio_lower", c.ratio_lower},
                     {"ratio_upper", c.ratio_upper}};
}

}  // namespace drate
