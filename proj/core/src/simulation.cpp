#include "drate/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>
#include <utility>

#include "drate/numeric.hpp"

namespace drate {

namespace {

bool misspecifies_parametric(MisspecKind k) {
  return k == MisspecKind::Global || k == MisspecKind::ZOnly;
}

bool misspecifies_index(MisspecKind k) {
  return k == MisspecKind::Global || k == MisspecKind::WrongIndex;
}

bool is_global(MisspecKind k) { return misspecifies_parametric(k) || misspecifies_index(k); }

// E[s(X)] for X ~ N(0, I).
double perturbation_mean(Perturbation s) {
  switch (s) {
    case Perturbation::Sine:
    case Perturbation::TanhProduct:
      return 0.0;
    case Perturbation::Square:
    case Perturbation::Unit:
      return 1.0;
  }
  return 0.0;
}

struct ReplicateRecord {
  std::vector<std::optional<double>> estimates;
  std::vector<std::int64_t> clips;
  std::vector<std::string> errors;
};

ReplicateRecord run_replicate(const Scenario& scenario, const std::vector<EstimatorId>& ids,
                              const EstimationOptions& options, Index rep) {
  ReplicateRecord rec;
  rec.estimates.resize(ids.size());
  rec.clips.resize(ids.size(), 0);
  rec.errors.resize(ids.size());
  try {
    const SimulatedDraw draw = scenario.draw(rep);
    const auto entries = dr_estimate_sweep(draw.data, ids, options);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].result) {
        rec.estimates[k] = entries[k].result->delta_hat;
        rec.clips[k] = entries[k].result->clipped_count;
      } else {
        rec.errors[k] = entries[k].error;
      }
    }
  } catch (const std::exception& e) {
    for (auto& err : rec.errors) err = e.what();
  }
  return rec;
}

}  // namespace

const char* to_string(MisspecKind kind) {
  switch (kind) {
    case MisspecKind::Correct:
      return "correct";
    case MisspecKind::Global:
      return "global";
    case MisspecKind::ZOnly:
      return "z_only";
    case MisspecKind::WrongIndex:
      return "wrong_index";
    case MisspecKind::Local:
      return "local";
  }
  return "unknown";
}

Vector default_beta(Index p) {
  Vector beta = Vector::Zero(p);
  beta.head(std::min<Index>(4, p)).setConstant(0.5);
  return beta;
}

std::vector<EstimatorId> default_estimators(const PropensityMisspec& ps,
                                            const RegressionMisspec& reg) {
  const bool ps_bad = is_global(ps.kind);
  const bool or_bad = is_global(reg.kind);
  std::vector<int> ids;
  if (ps_bad && or_bad) {
    ids = {1, 5, 6, 9};
  } else if (or_bad) {
    ids = {1, 3, 5, 6, 8, 9};
  } else if (ps_bad) {
    ids = {1, 2, 5, 6, 7, 9};
  } else {
    ids = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  }
  std::vector<EstimatorId> out;
  for (int k : ids) out.emplace_back(k);
  return out;
}

void validate(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("scenario: " + msg); };
  if (cfg.p < 2) fail("p must be >= 2");
  if (cfg.n < 2 * cfg.p) fail("n must be >= 2p");
  if (cfg.reps < 1) fail("reps must be >= 1");
  if (!(cfg.target_untreated > 0.05 && cfg.target_untreated < 0.95)) {
    fail("target_untreated must lie in (0.05, 0.95)");
  }
  if (cfg.beta.size() != 0 && cfg.beta.size() != cfg.p) fail("beta must have length p");
  if (!std::isfinite(cfg.s1) || !std::isfinite(cfg.mu1) || !std::isfinite(cfg.mu0)) {
    fail("s1, mu1 and mu0 must be finite");
  }
  if (!(cfg.clip > 0.0 && cfg.clip < 0.5)) fail("clip must lie in (0, 0.5)");
  if (cfg.calibration_draws < 100000) fail("calibration_draws must be >= 1e5");
  if (!(cfg.max_failure_fraction >= 0.0 && cfg.max_failure_fraction <= 1.0)) {
    fail("max_failure_fraction must lie in [0, 1]");
  }
  const bool needs_z = misspecifies_parametric(cfg.ps_misspec.kind) ||
                       misspecifies_parametric(cfg.or_misspec.kind);
  if (needs_z && cfg.p != 10) fail("z-transform misspecification needs p = 10");
  if (cfg.ps_misspec.kind == MisspecKind::Local && !std::isfinite(cfg.ps_misspec.delta)) {
    fail("local propensity delta must be finite");
  }
}

Vector make_alpha(const Vector& beta, double s1) {
  const double norm = beta.norm();
  if (!(norm > 0.0)) throw ConfigError("make_alpha: beta must be nonzero");
  if (beta[beta.size() - 1] != 0.0) {
    throw ConfigError("make_alpha: the last coordinate of beta must be 0");
  }
  Vector alpha = beta / norm;
  alpha[alpha.size() - 1] += s1;
  return alpha / std::sqrt(1.0 + s1 * s1);
}

double angle_degrees(const Vector& a, const Vector& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Calibration calibrate_s0(const Vector& alpha, double target_untreated, Index draws,
                         std::uint64_t seed) {
  if (!(target_untreated > 0.05 && target_untreated < 0.95)) {
    throw ConfigError("calibrate_s0: target must lie in (0.05, 0.95)");
  }
  if (draws < 1) throw ConfigError("calibrate_s0: draws must be positive");
  RandomStream rng(seed, StreamKind::Calibration);
  std::vector<double> index(static_cast<std::size_t>(draws));
  for (auto& t : index) {
    double acc = 0.0;
    for (Index j = 0; j < alpha.size(); ++j) acc += alpha[j] * rng.normal();
    t = acc;
  }
  auto untreated = [&](double s0) {
    CompensatedSum sum;
    for (double t : index) sum.add(1.0 - logistic(t + s0));
    return sum.value() / static_cast<double>(draws);
  };

  // P(D = 0) decreases in s0.
  double lo = -10.0;
  double hi = 10.0;
  Calibration c;
  for (int iter = 0; iter < 200; ++iter) {
    c.s0 = 0.5 * (lo + hi);
    c.untreated = untreated(c.s0);
    if (std::abs(c.untreated - target_untreated) < 1e-7 || hi - lo < 1e-12) break;
    if (c.untreated > target_untreated) {
      lo = c.s0;
    } else {
      hi = c.s0;
    }
  }
  if (std::abs(c.untreated - target_untreated) >= 0.002) {
    throw ConfigError("calibrate_s0: target untreated share unreachable in [-10, 10]");
  }
  return c;
}

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  beta_ = cfg_.beta.size() == 0 ? default_beta(cfg_.p) : cfg_.beta;
  alpha_ = make_alpha(beta_, cfg_.s1);
  calibration_ = calibrate_s0(alpha_, cfg_.target_untreated, cfg_.calibration_draws, cfg_.seed);
  true_ate_ = cfg_.mu1 - cfg_.mu0;
  if (cfg_.or_misspec.kind == MisspecKind::Local) {
    true_ate_ += cfg_.or_misspec.delta1 * perturbation_mean(cfg_.or_misspec.s1) -
                 cfg_.or_misspec.delta0 * perturbation_mean(cfg_.or_misspec.s0);
  }
}

double Scenario::propensity(const ConstVectorRef& x) const {
  const double base = logistic(x.dot(alpha_) + calibration_.s0);
  if (cfg_.ps_misspec.kind != MisspecKind::Local) return base;
  return base * (1.0 + cfg_.ps_misspec.delta * evaluate_perturbation(cfg_.ps_misspec.s, x));
}

double Scenario::m1(const ConstVectorRef& x) const {
  double m = cfg_.mu1 + x.dot(beta_);
  if (cfg_.or_misspec.kind == MisspecKind::Local) {
    m += cfg_.or_misspec.delta1 * evaluate_perturbation(cfg_.or_misspec.s1, x);
  }
  return m;
}

double Scenario::m0(const ConstVectorRef& x) const {
  double m = cfg_.mu0 + x.dot(beta_);
  if (cfg_.or_misspec.kind == MisspecKind::Local) {
    m += cfg_.or_misspec.delta0 * evaluate_perturbation(cfg_.or_misspec.s0, x);
  }
  return m;
}

bool Scenario::admissible(const ConstVectorRef& x) const {
  if (cfg_.ps_misspec.kind != MisspecKind::Local) return true;
  const double p = propensity(x);
  return p > cfg_.clip && p < 1.0 - cfg_.clip;
}

Vector Scenario::draw_covariates(RandomStream& rng) const {
  Vector x(cfg_.p);
  do {
    for (Index j = 0; j < cfg_.p; ++j) x[j] = rng.normal();
  } while (!admissible(x));
  return x;
}

GenerativeModel Scenario::generative_model() const {
  GenerativeModel g;
  g.draw_covariates = [this](RandomStream& rng) { return draw_covariates(rng); };
  CovariateFunction base = [this](const ConstVectorRef& x) {
    return logistic(x.dot(alpha_) + calibration_.s0);
  };
  if (cfg_.ps_misspec.kind == MisspecKind::Local) {
    g.propensity = apply_local_misspec(
        base, MisspecSpec{MisspecMode::LocalPS, cfg_.ps_misspec.delta, cfg_.ps_misspec.s},
        cfg_.clip);
  } else {
    g.propensity = base;
  }
  g.m1 = [this](const ConstVectorRef& x) { return m1(x); };
  g.m0 = [this](const ConstVectorRef& x) { return m0(x); };
  g.var1 = [](const ConstVectorRef&) { return 1.0; };
  g.var0 = [](const ConstVectorRef&) { return 1.0; };
  return g;
}

EstimationOptions Scenario::estimation_options() const {
  EstimationOptions opt;
  const Vector beta_dir = beta_ / beta_.norm();
  const Vector ps_dir = misspecifies_index(cfg_.ps_misspec.kind) ? beta_dir : alpha_;
  const Vector or_dir = misspecifies_index(cfg_.or_misspec.kind) ? alpha_ : beta_dir;
  opt.directions = IndexDirections::create(ps_dir, or_dir, or_dir);
  opt.kernels = cfg_.kernels;
  // The offset s0 and the intercepts mu_j live in the truth, so every
  // parametric design carries a constant column.
  opt.propensity_design = {true, misspecifies_parametric(cfg_.ps_misspec.kind)
                                     ? CovariateMap::ZTransform
                                     : CovariateMap::Identity};
  opt.regression_design = {true, misspecifies_parametric(cfg_.or_misspec.kind)
                                     ? CovariateMap::ZTransform
                                     : CovariateMap::Identity};
  opt.clip = cfg_.clip;
  return opt;
}

std::vector<EstimatorId> Scenario::estimators() const {
  return cfg_.estimators.empty() ? default_estimators(cfg_.ps_misspec, cfg_.or_misspec)
                                 : cfg_.estimators;
}

SimulatedDraw Scenario::draw(Index rep_index, Index n) const {
  RandomStream rng(cfg_.seed, StreamKind::Replicate, static_cast<std::uint64_t>(rep_index));
  Matrix x(n, cfg_.p);
  IntVector d(n);
  Vector y(n);
  OracleTruth truth{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const Vector xi = draw_covariates(rng);
    x.row(i) = xi.transpose();
    truth.propensity[i] = propensity(xi);
    truth.m1[i] = m1(xi);
    truth.m0[i] = m0(xi);
    truth.y1[i] = truth.m1[i] + rng.normal();
    truth.y0[i] = truth.m0[i] + rng.normal();
    d[i] = rng.uniform() < truth.propensity[i] ? 1 : 0;
    y[i] = d[i] == 1 ? truth.y1[i] : truth.y0[i];
  }
  return SimulatedDraw{ObservationSet(std::move(x), std::move(d), std::move(y)), std::move(truth)};
}

const EstimatorSummary& McReport::row(EstimatorId id) const {
  for (const auto& r : rows) {
    if (r.estimator == id) return r;
  }
  throw ConfigError("estimator " + std::to_string(id.value()) + " is not in the report");
}

McReport run_mc(const ScenarioConfig& cfg, unsigned jobs) { return run_mc(Scenario(cfg), jobs); }

McReport run_mc(const Scenario& scenario, unsigned jobs) {
  const auto& cfg = scenario.config();
  const auto ids = scenario.estimators();
  const auto options = scenario.estimation_options();
  const auto reps = static_cast<std::size_t>(cfg.reps);

  std::vector<ReplicateRecord> records(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      records[r] = run_replicate(scenario, ids, options, static_cast<Index>(r));
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  McReport report;
  report.config = cfg;
  report.alpha = scenario.alpha();
  report.s0 = scenario.s0();
  report.achieved_untreated = scenario.calibration().untreated;
  report.true_ate = scenario.true_ate();

  std::ostringstream aborted;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    EstimatorSummary row;
    row.estimator = ids[k];
    for (const auto& rec : records) {
      if (rec.estimates[k]) {
        row.estimates.push_back(*rec.estimates[k]);
        row.clips += rec.clips[k];
      } else {
        ++row.reps_failed;
        if (row.first_error.empty()) row.first_error = rec.errors[k];
      }
    }
    row.reps_ok = static_cast<Index>(row.estimates.size());
    if (static_cast<double>(row.reps_failed) >
        cfg.max_failure_fraction * static_cast<double>(cfg.reps)) {
      aborted << " estimator " << ids[k].value() << ": " << row.reps_failed << "/" << cfg.reps
              << " replicates failed (first: " << row.first_error << ");";
    }
    if (row.reps_ok > 0) {
      const double mean = compensated_mean(row.estimates);
      CompensatedSum centered;
      CompensatedSum squared_error;
      for (double v : row.estimates) {
        centered.add((v - mean) * (v - mean));
        squared_error.add((v - report.true_ate) * (v - report.true_ate));
      }
      const double r_ok = static_cast<double>(row.reps_ok);
      row.bias = mean - report.true_ate;
      row.variance = centered.value() / r_ok;
      row.mse = squared_error.value() / r_ok;
      row.std_defined = row.reps_ok > 1;
      row.std = row.std_defined ? std::sqrt(centered.value() / (r_ok - 1.0)) : 0.0;
    }
    report.rows.push_back(std::move(row));
  }
  if (!aborted.str().empty()) {
    throw SimulationAborted("simulation aborted, too many failed replicates:" + aborted.str());
  }
  return report;
}

void write_report_csv(std::ostream& out, const McReport& report) {
  out << "estimator,bias,std,mse,reps_failed,clips\n";
  char buf[160];
  for (const auto& r : report.rows) {
    const int len = std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%lld,%lld\n",
                                  r.estimator.value(), r.bias, r.std, r.mse,
                                  static_cast<long long>(r.reps_failed),
                                  static_cast<long long>(r.clips));
    out.write(buf, len);
  }
}

}  // namespace drate
