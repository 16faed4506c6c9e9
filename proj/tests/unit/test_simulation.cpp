#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "drate/error.hpp"
#include "drate/numeric.hpp"
#include "drate/simulation.hpp"

using namespace drate;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.n = 200;
  c.reps = 6;
  c.calibration_draws = 100000;
  return c;
}

}  // namespace

TEST_CASE("scenario validation") {
  CHECK_NOTHROW(validate(ScenarioConfig{}));
  auto bad = [](auto mutate) {
    ScenarioConfig c;
    mutate(c);
    CHECK_THROWS_AS(validate(c), ConfigError);
  };
  bad([](ScenarioConfig& c) { c.p = 1; });
  bad([](ScenarioConfig& c) { c.n = 19; });
  bad([](ScenarioConfig& c) { c.reps = 0; });
  bad([](ScenarioConfig& c) { c.target_untreated = 0.05; });
  bad([](ScenarioConfig& c) { c.target_untreated = 0.97; });
  bad([](ScenarioConfig& c) { c.beta = Vector::Ones(3); });
  bad([](ScenarioConfig& c) { c.clip = 0.5; });
  bad([](ScenarioConfig& c) { c.calibration_draws = 1000; });
  bad([](ScenarioConfig& c) { c.max_failure_fraction = 1.5; });
  bad([](ScenarioConfig& c) { c.mu1 = std::nan(""); });
  bad([](ScenarioConfig& c) {
    c.p = 5;
    c.ps_misspec.kind = MisspecKind::Global;
  });
}

TEST_CASE("default coefficients and estimator sets") {
  const Vector b = default_beta(10);
  CHECK(b.size() == 10);
  CHECK(b.head(4) == Vector::Constant(4, 0.5));
  CHECK(b.tail(6).isZero());

  CHECK(default_estimators({}, {}).size() == 9);
  PropensityMisspec ps;
  ps.kind = MisspecKind::Global;
  RegressionMisspec reg;
  reg.kind = MisspecKind::Global;
  CHECK(default_estimators(ps, {}).size() == 6);
  CHECK(default_estimators({}, reg).size() == 6);
  CHECK(default_estimators(ps, reg).size() == 4);
}

TEST_CASE("index direction geometry") {
  const Vector b = default_beta(10);
  for (double s1 : {0.0, 0.5, 1.0, 3.0}) {
    const Vector a = make_alpha(b, s1);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-14));
    const double expected = std::acos(1.0 / std::sqrt(1.0 + s1 * s1)) * 180.0 / std::acos(-1.0);
    CHECK(angle_degrees(a, b) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK_THROWS_AS(make_alpha(Vector::Zero(10), 1.0), ConfigError);
  CHECK_THROWS_AS(make_alpha(Vector::Ones(10), 1.0), ConfigError);
}

TEST_CASE("intercept calibration hits the untreated share") {
  const Vector a = make_alpha(default_beta(10), 1.0);
  for (double target : {0.3, 0.5, 0.8}) {
    const auto c = calibrate_s0(a, target, 200000, 3);
    CHECK(std::abs(c.untreated - target) < 0.002);
  }
  // Symmetric covariates: a 50% share needs no intercept.
  CHECK(std::abs(calibrate_s0(a, 0.5, 200000, 3).s0) < 0.05);
  // Deterministic in the seed.
  CHECK(calibrate_s0(a, 0.3, 100000, 8).s0 == calibrate_s0(a, 0.3, 100000, 8).s0);

  const Scenario s(ScenarioConfig{});
  RandomStream rng(99, StreamKind::Verification);
  double untreated = 0.0;
  const Index draws = 200000;
  for (Index i = 0; i < draws; ++i) {
    Vector x(10);
    for (Index j = 0; j < 10; ++j) x[j] = rng.normal();
    untreated += 1.0 - s.propensity(x);
  }
  CHECK(std::abs(untreated / static_cast<double>(draws) - 0.5) < 0.005);
}

TEST_CASE("draws are reproducible and independent across replicates") {
  const Scenario s(small_config());
  const auto a = s.draw(3);
  const auto b = s.draw(3);
  const auto c = s.draw(4);
  CHECK(a.data.size() == 200);
  CHECK(a.data.covariates() == b.data.covariates());
  CHECK(a.data.outcomes() == b.data.outcomes());
  CHECK(a.data.treatments() == b.data.treatments());
  CHECK(a.data.covariates() != c.data.covariates());

  CHECK(s.true_ate() == doctest::Approx(5.0));
  for (Index i = 0; i < a.data.size(); ++i) {
    CHECK(a.truth.m1[i] - a.truth.m0[i] == doctest::Approx(5.0));
    const double observed = a.data.treatments()[i] ? a.truth.y1[i] : a.truth.y0[i];
    CHECK(a.data.outcomes()[i] == observed);
    CHECK(a.truth.propensity[i] > 0.0);
    CHECK(a.truth.propensity[i] < 1.0);
  }
}

TEST_CASE("locally perturbed propensities stay inside the clip range") {
  auto cfg = small_config();
  cfg.ps_misspec = {MisspecKind::Local, 0.2, Perturbation::Sine};
  const Scenario s(cfg);
  const auto d = s.draw(0);
  for (Index i = 0; i < d.data.size(); ++i) {
    CHECK(d.truth.propensity[i] > cfg.clip);
    CHECK(d.truth.propensity[i] < 1.0 - cfg.clip);
    CHECK(s.admissible(d.data.covariates().row(i).transpose()));
  }
}

TEST_CASE("local outcome perturbation shifts the true effect") {
  auto cfg = small_config();
  cfg.or_misspec.kind = MisspecKind::Local;
  cfg.or_misspec.delta1 = 0.4;
  cfg.or_misspec.s1 = Perturbation::Square;
  const Scenario s(cfg);
  // E[x1^2] = 1 under the standard normal design.
  CHECK(s.true_ate() == doctest::Approx(5.4).epsilon(1e-12));
}

TEST_CASE("monte carlo runs do not depend on the worker count") {
  auto cfg = small_config();
  const auto one = run_mc(cfg, 1);
  const auto three = run_mc(cfg, 3);
  REQUIRE(one.rows.size() == 9);
  for (std::size_t k = 0; k < one.rows.size(); ++k) {
    CHECK(one.rows[k].estimates == three.rows[k].estimates);
    CHECK(one.rows[k].bias == three.rows[k].bias);
    CHECK(one.rows[k].clips == three.rows[k].clips);
  }

  for (const auto& r : one.rows) {
    CHECK(r.reps_ok + r.reps_failed == cfg.reps);
    double sum = 0.0;
    for (double e : r.estimates) sum += e;
    const double mean = sum / static_cast<double>(r.reps_ok);
    CHECK(r.bias == doctest::Approx(mean - one.true_ate).epsilon(1e-12));
    CHECK(r.mse == doctest::Approx(r.bias * r.bias + r.variance).epsilon(1e-10));
    CHECK(r.std * r.std * static_cast<double>(r.reps_ok - 1) ==
          doctest::Approx(r.variance * static_cast<double>(r.reps_ok)).epsilon(1e-10));
  }

  std::ostringstream csv;
  write_report_csv(csv, one);
  const std::string text = csv.str();
  CHECK(text.rfind("estimator,bias,std,mse,reps_failed,clips\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  CHECK(&one.row(EstimatorId(9)) == &one.rows.back());
}

TEST_CASE("too many failed replicates abort the run") {
  // A negative bandwidth makes every kernel fit fail.
  auto cfg = small_config();
  cfg.estimators = {EstimatorId(1), EstimatorId(4)};
  cfg.kernels.propensity_multivariate.rule = FixedBandwidth{-1.0};
  CHECK_THROWS_AS(run_mc(cfg, 1), SimulationAborted);

  cfg.max_failure_fraction = 1.0;
  const auto r = run_mc(cfg, 1);
  CHECK(r.row(EstimatorId(4)).reps_failed == cfg.reps);
  CHECK(r.row(EstimatorId(4)).estimates.empty());
  CHECK_FALSE(r.row(EstimatorId(4)).first_error.empty());
  CHECK(r.row(EstimatorId(1)).reps_failed == 0);
}
