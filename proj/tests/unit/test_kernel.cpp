#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drate/error.hpp"
#include "drate/kernel.hpp"
#include "drate/numeric.hpp"
#include "oracles.hpp"

using namespace drate;

namespace {

Vector unit2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v / v.norm();
}

ObservationSet random_set(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, p);
  IntVector d(n);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) x(i, j) = normal(rng);
    d[i] = normal(rng) + 0.5 * x(i, 0) > 0 ? 1 : 0;
    y[i] = 2.0 + x(i, 0) * x(i, 1) + normal(rng);
  }
  return ObservationSet(x, d, y);
}

ObservationSet permuted(const ObservationSet& obs, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(obs.size()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix x(obs.size(), obs.dimension());
  IntVector d(obs.size());
  Vector y(obs.size());
  for (Index i = 0; i < obs.size(); ++i) {
    const Index k = perm[static_cast<std::size_t>(i)];
    x.row(i) = obs.covariates().row(k);
    d[i] = obs.treatments()[k];
    y[i] = obs.outcomes()[k];
  }
  return ObservationSet(x, d, y);
}

}  // namespace

TEST_CASE("rule-of-thumb and fixed bandwidths") {
  const KernelConfig index_rule{KernelRole::TreatedIndex, RuleOfThumb{1.0}};
  CHECK(resolve_bandwidth(index_rule, 1.0, 1000, 10) ==
        doctest::Approx(std::pow(1000.0, -0.3)).epsilon(1e-15));
  CHECK(resolve_bandwidth(index_rule, 1.0, 1000, 10) == doctest::Approx(0.1259).epsilon(1e-3));
  CHECK(resolve_bandwidth(index_rule, 2.0, 1000, 10) ==
        2.0 * resolve_bandwidth(index_rule, 1.0, 1000, 10));

  const KernelConfig fixed{KernelRole::PropensityIndex, FixedBandwidth{0.2}};
  CHECK(resolve_bandwidth(fixed, 1.0, 10, 3) == 0.2);
  CHECK(resolve_bandwidth(fixed, 5.0, 100000, 3) == 0.2);

  const KernelConfig multi{KernelRole::RegressionMultivariate, RuleOfThumb{1.5}};
  CHECK(resolve_bandwidth(multi, 0.8, 1000, 10) ==
        doctest::Approx(1.5 * 0.8 * std::pow(1000.0, -1.0 / 14.0)).epsilon(1e-15));
  CHECK(multi.kernel() == KernelType::GaussianProduct);
  CHECK(index_rule.kernel() == KernelType::GaussianUnivariate);

  CHECK_THROWS_AS(resolve_bandwidth({KernelRole::TreatedIndex, RuleOfThumb{0.0}}, 1.0, 100, 2),
                  ConfigError);
  CHECK_THROWS_AS(resolve_bandwidth({KernelRole::TreatedIndex, FixedBandwidth{-1.0}}, 1.0, 100, 2),
                  ConfigError);
  CHECK_THROWS_AS(resolve_bandwidth(index_rule, 1.0, 1, 2), ConfigError);
  CHECK_THROWS_AS(resolve_bandwidth(index_rule, 0.0, 100, 2), ConfigError);

  Matrix cols(3, 2);
  cols << 0, 0, 1, 2, 2, 4;
  CHECK(multivariate_scale(cols) == doctest::Approx(std::sqrt(1.0 * 2.0)).epsilon(1e-14));
}

TEST_CASE("single-index regression") {
  SUBCASE("constant outcomes") {
    auto obs = random_set(60, 2, 1);
    const ObservationSet c(obs.covariates(), obs.treatments(), Vector::Constant(60, 4.25));
    const auto fit = SemiparFit::regression(c, unit2(1, 1), Arm::Treated, 0.3);
    for (double t : {-3.0, 0.0, 0.7, 2.0}) CHECK(fit.predict_index(t).value == doctest::Approx(4.25).epsilon(1e-15));
  }
  SUBCASE("single treated observation") {
    Matrix x(3, 2);
    x << 0.5, 0.1, -1, 2, 3, 3;
    IntVector d(3);
    d << 0, 1, 0;
    Vector y(3);
    y << 1, 7.5, -2;
    const auto fit = SemiparFit::regression(ObservationSet(x, d, y), unit2(1, 0), Arm::Treated, 0.5);
    for (double t : {-1.0, 0.0, 1.0}) CHECK(fit.predict_index(t).value == doctest::Approx(7.5).epsilon(1e-15));
  }
  SUBCASE("five-point arm against direct summation") {
    Matrix x(7, 2);
    x << -1.2, 0.3, -0.4, 1.0, 0.0, -2.0, 0.5, 0.5, 1.7, -1.0, 9.0, 9.0, -9.0, 1.0;
    IntVector d(7);
    d << 1, 1, 1, 1, 1, 0, 0;
    Vector y(7);
    y << 3.0, -1.0, 2.5, 0.75, 10.0, 100.0, -100.0;
    const Vector dir = unit2(1, 0);
    const auto fit = SemiparFit::regression(ObservationSet(x, d, y), dir, Arm::Treated, 1.0);
    const std::vector<double> t = {-1.2, -0.4, 0.0, 0.5, 1.7};
    const std::vector<double> ys = {3.0, -1.0, 2.5, 0.75, 10.0};
    CHECK(std::abs(fit.predict_index(0.0).value - oracle::nw_1d(t, ys, 1.0, 0.0)) < 1e-12);
    Vector q(2);
    q << 0.3, -5.0;
    CHECK(std::abs(fit.predict(q).value - oracle::nw_1d(t, ys, 1.0, 0.3)) < 1e-12);
  }
  SUBCASE("empty arm") {
    auto obs = random_set(10, 2, 2);
    const ObservationSet all(obs.covariates(), IntVector::Ones(10), obs.outcomes());
    CHECK_THROWS_AS(SemiparFit::regression(all, unit2(1, 0), Arm::Control, 0.5), FitError);
  }
  SUBCASE("direction checks") {
    auto obs = random_set(10, 2, 3);
    Vector bad(2);
    bad << 1, 1;
    CHECK_THROWS_AS(SemiparFit::regression(obs, bad, Arm::Treated, 0.5), DataError);
    CHECK_THROWS_AS(SemiparFit::regression(obs, unit2(1, 0), Arm::Treated, 0.0), ConfigError);
  }
}

TEST_CASE("single-index propensity") {
  SUBCASE("all treated is clipped") {
    auto obs = random_set(20, 2, 4);
    const ObservationSet all(obs.covariates(), IntVector::Ones(20), obs.outcomes());
    const auto fit = SemiparFit::propensity(all, unit2(1, 2), 0.4, 0.01);
    const auto pred = fit.predict_index(0.1);
    CHECK(pred.value == 0.99);
    CHECK(pred.clipped);
  }
  SUBCASE("far query falls back to the treated fraction") {
    auto obs = random_set(40, 2, 5);
    const auto fit = SemiparFit::propensity(obs, unit2(1, 0), 0.1);
    const auto pred = fit.predict_index(1000.0);
    CHECK(pred.fallback);
    CHECK_FALSE(pred.clipped);
    CHECK(pred.value == static_cast<double>(obs.arm_size(Arm::Treated)) / 40.0);
  }
  SUBCASE("four points against direct summation") {
    Matrix x(4, 2);
    x << 0, 0, 1, 0, -0.5, 3, 2, 1;
    IntVector d(4);
    d << 1, 0, 1, 0;
    const auto fit = SemiparFit::propensity(ObservationSet(x, d, Vector::Zero(4)), unit2(1, 0), 1.0);
    const std::vector<double> t = {0, 1, -0.5, 2};
    const std::vector<double> ds = {1, 0, 1, 0};
    for (double q : {-1.0, 0.25, 0.9}) {
      CHECK(std::abs(fit.predict_index(q).value - oracle::nw_1d(t, ds, 1.0, q)) < 1e-12);
    }
  }
}

TEST_CASE("multivariate smoother") {
  SUBCASE("constant outcomes") {
    auto obs = random_set(50, 3, 6);
    const ObservationSet c(obs.covariates(), obs.treatments(), Vector::Constant(50, -1.5));
    const auto fit = NonparFit::regression(c, Arm::Control, 0.7);
    Vector q = Vector::Constant(3, 0.2);
    CHECK(fit.predict(q).value == doctest::Approx(-1.5).epsilon(1e-15));
  }
  SUBCASE("small bandwidth reproduces the training outcome") {
    Matrix x(4, 2);
    x << 0, 0, 1, 0, 0, 1, 1, 1;
    IntVector d = IntVector::Ones(4);
    Vector y(4);
    y << 1.0, 2.0, 3.0, 4.0;
    const auto fit = NonparFit::regression(ObservationSet(x, d, y), Arm::Treated, 1e-3);
    for (Index i = 0; i < 4; ++i) {
      CHECK(std::abs(fit.predict(x.row(i).transpose()).value - y[i]) < 1e-9);
    }
  }
  SUBCASE("all untreated propensity is clipped up") {
    auto obs = random_set(20, 2, 7);
    const ObservationSet none(obs.covariates(), IntVector::Zero(20), obs.outcomes());
    const auto pred = NonparFit::propensity(none, 0.5).predict(Vector::Zero(2));
    CHECK(pred.value == 0.01);
    CHECK(pred.clipped);
  }
  SUBCASE("matches direct summation") {
    auto obs = random_set(80, 3, 8);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (Index i = 0; i < 80; ++i) {
      if (!obs.treated(i)) continue;
      xs.push_back({obs.covariates()(i, 0), obs.covariates()(i, 1), obs.covariates()(i, 2)});
      ys.push_back(obs.outcomes()[i]);
    }
    const auto fit = NonparFit::regression(obs, Arm::Treated, 0.6);
    Vector q(3);
    q << 0.1, -0.2, 0.3;
    CHECK(std::abs(fit.predict(q).value - oracle::nw_multi(xs, ys, 0.6, {0.1, -0.2, 0.3})) < 1e-12);
  }
}

TEST_CASE("in-sample kernels reproduce single-query predictions bit for bit") {
  const auto obs = random_set(120, 3, 9);
  Vector dir(3);
  dir << 0.6, 0.0, 0.8;
  const auto semi = SemiparFit::regression(obs, dir, Arm::Control, 0.35);
  const auto k1 = InSampleKernel::index(semi.projected_train(), 0.35);
  const auto in1 = semi.predict_in_sample(k1);
  const auto nonpar = NonparFit::propensity(obs, 0.8);
  const auto k2 = InSampleKernel::multivariate(obs.covariates(), 0.8);
  const auto in2 = nonpar.predict_in_sample(k2);
  for (Index i = 0; i < obs.size(); ++i) {
    const Vector xi = obs.covariates().row(i).transpose();
    CHECK(in1[static_cast<std::size_t>(i)].value == semi.predict(xi).value);
    CHECK(in2[static_cast<std::size_t>(i)].value == nonpar.predict(xi).value);
    CHECK(in2[static_cast<std::size_t>(i)].clipped == nonpar.predict(xi).clipped);
  }
  CHECK_THROWS_AS(semi.predict_in_sample(InSampleKernel::index(semi.projected_train(), 0.3)),
                  ConfigError);
}

TEST_CASE("kernel smoother properties") {
  const auto obs = random_set(150, 2, 12);
  const auto shuffled = permuted(obs, 13);
  const Vector dir = unit2(2, -1);
  const double y_min_t = [&] {
    double m = 1e300;
    for (Index i = 0; i < obs.size(); ++i) if (obs.treated(i)) m = std::min(m, obs.outcomes()[i]);
    return m;
  }();
  const double y_max_t = [&] {
    double m = -1e300;
    for (Index i = 0; i < obs.size(); ++i) if (obs.treated(i)) m = std::max(m, obs.outcomes()[i]);
    return m;
  }();

  const auto semi = SemiparFit::regression(obs, dir, Arm::Treated, 0.3);
  const auto semi_p = SemiparFit::regression(shuffled, dir, Arm::Treated, 0.3);
  const auto ps = SemiparFit::propensity(obs, dir, 0.3);
  const auto ps_p = SemiparFit::propensity(shuffled, dir, 0.3);
  const auto np = NonparFit::regression(obs, Arm::Treated, 0.5);
  const auto np_p = NonparFit::regression(shuffled, Arm::Treated, 0.5);

  std::mt19937_64 rng(14);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int t = 0; t < 200; ++t) {
    Vector q(2);
    q << normal(rng), normal(rng);
    const double a = semi.predict(q).value;
    CHECK(std::abs(a - semi_p.predict(q).value) < 1e-12);
    CHECK(std::abs(ps.predict(q).value - ps_p.predict(q).value) < 1e-12);
    CHECK(std::abs(np.predict(q).value - np_p.predict(q).value) < 1e-12);
    CHECK(a >= y_min_t - 1e-12);
    CHECK(a <= y_max_t + 1e-12);
    const double b = np.predict(q).value;
    CHECK(b >= y_min_t - 1e-12);
    CHECK(b <= y_max_t + 1e-12);
    const double pv = ps.predict(q).value;
    CHECK((pv >= 0.01 && pv <= 0.99));

    // Moving along the orthogonal complement leaves the index unchanged.
    Vector ortho(2);
    ortho << dir[1], -dir[0];
    const Vector q2 = q + normal(rng) * ortho;
    CHECK(std::abs(semi.predict(q2).value - a) < 1e-12);
  }
}

TEST_CASE("single-index regression error shrinks with n") {
  const Vector dir = unit2(1, 1);
  auto mse_at = [&](Index n) {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
      std::mt19937_64 rng(100 + rep + static_cast<std::uint64_t>(n));
      std::normal_distribution<double> normal;
      Matrix x(n, 2);
      Vector y(n);
      for (Index i = 0; i < n; ++i) {
        x(i, 0) = normal(rng);
        x(i, 1) = normal(rng);
        y[i] = std::sin(x.row(i).dot(dir)) + 0.5 * normal(rng);
      }
      const ObservationSet obs(x, IntVector::Ones(n), y);
      const auto proj = Vector(x * dir);
      const double h = resolve_bandwidth({KernelRole::TreatedIndex, RuleOfThumb{}},
                                         sample_sd(std::span<const double>(proj.data(), proj.size())), n, 2);
      const auto fit = SemiparFit::regression(obs, dir, Arm::Treated, h);
      for (int g = -15; g <= 15; ++g) {
        const double t = 0.1 * g;
        const double e = fit.predict_index(t).value - std::sin(t);
        total += e * e;
      }
    }
    return total;
  };
  const double m250 = mse_at(250), m1000 = mse_at(1000), m4000 = mse_at(4000);
  int inversions = 0;
  if (m1000 > m250) {
    ++inversions;
    CHECK(m1000 <= 1.1 * m250);
  }
  if (m4000 > m1000) {
    ++inversions;
    CHECK(m4000 <= 1.1 * m1000);
  }
  CHECK(inversions <= 1);
  CHECK(m4000 < m250);
}
