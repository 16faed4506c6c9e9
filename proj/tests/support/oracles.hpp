#pragma once

// Reference computations written independently of the library: plain
// loops, long double accumulation and no shared helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

inline long double loglik_1d(const std::vector<double>& x, const std::vector<int>& d, long double b) {
  long double ll = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double t = b * x[i];
    // log(1 + e^t) computed on the safe side.
    const long double softplus = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    ll += d[i] * t - softplus;
  }
  return ll;
}

// Golden-section search of the concave 1-D logistic log-likelihood.
inline double logistic_mle_1d(const std::vector<double>& x, const std::vector<int>& d,
                              double lo = -20.0, double hi = 20.0) {
  const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double a = lo, b = hi;
  long double c = b - phi * (b - a), e = a + phi * (b - a);
  long double fc = loglik_1d(x, d, c), fe = loglik_1d(x, d, e);
  while (b - a > 1e-12L) {
    if (fc > fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - phi * (b - a);
      fc = loglik_1d(x, d, c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + phi * (b - a);
      fe = loglik_1d(x, d, e);
    }
  }
  return static_cast<double>((a + b) / 2.0L);
}

// Nadaraya-Watson by direct summation with unnormalized Gaussian weights.
inline double nw_1d(const std::vector<double>& t, const std::vector<double>& y, double h, double q) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const long double u = (q - t[j]) / h;
    const long double w = std::exp(-0.5L * u * u);
    num += w * y[j];
    den += w;
  }
  return static_cast<double>(num / den);
}

inline double nw_multi(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       double h, const std::vector<double>& q) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t j = 0; j < x.size(); ++j) {
    long double d2 = 0.0L;
    for (std::size_t k = 0; k < q.size(); ++k) {
      const long double u = (q[k] - x[j][k]) / h;
      d2 += u * u;
    }
    const long double w = std::exp(-0.5L * d2);
    num += w * y[j];
    den += w;
  }
  return static_cast<double>(num / den);
}

struct Aipw {
  double theta1;
  double theta0;
};

inline Aipw aipw(const std::vector<int>& d, const std::vector<double>& y, const std::vector<double>& p,
                 const std::vector<double>& m1, const std::vector<double>& m0) {
  long double s1 = 0.0L, s0 = 0.0L;
  for (std::size_t i = 0; i < d.size(); ++i) {
    s1 += d[i] * y[i] / p[i] + (1.0L - d[i] / p[i]) * m1[i];
    s0 += (1 - d[i]) * y[i] / (1.0L - p[i]) + (1.0L - (1 - d[i]) / (1.0L - p[i])) * m0[i];
  }
  const auto n = static_cast<long double>(d.size());
  return {static_cast<double>(s1 / n), static_cast<double>(s0 / n)};
}

inline double f_super(double ps, double g) {
  return ps / (g * g) + (1 - ps) / ((1 - g) * (1 - g)) - 1 / ps - 1 / (1 - ps);
}

inline double sample_variance(const std::vector<double>& v) {
  long double m = 0.0L;
  for (double x : v) m += x;
  m /= v.size();
  long double s = 0.0L;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(s / (v.size() - 1));
}

}  // namespace oracle
