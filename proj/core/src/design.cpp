#include "drate/design.hpp"

#include <cmath>

#include "drate/error.hpp"

namespace drate {

Vector z_transform(const ConstVectorRef& x) {
  if (x.size() != 10) {
    throw DataError("z_transform needs exactly 10 covariates, got " + std::to_string(x.size()));
  }
  Vector z(10);
  // Two identical blocks on (x1..x4) and (x5..x8), then a half block on x9, x10.
  for (int b : {0, 4}) {
    z[b] = std::exp(x[b] / 3.0);
    z[b + 1] = x[b + 1] / (1.0 + std::exp(x[b])) + 10.0;
    // (t + 0.6)^3 expanded, so that t = 0 gives 0.216 exactly.
    const double t = x[b] * x[b + 2] / 25.0;
    z[b + 2] = ((t + 1.8) * t + 1.08) * t + 0.216;
    z[b + 3] = (x[b + 1] + x[b + 3] + 20.0) * (x[b + 1] + x[b + 3] + 20.0);
  }
  z[8] = std::exp(x[8] / 3.0);
  z[9] = x[9] / (1.0 + std::exp(x[8])) + 10.0;
  return z;
}

Vector design_row(const ConstVectorRef& x, const DesignSpec& spec) {
  const Index offset = spec.intercept ? 1 : 0;
  const Index width = (spec.map == CovariateMap::ZTransform ? 10 : x.size()) + offset;
  Vector row(width);
  if (spec.intercept) row[0] = 1.0;
  if (spec.map == CovariateMap::ZTransform) {
    row.tail(10) = z_transform(x);
  } else {
    row.tail(x.size()) = x;
  }
  return row;
}

Matrix build_design(const Matrix& covariates, const DesignSpec& spec) {
  if (!spec.intercept && spec.map == CovariateMap::Identity) return covariates;
  const Index n = covariates.rows();
  const Index width = design_row(covariates.row(0).transpose(), spec).size();
  Matrix design(n, width);
  for (Index i = 0; i < n; ++i) {
    design.row(i) = design_row(covariates.row(i).transpose(), spec).transpose();
  }
  return design;
}

}  // namespace drate
