#pragma once

#include "drate/data.hpp"

namespace drate {

/// How raw covariates become a parametric design matrix.
enum class CovariateMap {
  Identity,
  /// The fixed nonlinear map of ten covariates used to build deliberately
  /// misspecified parametric models.
  ZTransform,
};

struct DesignSpec {
  /// Prepend a column of ones. Off by default: the models are
  /// exp(x'b) / (1 + exp(x'b)) and x'g on the raw design.
  bool intercept = false;
  CovariateMap map = CovariateMap::Identity;
};

/// z1 = exp(x1/3), z2 = x2/(1+exp(x1)) + 10, z3 = (x1 x3/25 + 0.6)^3,
/// z4 = (x2 + x4 + 20)^2, repeated on x5..x8, then z9, z10 as z1, z2 on
/// x9, x10. Throws DataError unless x has exactly 10 entries.
Vector z_transform(const ConstVectorRef& x);

Vector design_row(const ConstVectorRef& x, const DesignSpec& spec);
Matrix build_design(const Matrix& covariates, const DesignSpec& spec);

}  // namespace drate
