#include "drate/data.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <utility>

#include "drate/error.hpp"

namespace drate {

const char* to_string(Arm arm) { return arm == Arm::Treated ? "treated" : "control"; }

const char* to_string(Backend backend) {
  switch (backend) {
    case Backend::Parametric:
      return "parametric";
    case Backend::Semiparametric:
      return "semiparametric";
    case Backend::Nonparametric:
      return "nonparametric";
  }
  return "unknown";
}

ObservationSet::ObservationSet(Matrix covariates, IntVector treatments, Vector outcomes)
    : covariates_(std::move(covariates)),
      treatments_(std::move(treatments)),
      outcomes_(std::move(outcomes)) {}

ObservationSet ObservationSet::checked(Matrix covariates, IntVector treatments, Vector outcomes) {
  ObservationSet obs(std::move(covariates), std::move(treatments), std::move(outcomes));
  const auto violations = validate(obs);
  for (const auto& v : violations) {
    if (v.severity == Violation::Severity::Error) throw DataError(v.message);
  }
  return obs;
}

Index ObservationSet::arm_size(Arm arm) const {
  const Index treated = (treatments_.array() == 1).count();
  return arm == Arm::Treated ? treated : size() - treated;
}

std::vector<Violation> validate(const ObservationSet& obs) {
  using Severity = Violation::Severity;
  std::vector<Violation> out;
  const Index n = obs.outcomes().size();

  if (obs.covariates().rows() != n || obs.treatments().size() != n) {
    std::ostringstream msg;
    msg << "row count mismatch: covariates " << obs.covariates().rows() << ", treatments "
        << obs.treatments().size() << ", outcomes " << n;
    out.push_back({Severity::Error, std::nullopt, msg.str()});
    return out;
  }
  if (n < 1) {
    out.push_back({Severity::Error, std::nullopt, "empty sample: n must be >= 1"});
    return out;
  }
  if (obs.dimension() < 2) {
    out.push_back({Severity::Error, std::nullopt, "p must be >= 2"});
  }

  Index treated = 0;
  for (Index i = 0; i < n; ++i) {
    const int d = obs.treatments()[i];
    if (d != 0 && d != 1) {
      out.push_back({Severity::Error, i,
                     "non-binary treatment " + std::to_string(d) + " at row " + std::to_string(i)});
    } else {
      treated += d;
    }
    if (!std::isfinite(obs.outcomes()[i])) {
      out.push_back({Severity::Error, i, "non-finite outcome at row " + std::to_string(i)});
    }
    if (!obs.covariates().row(i).allFinite()) {
      out.push_back({Severity::Error, i, "non-finite covariate at row " + std::to_string(i)});
    }
  }

  if (treated == 0 || treated == n) {
    const bool all_treated = treated == n;
    out.push_back({Severity::Warning, std::nullopt,
                   std::string("single-arm sample: ") +
                       (all_treated ? "control" : "treated") + " arm is empty"});
  }
  return out;
}

bool has_errors(const std::vector<Violation>& violations) {
  for (const auto& v : violations) {
    if (v.severity == Violation::Severity::Error) return true;
  }
  return false;
}

void require_estimable(const ObservationSet& obs) {
  for (const auto& v : validate(obs)) {
    if (v.severity == Violation::Severity::Error) throw DataError(v.message);
  }
  for (Arm arm : {Arm::Treated, Arm::Control}) {
    if (obs.arm_size(arm) == 0) {
      throw FitError(FitError::Kind::EmptyArm,
                     std::string("single-arm sample: the ") + to_string(arm) + " arm is empty");
    }
  }
}

IndexDirections IndexDirections::create(Vector alpha, Vector alpha1, Vector alpha0) {
  if (alpha.size() != alpha1.size() || alpha.size() != alpha0.size()) {
    throw DataError("index directions must have equal length");
  }
  const std::array<std::pair<const char*, const Vector*>, 3> named{
      {{"alpha", &alpha}, {"alpha1", &alpha1}, {"alpha0", &alpha0}}};
  for (const auto& [name, v] : named) {
    if (!v->allFinite() || std::abs(v->norm() - 1.0) > 1e-10) {
      throw DataError(std::string("index direction ") + name + " must have unit norm");
    }
  }
  return IndexDirections{std::move(alpha), std::move(alpha1), std::move(alpha0)};
}

namespace {

// Rows are propensity backends, columns regression backends, in the order
// parametric, semiparametric, nonparametric.
constexpr int kEstimatorTable[3][3] = {
    {1, 6, 2},
    {5, 9, 7},
    {3, 8, 4},
};

constexpr int backend_slot(Backend b) {
  switch (b) {
    case Backend::Parametric:
      return 0;
    case Backend::Semiparametric:
      return 1;
    case Backend::Nonparametric:
      return 2;
  }
  return 0;
}

constexpr Backend kSlotBackend[3] = {Backend::Parametric, Backend::Semiparametric,
                                     Backend::Nonparametric};

}  // namespace

EstimatorId::EstimatorId(int id) : id_(id) {
  if (id < 1 || id > 9) {
    throw ConfigError("unknown estimator id " + std::to_string(id) + " (expected 1..9)");
  }
}

EstimatorId EstimatorId::from_backends(Backend propensity, Backend regression) {
  return EstimatorId(kEstimatorTable[backend_slot(propensity)][backend_slot(regression)]);
}

std::vector<EstimatorId> EstimatorId::all() {
  std::vector<EstimatorId> ids;
  for (int k = 1; k <= 9; ++k) ids.emplace_back(k);
  return ids;
}

Backend EstimatorId::propensity_backend() const {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (kEstimatorTable[r][c] == id_) return kSlotBackend[r];
    }
  }
  return Backend::Parametric;
}

Backend EstimatorId::regression_backend() const {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (kEstimatorTable[r][c] == id_) return kSlotBackend[c];
    }
  }
  return Backend::Parametric;
}

}  // namespace drate
