#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace drate {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using ConstVectorRef = Eigen::Ref<const Vector>;

/// A real-valued function of one covariate row.
using CovariateFunction = std::function<double(const ConstVectorRef&)>;

/// Propensity predictions are clipped to [clip, 1 - clip].
inline constexpr double kDefaultClip = 0.01;

enum class Arm { Treated, Control };

const char* to_string(Arm arm);

/// The sample {x_i, d_i, y_i}: an n x p covariate matrix, binary
/// treatments and real outcomes.
///
/// The plain constructor stores its arguments unchecked so that `validate`
/// can report on arbitrary data; use `checked` for anything that will be
/// estimated on.
class ObservationSet {
 public:
  ObservationSet(Matrix covariates, IntVector treatments, Vector outcomes);

  /// Throws DataError if any error-level violation is present.
  static ObservationSet checked(Matrix covariates, IntVector treatments, Vector outcomes);

  Index size() const { return outcomes_.size(); }
  Index dimension() const { return covariates_.cols(); }

  const Matrix& covariates() const { return covariates_; }
  const IntVector& treatments() const { return treatments_; }
  const Vector& outcomes() const { return outcomes_; }

  bool treated(Index i) const { return treatments_[i] == 1; }
  Index arm_size(Arm arm) const;

 private:
  Matrix covariates_;
  IntVector treatments_;
  Vector outcomes_;
};

struct Violation {
  enum class Severity { Warning, Error };

  Severity severity;
  std::optional<Index> row;
  std::string message;
};

/// Every invariant violation in `obs`. Never throws on bad data.
std::vector<Violation> validate(const ObservationSet& obs);

bool has_errors(const std::vector<Violation>& violations);

/// Estimation-time check: invalid data raises DataError, an empty arm
/// raises FitError naming the arm.
void require_estimable(const ObservationSet& obs);

/// Column mapping for CSV ingestion. An empty covariate list selects every
/// column other than the treatment and outcome, in file order.
struct DatasetSchema {
  std::string treatment = "d";
  std::string outcome = "y";
  std::vector<std::string> covariates;
};

ObservationSet load_dataset(const std::filesystem::path& path, const DatasetSchema& schema = {});

/// Writes with 17 significant digits so that load(save(obs)) == obs.
/// Covariate names default to x1..xp when the schema lists none.
void save_dataset(const std::filesystem::path& path, const ObservationSet& obs,
                  const DatasetSchema& schema = {});

/// Unit-norm index directions for the propensity (alpha) and the treated
/// and control outcome regressions (alpha1, alpha0).
struct IndexDirections {
  Vector alpha;
  Vector alpha1;
  Vector alpha0;

  /// Throws DataError unless all three have the same length and norm 1
  /// within 1e-10.
  static IndexDirections create(Vector alpha, Vector alpha1, Vector alpha0);
};

enum class Backend { Parametric, Semiparametric, Nonparametric };

const char* to_string(Backend backend);

/// One of the nine (propensity backend, regression backend) combinations.
class EstimatorId {
 public:
  /// Throws ConfigError unless 1 <= id <= 9.
  explicit EstimatorId(int id);

  static EstimatorId from_backends(Backend propensity, Backend regression);
  static std::vector<EstimatorId> all();

  int value() const { return id_; }
  Backend propensity_backend() const;
  Backend regression_backend() const;

  friend bool operator==(EstimatorId, EstimatorId) = default;
  friend auto operator<=>(EstimatorId, EstimatorId) = default;

 private:
  int id_;
};

struct EstimateResult {
  double delta_hat = 0.0;
  double theta1_hat = 0.0;
  double theta0_hat = 0.0;
  /// Empty for estimates built from caller-supplied oracle nuisances.
  std::optional<EstimatorId> estimator;
  std::int64_t clipped_count = 0;
};

}  // namespace drate
