#include "drate/parametric.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "drate/error.hpp"
#include "drate/numeric.hpp"

namespace drate {

namespace {

double log_likelihood(const Vector& eta, const IntVector& target) {
  CompensatedSum ll;
  for (Index i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) evaluated without overflow.
    const double softplus = std::max(eta[i], 0.0) + std::log1p(std::exp(-std::abs(eta[i])));
    ll.add(target[i] * eta[i] - softplus);
  }
  return ll.value();
}

Vector probabilities(const Vector& eta) {
  return eta.unaryExpr([](double t) { return logistic(t); });
}

}  // namespace

double LogisticFit::predict(const ConstVectorRef& x) const { return logistic(x.dot(beta_hat)); }

Vector logistic_score(const Matrix& design, const IntVector& target, const Vector& beta) {
  const Vector p = probabilities(design * beta);
  return design.transpose() * (target.cast<double>() - p);
}

LogisticFit fit_logistic(const Matrix& design, const IntVector& target,
                         const NewtonOptions& options) {
  const Index n = design.rows();
  const Index p = design.cols();
  if (target.size() != n) throw DataError("logistic target length does not match design");
  const Index ones = (target.array() == 1).count();
  if (ones == 0 || ones == n) {
    throw FitError(FitError::Kind::DegenerateTarget,
                   "degenerate target: all responses equal, no interior maximizer");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < p) {
    throw FitError(FitError::Kind::RankDeficient, "logistic design is rank deficient");
  }

  const Vector y = target.cast<double>();
  LogisticFit fit;
  fit.beta_hat = Vector::Zero(p);
  Vector eta = Vector::Zero(n);
  double ll = log_likelihood(eta, target);

  for (int iter = 0;; ++iter) {
    const Vector prob = probabilities(eta);
    const Vector gradient = design.transpose() * (y - prob);
    const Vector w = prob.array() * (1.0 - prob.array());
    fit.information = design.transpose() * w.asDiagonal() * design;
    fit.iterations = iter;
    if (gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;

    Eigen::LDLT<Matrix> ldlt(fit.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw FitError(FitError::Kind::RankDeficient, "singular information matrix in Newton step");
    }
    const Vector step = ldlt.solve(gradient);
    if (!step.allFinite()) {
      throw FitError(FitError::Kind::RankDeficient, "singular information matrix in Newton step");
    }

    double scale = 1.0;
    bool improved = false;
    Vector candidate;
    Vector candidate_eta;
    double candidate_ll = ll;
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      candidate = fit.beta_hat + scale * step;
      candidate_eta = design * candidate;
      candidate_ll = log_likelihood(candidate_eta, target);
      // Near the optimum the gain can fall below the rounding of ll.
      if (candidate_ll >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    fit.beta_hat = std::move(candidate);
    eta = std::move(candidate_eta);
    ll = candidate_ll;
    if (fit.beta_hat.lpNorm<Eigen::Infinity>() > options.separation_bound) {
      throw FitError(FitError::Kind::Separation,
                     "separation: coefficients diverge, no finite maximum likelihood estimate");
    }
  }
  fit.log_likelihood = ll;

  // If the fitted index classifies every row strictly correctly, scaling
  // beta_hat up raises the likelihood further, so no finite maximizer exists.
  bool separated = true;
  for (Index i = 0; i < n && separated; ++i) separated = target[i] == 1 ? eta[i] > 0.0 : eta[i] < 0.0;
  if (separated) {
    throw FitError(FitError::Kind::Separation,
                   "separation: the fitted index classifies every observation, no finite maximum "
                   "likelihood estimate");
  }
  return fit;
}

LogisticFit fit_logistic(const ObservationSet& obs, const NewtonOptions& options) {
  return fit_logistic(obs.covariates(), obs.treatments(), options);
}

LinearFit fit_linear(const Matrix& design, const IntVector& treatments, const Vector& outcomes,
                     Arm arm) {
  const int wanted = arm == Arm::Treated ? 1 : 0;
  const Index n_arm = (treatments.array() == wanted).count();
  const Index p = design.cols();
  if (n_arm == 0) {
    throw FitError(FitError::Kind::EmptyArm, std::string("the ") + to_string(arm) + " arm is empty");
  }
  if (n_arm < p) {
    throw FitError(FitError::Kind::RankDeficient,
                   std::string("the ") + to_string(arm) + " arm has " + std::to_string(n_arm) +
                       " rows, fewer than the " + std::to_string(p) + " design columns");
  }

  Matrix xa(n_arm, p);
  Vector ya(n_arm);
  for (Index i = 0, r = 0; i < design.rows(); ++i) {
    if (treatments[i] != wanted) continue;
    xa.row(r) = design.row(i);
    ya[r] = outcomes[i];
    ++r;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(xa);
  if (qr.rank() < p) {
    throw FitError(FitError::Kind::RankDeficient,
                   std::string("the ") + to_string(arm) + " arm design is rank deficient");
  }

  LinearFit fit;
  fit.gamma_hat = qr.solve(ya);
  fit.arm = arm;
  fit.n_arm = n_arm;
  fit.sigma2_hat = (ya - xa * fit.gamma_hat).squaredNorm() / static_cast<double>(n_arm);
  return fit;
}

LinearFit fit_linear(const ObservationSet& obs, Arm arm) {
  return fit_linear(obs.covariates(), obs.treatments(), obs.outcomes(), arm);
}

void to_json(nlohmann::json& j, const LogisticFit& fit) {
  j = nlohmann::json{{"beta_hat", std::vector<double>(fit.beta_hat.begin(), fit.beta_hat.end())},
                     {"converged", fit.converged},
                     {"iterations", fit.iterations},
                     {"log_likelihood", fit.log_likelihood}};
}

void to_json(nlohmann::json& j, const LinearFit& fit) {
  j = nlohmann::json{{"gamma_hat", std::vector<double>(fit.gamma_hat.begin(), fit.gamma_hat.end())},
                     {"sigma2_hat", fit.sigma2_hat},
                     {"arm", to_string(fit.arm)},
                     {"n_arm", fit.n_arm}};
}

double evaluate_perturbation(Perturbation s, const ConstVectorRef& x) {
  switch (s) {
    case Perturbation::Sine:
      return std::sin(x[0]);
    case Perturbation::Square:
      return x[0] * x[0];
    case Perturbation::TanhProduct:
      return std::tanh(x[0] * x[1]);
    case Perturbation::Unit:
      return 1.0;
  }
  return 0.0;
}

const char* to_string(Perturbation s) {
  switch (s) {
    case Perturbation::Sine:
      return "sin";
    case Perturbation::Square:
      return "square";
    case Perturbation::TanhProduct:
      return "tanh_product";
    case Perturbation::Unit:
      return "unit";
  }
  return "unknown";
}

Perturbation perturbation_from_string(const std::string& name) {
  for (auto s : {Perturbation::Sine, Perturbation::Square, Perturbation::TanhProduct,
                 Perturbation::Unit}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown perturbation '" + name + "' (expected sin, square, tanh_product, unit)");
}

CovariateFunction apply_local_misspec(CovariateFunction truth, const MisspecSpec& spec,
                                      double clip) {
  const double delta = spec.delta;
  const Perturbation s = spec.s;
  switch (spec.mode) {
    case MisspecMode::LocalPS:
      return [truth = std::move(truth), delta, s, clip](const ConstVectorRef& x) {
        const double p = truth(x) * (1.0 + delta * evaluate_perturbation(s, x));
        if (!(p > clip && p < 1.0 - clip)) {
          throw FitError(FitError::Kind::OutOfRange,
                         "perturbed propensity " + std::to_string(p) + " leaves (" +
                             std::to_string(clip) + ", " + std::to_string(1.0 - clip) + ")");
        }
        return p;
      };
    case MisspecMode::LocalOR:
      return [truth = std::move(truth), delta, s](const ConstVectorRef& x) {
        return truth(x) + delta * evaluate_perturbation(s, x);
      };
    case MisspecMode::None:
    case MisspecMode::GlobalZ:
      break;
  }
  throw ConfigError("apply_local_misspec needs a LocalPS or LocalOR spec");
}

}  // namespace drate
