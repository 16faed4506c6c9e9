#include "drate/scenario_io.hpp"

#include <fstream>
#include <set>

#include "drate/error.hpp"

namespace drate {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected an array of numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

MisspecKind kind_from_string(const std::string& s, const std::string& where) {
  for (auto k : {MisspecKind::Correct, MisspecKind::Global, MisspecKind::ZOnly,
                 MisspecKind::WrongIndex, MisspecKind::Local}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError(where + ": unknown misspecification \"" + s + "\"");
}

Perturbation perturbation(const json& j, const char* key, const std::string& where) {
  try {
    return perturbation_from_string(get<std::string>(j, key, where));
  } catch (const Error& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

PropensityMisspec ps_from_json(const json& j) {
  const std::string where = "ps_misspec";
  PropensityMisspec m;
  if (j.is_string()) {
    m.kind = kind_from_string(j.get<std::string>(), where);
    if (m.kind == MisspecKind::Local) throw ConfigError(where + ": local needs delta and s");
    return m;
  }
  reject_unknown(j, {"kind", "delta", "s"}, where);
  m.kind = kind_from_string(get<std::string>(j, "kind", where), where);
  if (m.kind == MisspecKind::Local) {
    m.delta = get<double>(j, "delta", where);
    m.s = perturbation(j, "s", where);
  }
  return m;
}

RegressionMisspec or_from_json(const json& j) {
  const std::string where = "or_misspec";
  RegressionMisspec m;
  if (j.is_string()) {
    m.kind = kind_from_string(j.get<std::string>(), where);
    if (m.kind == MisspecKind::Local) throw ConfigError(where + ": local needs delta1/delta0 and s1/s0");
    return m;
  }
  reject_unknown(j, {"kind", "delta1", "delta0", "s1", "s0"}, where);
  m.kind = kind_from_string(get<std::string>(j, "kind", where), where);
  if (m.kind == MisspecKind::Local) {
    maybe(j, "delta1", m.delta1, where);
    maybe(j, "delta0", m.delta0, where);
    if (j.contains("s1")) m.s1 = perturbation(j, "s1", where);
    if (j.contains("s0")) m.s0 = perturbation(j, "s0", where);
  }
  return m;
}

void rule_from_json(const json& j, KernelConfig& cfg, const std::string& where) {
  reject_unknown(j, {"c", "h"}, where);
  if (j.contains("c") && j.contains("h")) throw ConfigError(where + ": give either c or h");
  if (j.contains("h")) {
    cfg.rule = FixedBandwidth{get<double>(j, "h", where)};
  } else if (j.contains("c")) {
    cfg.rule = RuleOfThumb{get<double>(j, "c", where)};
  }
}

json rule_to_json(const KernelConfig& cfg) {
  if (const auto* f = std::get_if<FixedBandwidth>(&cfg.rule)) return {{"h", f->h}};
  return {{"c", std::get<RuleOfThumb>(cfg.rule).c}};
}

DesignSpec design_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"intercept", "map"}, where);
  DesignSpec d;
  maybe(j, "intercept", d.intercept, where);
  if (j.contains("map")) {
    const auto map = get<std::string>(j, "map", where);
    if (map == "identity") {
      d.map = CovariateMap::Identity;
    } else if (map == "z") {
      d.map = CovariateMap::ZTransform;
    } else {
      throw ConfigError(where + ".map: expected \"identity\" or \"z\"");
    }
  }
  return d;
}

}  // namespace

std::vector<EstimatorId> estimators_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("estimators: expected an array of integers 1-9");
  std::vector<EstimatorId> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw ConfigError("estimators: expected an array of integers 1-9");
    out.emplace_back(v.get<int>());
  }
  return out;
}

KernelSettings kernels_from_json(const json& j) {
  reject_unknown(j,
                 {"propensity_index", "treated_index", "control_index", "propensity_multivariate",
                  "regression_multivariate"},
                 "kernels");
  KernelSettings k;
  auto read = [&](const char* key, KernelConfig& cfg) {
    if (j.contains(key)) rule_from_json(j.at(key), cfg, std::string("kernels.") + key);
  };
  read("propensity_index", k.propensity_index);
  read("treated_index", k.treated_index);
  read("control_index", k.control_index);
  read("propensity_multivariate", k.propensity_multivariate);
  read("regression_multivariate", k.regression_multivariate);
  return k;
}

json kernels_to_json(const KernelSettings& k) {
  return {{"propensity_index", rule_to_json(k.propensity_index)},
          {"treated_index", rule_to_json(k.treated_index)},
          {"control_index", rule_to_json(k.control_index)},
          {"propensity_multivariate", rule_to_json(k.propensity_multivariate)},
          {"regression_multivariate", rule_to_json(k.regression_multivariate)}};
}

ScenarioConfig scenario_from_json(const json& j) {
  const std::string where = "scenario";
  reject_unknown(j,
                 {"n", "p", "reps", "seed", "beta", "mu1", "mu0", "s1", "target_untreated",
                  "estimators", "ps_misspec", "or_misspec", "kernels", "clip",
                  "calibration_draws", "max_failure_fraction"},
                 where);
  ScenarioConfig c;
  maybe(j, "n", c.n, where);
  maybe(j, "p", c.p, where);
  maybe(j, "reps", c.reps, where);
  maybe(j, "seed", c.seed, where);
  maybe(j, "mu1", c.mu1, where);
  maybe(j, "mu0", c.mu0, where);
  maybe(j, "s1", c.s1, where);
  maybe(j, "target_untreated", c.target_untreated, where);
  maybe(j, "clip", c.clip, where);
  maybe(j, "calibration_draws", c.calibration_draws, where);
  maybe(j, "max_failure_fraction", c.max_failure_fraction, where);
  if (j.contains("beta")) c.beta = vector_from_json(j.at("beta"), "scenario.beta");
  if (j.contains("estimators")) c.estimators = estimators_from_json(j.at("estimators"));
  if (j.contains("ps_misspec")) c.ps_misspec = ps_from_json(j.at("ps_misspec"));
  if (j.contains("or_misspec")) c.or_misspec = or_from_json(j.at("or_misspec"));
  if (j.contains("kernels")) c.kernels = kernels_from_json(j.at("kernels"));
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["beta"] = vector_to_json(c.beta.size() == 0 ? default_beta(c.p) : c.beta);
  j["mu1"] = c.mu1;
  j["mu0"] = c.mu0;
  j["s1"] = c.s1;
  j["target_untreated"] = c.target_untreated;
  json ids = json::array();
  for (auto id : c.estimators.empty() ? default_estimators(c.ps_misspec, c.or_misspec) : c.estimators) {
    ids.push_back(id.value());
  }
  j["estimators"] = ids;
  if (c.ps_misspec.kind == MisspecKind::Local) {
    j["ps_misspec"] = {{"kind", "local"}, {"delta", c.ps_misspec.delta}, {"s", to_string(c.ps_misspec.s)}};
  } else {
    j["ps_misspec"] = to_string(c.ps_misspec.kind);
  }
  if (c.or_misspec.kind == MisspecKind::Local) {
    j["or_misspec"] = {{"kind", "local"},
                       {"delta1", c.or_misspec.delta1},
                       {"delta0", c.or_misspec.delta0},
                       {"s1", to_string(c.or_misspec.s1)},
                       {"s0", to_string(c.or_misspec.s0)}};
  } else {
    j["or_misspec"] = to_string(c.or_misspec.kind);
  }
  j["kernels"] = kernels_to_json(c.kernels);
  j["clip"] = c.clip;
  j["calibration_draws"] = c.calibration_draws;
  j["max_failure_fraction"] = c.max_failure_fraction;
  return j;
}

EstimateConfig estimate_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "estimate";
  reject_unknown(j,
                 {"data", "treatment", "outcome", "covariates", "estimators", "directions",
                  "kernels", "propensity_design", "regression_design", "clip"},
                 where);
  EstimateConfig c;
  c.data = get<std::string>(j, "data", where);
  if (c.data.is_relative() && !base_dir.empty()) c.data = base_dir / c.data;
  maybe(j, "treatment", c.schema.treatment, where);
  maybe(j, "outcome", c.schema.outcome, where);
  maybe(j, "covariates", c.schema.covariates, where);
  if (j.contains("estimators")) c.estimators = estimators_from_json(j.at("estimators"));
  if (j.contains("directions")) {
    const auto& d = j.at("directions");
    reject_unknown(d, {"alpha", "alpha1", "alpha0"}, "estimate.directions");
    try {
      c.options.directions = IndexDirections::create(
          vector_from_json(d.at("alpha"), "estimate.directions.alpha"),
          vector_from_json(d.at("alpha1"), "estimate.directions.alpha1"),
          vector_from_json(d.at("alpha0"), "estimate.directions.alpha0"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("estimate.directions: ") + e.what());
    } catch (const DataError& e) {
      throw ConfigError(std::string("estimate.directions: ") + e.what());
    }
  }
  if (j.contains("kernels")) c.options.kernels = kernels_from_json(j.at("kernels"));
  if (j.contains("propensity_design")) {
    c.options.propensity_design = design_from_json(j.at("propensity_design"), "estimate.propensity_design");
  }
  if (j.contains("regression_design")) {
    c.options.regression_design = design_from_json(j.at("regression_design"), "estimate.regression_design");
  }
  maybe(j, "clip", c.options.clip, where);
  if (!(c.options.clip > 0.0 && c.options.clip < 0.5)) throw ConfigError("estimate.clip must lie in (0, 0.5)");
  if (c.estimators.empty()) {
    const int last = c.options.directions ? 9 : 4;
    for (int k = 1; k <= last; ++k) c.estimators.emplace_back(k);
  }
  return c;
}

void to_json(json& j, const EstimateResult& r) {
  j = {{"delta_hat", r.delta_hat},
       {"theta1_hat", r.theta1_hat},
       {"theta0_hat", r.theta0_hat},
       {"clipped_count", r.clipped_count}};
  j["estimator"] = r.estimator ? json(r.estimator->value()) : json(nullptr);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace drate
