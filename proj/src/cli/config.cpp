#include "conquer/cli/config.hpp"

#include <fstream>
#include <set>

#include "conquer/error.hpp"

namespace conquer::cli {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "delta_hi", "delta_lo", "negatives_per_row", "epsilon", "max_iters", "tolerance",
      "cost_kind", "alpha", "beta", "temperature", "margin", "k", "psi", "xi", "tau", "eta",
      "gamma", "beta_bonus", "safeguard_drop", "query_len_min", "activation_threshold",
      "max_in_flight", "seed"};
  return keys;
}

double number(const json& j, const std::string& key) {
  if (!j.is_number()) fail(Errc::ConfigError, "'" + key + "' must be a number");
  return j.get<double>();
}

std::uint64_t count(const json& j, const std::string& key) {
  const bool ok = j.is_number_unsigned() ||
                  (j.is_number_integer() && j.get<std::int64_t>() >= 0);
  if (!ok) fail(Errc::ConfigError, "'" + key + "' must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(thresholds.delta_lo < thresholds.delta_hi)) {
    fail(Errc::ConfigError, "delta_lo must be below delta_hi");
  }
  if (negatives_per_row == 0) fail(Errc::ConfigError, "negatives_per_row must be positive");
  if (!(sinkhorn.epsilon > 0.0)) fail(Errc::ConfigError, "epsilon must be positive");
  if (sinkhorn.max_iters <= 0) fail(Errc::ConfigError, "max_iters must be positive");
  if (!(sinkhorn.tolerance > 0.0)) fail(Errc::ConfigError, "tolerance must be positive");
  try {
    loss.validate();
  } catch (const Error& e) {
    fail(Errc::ConfigError, e.what());
  }
  iqe.validate();
}

void PipelineConfig::apply_paper_defaults() {
  loss.alpha = 0.5;
  loss.beta = 0.1;
  iqe.anchor.k = 5;
  iqe.anchor.psi = 0.90;
  iqe.anchor.xi = 0.85;
  iqe.tau = 0.85;
  iqe.eta = 0.5;
  iqe.fusion.gamma = 0.6;
}

json PipelineConfig::to_json() const {
  json j;
  j["delta_hi"] = thresholds.delta_hi;
  j["delta_lo"] = thresholds.delta_lo;
  j["negatives_per_row"] = negatives_per_row;
  j["epsilon"] = sinkhorn.epsilon;
  j["max_iters"] = sinkhorn.max_iters;
  j["tolerance"] = sinkhorn.tolerance;
  j["cost_kind"] = cost_kind == CostKind::CosineDistance ? "cosine_distance" : "bilinear";
  j["alpha"] = loss.alpha;
  j["beta"] = loss.beta;
  j["temperature"] = loss.temperature;
  j["margin"] = loss.margin;
  j["k"] = iqe.anchor.k;
  j["psi"] = iqe.anchor.psi;
  j["xi"] = iqe.anchor.xi;
  j["tau"] = iqe.tau;
  j["eta"] = iqe.eta;
  j["gamma"] = iqe.fusion.gamma;
  j["beta_bonus"] = iqe.fusion.beta_bonus;
  j["safeguard_drop"] = iqe.fusion.safeguard_drop;
  j["query_len_min"] = iqe.query_len_min;
  j["activation_threshold"] =
      iqe.activation_threshold ? json(*iqe.activation_threshold) : json(nullptr);
  j["max_in_flight"] = iqe.max_in_flight;
  j["seed"] = seed;
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j, const PipelineConfig& base) {
  if (!j.is_object()) fail(Errc::ConfigError, "config must be a flat JSON object");
  for (const auto& [key, _] : j.items()) {
    if (known_keys().count(key) == 0) fail(Errc::ConfigError, "unknown config key '" + key + "'");
  }
  PipelineConfig c = base;
  auto get = [&](const char* key, auto&& apply) {
    if (j.contains(key)) apply(j.at(key), std::string(key));
  };
  get("delta_hi", [&](const json& v, const std::string& k) { c.thresholds.delta_hi = number(v, k); });
  get("delta_lo", [&](const json& v, const std::string& k) { c.thresholds.delta_lo = number(v, k); });
  get("negatives_per_row", [&](const json& v, const std::string& k) { c.negatives_per_row = count(v, k); });
  get("epsilon", [&](const json& v, const std::string& k) { c.sinkhorn.epsilon = number(v, k); });
  get("max_iters", [&](const json& v, const std::string& k) {
    c.sinkhorn.max_iters = static_cast<int>(count(v, k));
  });
  get("tolerance", [&](const json& v, const std::string& k) { c.sinkhorn.tolerance = number(v, k); });
  get("cost_kind", [&](const json& v, const std::string&) {
    if (v == "cosine_distance") {
      c.cost_kind = CostKind::CosineDistance;
    } else if (v == "bilinear") {
      c.cost_kind = CostKind::Bilinear;
    } else {
      fail(Errc::ConfigError, "cost_kind must be \"cosine_distance\" or \"bilinear\"");
    }
  });
  get("alpha", [&](const json& v, const std::string& k) { c.loss.alpha = number(v, k); });
  get("beta", [&](const json& v, const std::string& k) { c.loss.beta = number(v, k); });
  get("temperature", [&](const json& v, const std::string& k) { c.loss.temperature = number(v, k); });
  get("margin", [&](const json& v, const std::string& k) { c.loss.margin = number(v, k); });
  get("k", [&](const json& v, const std::string& k) { c.iqe.anchor.k = count(v, k); });
  get("psi", [&](const json& v, const std::string& k) { c.iqe.anchor.psi = number(v, k); });
  get("xi", [&](const json& v, const std::string& k) { c.iqe.anchor.xi = number(v, k); });
  get("tau", [&](const json& v, const std::string& k) { c.iqe.tau = number(v, k); });
  get("eta", [&](const json& v, const std::string& k) { c.iqe.eta = number(v, k); });
  get("gamma", [&](const json& v, const std::string& k) { c.iqe.fusion.gamma = number(v, k); });
  get("beta_bonus", [&](const json& v, const std::string& k) { c.iqe.fusion.beta_bonus = number(v, k); });
  get("safeguard_drop", [&](const json& v, const std::string& k) {
    c.iqe.fusion.safeguard_drop = number(v, k);
  });
  get("query_len_min", [&](const json& v, const std::string& k) { c.iqe.query_len_min = count(v, k); });
  get("activation_threshold", [&](const json& v, const std::string& k) {
    if (v.is_null()) {
      c.iqe.activation_threshold.reset();
    } else {
      c.iqe.activation_threshold = number(v, k);
    }
  });
  get("max_in_flight", [&](const json& v, const std::string& k) { c.iqe.max_in_flight = count(v, k); });
  get("seed", [&](const json& v, const std::string& k) { c.seed = count(v, k); });
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path,
                                         const PipelineConfig& base) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j, base);
}

PipelineConfig PipelineConfig::from_json(const json& j) { return from_json(j, PipelineConfig{}); }

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  return from_file(path, PipelineConfig{});
}

}  // namespace conquer::cli
