#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace dcopt::cli {

namespace {

using Json = nlohmann::json;

std::string_view to_string(ColdStartMode m) {
  return m == ColdStartMode::InverseReactance ? "reactance" : "susceptance";
}

std::string_view to_string(DegeneracyPolicy p) { return p == DegeneracyPolicy::Strict ? "strict" : "resolve"; }

template <typename T>
T get(const Json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw Error(Errc::InvalidConfig, "config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_count(const Json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw Error(Errc::InvalidConfig, "config key '" + key + "' must be a nonnegative integer");
  return static_cast<T>(v.get<long long>());
}

}  // namespace

TrainConfig parse_train_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");

  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "train_count") c.train_count = get_count<std::size_t>(v, key);
    else if (key == "test_count") c.test_count = get_count<std::size_t>(v, key);
    else if (key == "sigma") c.sigma = get<double>(v, key);
    else if (key == "seed") c.seed = get_count<std::uint64_t>(v, key);
    else if (key == "init") c.init = parse_init_mode(get<std::string>(v, key));
    else if (key == "cold_mode") {
      const auto m = get<std::string>(v, key);
      if (m == "susceptance") c.cold_mode = ColdStartMode::SeriesSusceptance;
      else if (m == "reactance") c.cold_mode = ColdStartMode::InverseReactance;
      else throw Error(Errc::InvalidConfig, "cold_mode must be 'susceptance' or 'reactance'");
    }
    else if (key == "tol") c.tnc.tol = get<double>(v, key);
    else if (key == "max_iter") c.tnc.max_iter = get_count<int>(v, key);
    else if (key == "wolfe_c1") c.tnc.wolfe_c1 = get<double>(v, key);
    else if (key == "wolfe_c2") c.tnc.wolfe_c2 = get<double>(v, key);
    else if (key == "cg_max_iter") c.tnc.cg_max_iter = get_count<int>(v, key);
    else if (key == "cg_tol") c.tnc.cg_tol = get<double>(v, key);
    else if (key == "hessian_step") c.tnc.hessian_step = get<double>(v, key);
    else if (key == "min_step") c.tnc.min_step = get<double>(v, key);
    else if (key == "diagonal_preconditioner") c.tnc.diagonal_preconditioner = get<bool>(v, key);
    else if (key == "qp_tol") c.loss.qp.tol = get<double>(v, key);
    else if (key == "qp_max_iter") c.loss.qp.max_iter = get_count<int>(v, key);
    else if (key == "act_tol") c.loss.qp.act_tol = get<double>(v, key);
    else if (key == "degeneracy") {
      const auto p = get<std::string>(v, key);
      if (p == "resolve") c.loss.kkt.policy = DegeneracyPolicy::Resolve;
      else if (p == "strict") c.loss.kkt.policy = DegeneracyPolicy::Strict;
      else throw Error(Errc::InvalidConfig, "degeneracy must be 'resolve' or 'strict'");
    }
    else throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_train_config(s.str());
}

std::string canonical_config(const TrainConfig& c) {
  Json j;  // std::map-backed, so keys come out sorted
  j["train_count"] = c.train_count;
  j["test_count"] = c.test_count;
  j["sigma"] = c.sigma;
  j["seed"] = c.seed;
  j["init"] = std::string(to_string(c.init));
  j["cold_mode"] = std::string(to_string(c.cold_mode));
  j["tol"] = c.tnc.tol;
  j["max_iter"] = c.tnc.max_iter;
  j["wolfe_c1"] = c.tnc.wolfe_c1;
  j["wolfe_c2"] = c.tnc.wolfe_c2;
  j["cg_max_iter"] = c.tnc.cg_max_iter;
  j["cg_tol"] = c.tnc.cg_tol;
  j["hessian_step"] = c.tnc.hessian_step;
  j["min_step"] = c.tnc.min_step;
  j["diagonal_preconditioner"] = c.tnc.diagonal_preconditioner;
  j["qp_tol"] = c.loss.qp.tol;
  j["qp_max_iter"] = c.loss.qp.max_iter;
  j["act_tol"] = c.loss.qp.act_tol;
  j["degeneracy"] = std::string(to_string(c.loss.kkt.policy));
  return j.dump();
}

}  // namespace dcopt::cli
