#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "specq/harness.hpp"

namespace specq {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("invalid model file: " + what);
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    bad(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

DistributionSpec parse_dist(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    bad("distribution needs a 'kind' tag");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "deterministic") return Deterministic(number(j, "v"));
  if (kind == "exponential") return Exponential(number(j, "rate"));
  if (kind == "uniform") return Uniform(number(j, "lo"), number(j, "hi"));
  if (kind == "bimodal")
    return Bimodal(number(j, "s_m"), number(j, "s_M"), number(j, "p"));
  if (kind == "hyperexponential") {
    if (!j.contains("weights") || !j.contains("rates"))
      bad("hyperexponential needs 'weights' and 'rates'");
    return HyperExponential(j.at("weights").get<std::vector<double>>(),
                            j.at("rates").get<std::vector<double>>());
  }
  if (kind == "pareto") return Pareto(number(j, "alpha"), number(j, "s_min"));
  if (kind == "truncated_pareto")
    return TruncatedPareto(number(j, "alpha"), number(j, "s_min"),
                           number(j, "cutoff"));
  if (kind == "erlang")
    return Erlang(static_cast<int>(number(j, "k")), number(j, "rate"));
  bad("unknown distribution kind '" + kind + "'");
}

RetryMode parse_mode(const json& j) {
  if (!j.contains("mode")) return RetryMode::kRestart;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "restart") return RetryMode::kRestart;
  if (mode == "identical") return RetryMode::kIdentical;
  if (mode == "resume") return RetryMode::kResume;
  bad("unknown retry mode '" + mode + "'");
}

SXModel parse_model_json(const json& j) {
  if (!j.is_object() || !j.contains("S"))
    bad("expected an object with an 'S' distribution");
  SXModel m;
  m.S = parse_dist(j.at("S"));
  m.X = j.contains("X") ? parse_dist(j.at("X")) : Deterministic(1.0);
  m.mode = parse_mode(j);
  return m;
}

json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) bad("not valid JSON");
  return j;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

SXModel parse_model(const std::string& json_text) {
  return parse_model_json(parse_text(json_text));
}

SXModel load_model(const std::string& path) {
  return parse_model(slurp(path));
}

Scheme parse_scheme_label(const std::string& label) {
  if (label == "slb") return Scheme::speculative();
  if (label == "rnd") return Scheme::random_dispatch();
  auto dashed = [&](const char* prefix) -> int {
    const std::string p = std::string(prefix) + "-";
    if (label.rfind(p, 0) != 0) return -1;
    try {
      std::size_t used = 0;
      const int d = std::stoi(label.substr(p.size()), &used);
      if (used != label.size() - p.size() || d < 1) return -1;
      return d;
    } catch (const std::exception&) {
      return -1;
    }
  };
  if (int d = dashed("coc"); d > 0) return Scheme::replicate(d);
  if (int d = dashed("cos"); d > 0) return Scheme::least_workload(d);
  if (int d = dashed("riq"); d > 0) return Scheme::replicate_to_idle(d);
  throw std::invalid_argument("unknown scheme label: " + label);
}

ExperimentSpec parse_experiment(const std::string& json_text) {
  const json j = parse_text(json_text);
  if (!j.is_object()) bad("experiment must be a JSON object");
  ExperimentSpec spec;
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (!j.contains("model")) bad("experiment needs a 'model'");
  spec.model = parse_model(j.at("model").dump());
  if (j.contains("schemes"))
    for (const auto& s : j.at("schemes"))
      spec.schemes.push_back(parse_scheme_label(s.get<std::string>()));
  if (spec.schemes.empty()) spec.schemes = {Scheme::speculative()};
  if (j.contains("lambda_grid"))
    spec.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  for (double l : spec.lambda_grid)
    if (!(l > 0)) bad("lambda_grid entries must be positive");
  if (j.contains("tau")) {
    if (j.at("tau").is_string()) {
      if (j.at("tau").get<std::string>() != "auto")
        bad("tau must be a number or \"auto\"");
      spec.auto_tau = true;
    } else {
      spec.tau = j.at("tau").get<double>();
      spec.auto_tau = false;
      if (!(spec.tau > 0)) bad("tau must be positive");
    }
  }
  if (j.contains("n_queues")) spec.n_queues = j.at("n_queues").get<int>();
  if (j.contains("n_jobs"))
    spec.n_jobs = j.at("n_jobs").get<std::uint64_t>();
  if (j.contains("replications"))
    spec.replications = j.at("replications").get<int>();
  if (spec.replications < 1) bad("replications must be at least 1");
  if (spec.n_queues < 1) bad("n_queues must be at least 1");
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  return parse_experiment(slurp(path));
}

}  // namespace specq
