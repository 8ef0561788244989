#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "isocrit/cli.hpp"
#include "isocrit/error.hpp"

namespace isocrit::cli {

using nlohmann::json;
using namespace isocrit::simlab;

namespace {

const char* sigmoid_name(Sigmoid s) {
  switch (s) {
    case Sigmoid::S1: return "S1";
    case Sigmoid::S2: return "S2";
    case Sigmoid::S3: return "S3";
  }
  return "S1";
}

Sigmoid parse_sigmoid(const std::string& s) {
  if (s == "S1") return Sigmoid::S1;
  if (s == "S2") return Sigmoid::S2;
  if (s == "S3") return Sigmoid::S3;
  throw CliError(kExitBadInput, "unknown sigmoid '" + s + "' (expected S1, S2 or S3)");
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw CliError(kExitBadInput, where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw CliError(kExitBadInput, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json tally_json(const MethodTally& t) {
  return {{"proportion_unconstrained", t.proportion()},
          {"std_error", t.std_error()},
          {"unconstrained", t.unconstrained},
          {"decided", t.decided},
          {"unavailable", t.unavailable}};
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["domains"] = c.domains;
  j["sigmoid"] = sigmoid_name(c.sigmoid);
  j["shape"] = {{"kind", c.shape.kind == Shape::Kind::Pulldown ? "pulldown" : "offset"},
                {"amount", c.shape.amount}};
  j["distribution"] = c.distribution == Distribution::Normal ? "normal" : "chi_square";
  j["sigma"] = c.sigma;
  j["population_size"] = c.population_size;
  if (const auto* s = std::get_if<StratifiedAllocation>(&c.design)) {
    j["design"] = {{"type", "stratified"}, {"allocation", s->per_stratum}};
  } else {
    const auto& cl = std::get<ClusterAllocation>(c.design);
    j["design"] = {
        {"type", "cluster"}, {"total_clusters", cl.total_clusters}, {"sampled", cl.sampled}};
  }
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["flavor"] = c.flavor == Flavor::Hajek ? "hajek" : "horvitz_thompson";
  j["penalty"] = c.penalty;
  j["run_tests"] = c.run_tests;
  j["conditional_draws"] = c.conditional_draws;
  j["test_level"] = c.test_level;
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  try {
    reject_unknown_keys(j,
                        {"name", "domains", "sigmoid", "shape", "distribution", "sigma",
                         "population_size", "design", "reps", "seed", "flavor", "penalty",
                         "run_tests", "conditional_draws", "test_level"},
                        "scenario");
    read_if(j, "name", c.name);
    read_if(j, "domains", c.domains);
    if (j.contains("sigmoid")) c.sigmoid = parse_sigmoid(j.at("sigmoid").get<std::string>());
    if (j.contains("shape")) {
      const auto& s = j.at("shape");
      reject_unknown_keys(s, {"kind", "amount"}, "shape");
      const auto kind = s.value("kind", std::string("pulldown"));
      if (kind == "pulldown") {
        c.shape.kind = Shape::Kind::Pulldown;
      } else if (kind == "offset") {
        c.shape.kind = Shape::Kind::Offset;
      } else {
        throw CliError(kExitBadInput, "unknown shape kind '" + kind + "'");
      }
      c.shape.amount = s.value("amount", 0.0);
    }
    if (j.contains("distribution")) {
      const auto d = j.at("distribution").get<std::string>();
      if (d == "normal") {
        c.distribution = Distribution::Normal;
      } else if (d == "chi_square") {
        c.distribution = Distribution::ChiSquare;
      } else {
        throw CliError(kExitBadInput, "unknown distribution '" + d + "'");
      }
    }
    read_if(j, "sigma", c.sigma);
    read_if(j, "population_size", c.population_size);
    if (j.contains("design")) {
      const auto& d = j.at("design");
      reject_unknown_keys(d, {"type", "allocation", "total_clusters", "sampled"}, "design");
      const auto type = d.at("type").get<std::string>();
      if (type == "stratified") {
        c.design = StratifiedAllocation{d.at("allocation").get<std::vector<int>>()};
      } else if (type == "cluster") {
        ClusterAllocation cl;
        read_if(d, "total_clusters", cl.total_clusters);
        read_if(d, "sampled", cl.sampled);
        c.design = cl;
      } else {
        throw CliError(kExitBadInput, "unknown design type '" + type + "'");
      }
    }
    read_if(j, "reps", c.reps);
    read_if(j, "seed", c.seed);
    if (j.contains("flavor")) {
      const auto f = j.at("flavor").get<std::string>();
      if (f == "hajek") {
        c.flavor = Flavor::Hajek;
      } else if (f == "horvitz_thompson") {
        c.flavor = Flavor::HorvitzThompson;
      } else {
        throw CliError(kExitBadInput, "unknown flavor '" + f + "'");
      }
    }
    read_if(j, "penalty", c.penalty);
    read_if(j, "run_tests", c.run_tests);
    read_if(j, "conditional_draws", c.conditional_draws);
    read_if(j, "test_level", c.test_level);
  } catch (const json::exception& e) {
    throw CliError(kExitBadInput, std::string("invalid scenario: ") + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw CliError(kExitBadInput, std::string("invalid scenario: ") + e.what());
  }
  return c;
}

json to_json(const SimulationSummary& s) {
  json j;
  j["name"] = s.name;
  j["reps_requested"] = s.reps_requested;
  j["reps_used"] = s.reps_used;
  j["empty_domain_reps"] = s.empty_domain_reps;
  j["monotone_reps"] = s.monotone_reps;
  j["proportions"] = {{"cic", tally_json(s.cic)},
                      {"wald", tally_json(s.wald)},
                      {"conditional", tally_json(s.conditional)}};
  j["mse"] = {{"unconstrained", s.mse_unconstrained},
              {"constrained", s.mse_constrained},
              {"adaptive", s.mse_adaptive},
              {"se_unconstrained", s.se_mse_unconstrained},
              {"se_constrained", s.se_mse_constrained},
              {"se_adaptive", s.se_mse_adaptive}};
  j["mse_ratios"] = {{"constrained", s.ratio_constrained},
                     {"adaptive", s.ratio_adaptive},
                     {"se_constrained", s.se_ratio_constrained},
                     {"se_adaptive", s.se_ratio_adaptive}};
  return j;
}

ScenarioConfig resolve_scenario(const std::string& name) {
  if (name.rfind("table", 0) == 0) {
    const auto slash = name.find('/');
    const std::string head = name.substr(0, slash);
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(head.substr(5), &used);
      if (used != head.size() - 5) id = 0;
    } catch (const std::exception&) {
      id = 0;
    }
    if (id >= 1 && id <= 11) {
      const auto preset = table_preset(id);
      if (slash == std::string::npos) return preset.cells.front().config;
      for (const auto& cell : preset.cells) {
        if (cell.config.name == name) return cell.config;
      }
    }
  }
  if (std::filesystem::is_regular_file(name)) {
    std::ifstream in(name);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CliError(kExitBadInput, "cannot parse scenario file '" + name + "': " + e.what());
    }
    return scenario_from_json(j);
  }
  throw CliError(kExitBadInput, "unknown scenario '" + name + "'");
}

unsigned worker_threads() {
  if (const char* env = std::getenv("ISOCRIT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw CliError(kExitBadInput, std::string("ISOCRIT_THREADS must be a positive integer, got '") +
                                      env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace isocrit::cli
