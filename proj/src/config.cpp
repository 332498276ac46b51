#include "hswarm/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "hswarm/errors.hpp"

namespace hswarm {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

void reject_unknown(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError(prefix.empty() ? k : prefix + "." + k, "unknown key");
}

double get_real(const json& obj, const std::string& k, const std::string& full, double def) {
  if (!obj.contains(k)) return def;
  if (!obj[k].is_number()) throw ConfigError(full, "must be a number");
  double v = obj[k].get<double>();
  if (!std::isfinite(v)) throw ConfigError(full, "must be finite");
  return v;
}

std::size_t get_count(const json& obj, const std::string& k, const std::string& full, std::size_t def) {
  if (!obj.contains(k)) return def;
  if (!obj[k].is_number_integer() || obj[k].get<long long>() < 0) throw ConfigError(full, "must be a non-negative integer");
  return obj[k].get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& k, const std::string& full, const std::string& def) {
  if (!obj.contains(k)) return def;
  if (!obj[k].is_string()) throw ConfigError(full, "must be a string");
  return obj[k].get<std::string>();
}

PsoHyperparams parse_pso(const json& obj, const std::string& prefix) {
  reject_unknown(obj, prefix, {"step_length", "inertia", "cognitive", "social", "repel"});
  PsoHyperparams hp;
  hp.step_length = get_real(obj, "step_length", prefix + ".step_length", hp.step_length);
  hp.inertia = get_real(obj, "inertia", prefix + ".inertia", hp.inertia);
  hp.cognitive = get_real(obj, "cognitive", prefix + ".cognitive", hp.cognitive);
  hp.social = get_real(obj, "social", prefix + ".social", hp.social);
  hp.repel = get_real(obj, "repel", prefix + ".repel", hp.repel);
  return hp;
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    doc = json::object();
  } else {
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("<root>", "not valid JSON");
  }
  reject_unknown(doc, "",
                 {"n_experts", "N", "M", "top_p", "max_iterations", "patience", "role_pso", "weight_pso", "sparsity",
                  "dropout", "mode", "pool", "seed", "jobs", "utility"});

  AppConfig cfg;
  auto& r = cfg.run;
  r.n_experts = get_count(doc, "n_experts", "n_experts", r.n_experts);
  r.swarm_size = get_count(doc, "N", "N", r.swarm_size);
  r.assignments = get_count(doc, "M", "M", r.assignments);
  r.top_p = get_real(doc, "top_p", "top_p", r.top_p);
  r.max_iterations = get_count(doc, "max_iterations", "max_iterations", r.max_iterations);
  r.patience = get_count(doc, "patience", "patience", r.patience);
  if (doc.contains("role_pso")) r.role_pso = parse_pso(doc["role_pso"], "role_pso");
  if (doc.contains("weight_pso")) r.weight_pso = parse_pso(doc["weight_pso"], "weight_pso");
  if (doc.contains("sparsity")) {
    const auto& s = doc["sparsity"];
    reject_unknown(s, "sparsity", {"mode", "tau", "l1_coeff"});
    try {
      r.sparsity.mode = sparsity_mode_from_string(get_string(s, "mode", "sparsity.mode", "none"));
    } catch (const ContractViolation& e) {
      throw ConfigError("sparsity.mode", e.what());
    }
    r.sparsity.tau = get_real(s, "tau", "sparsity.tau", r.sparsity.tau);
    r.sparsity.l1_coeff = get_real(s, "l1_coeff", "sparsity.l1_coeff", r.sparsity.l1_coeff);
  }
  if (doc.contains("dropout")) {
    const auto& d = doc["dropout"];
    reject_unknown(d, "dropout", {"d_r", "d_w"});
    r.dropout.role = get_real(d, "d_r", "dropout.d_r", r.dropout.role);
    r.dropout.weight = get_real(d, "d_w", "dropout.d_w", r.dropout.weight);
  }
  if (doc.contains("mode")) r.mode = run_mode_from_string(get_string(doc, "mode", "mode", "full"));
  r.pool = {r.n_experts, 1};
  if (doc.contains("pool")) {
    const auto& p = doc["pool"];
    reject_unknown(p, "pool", {"distinct", "repeats"});
    r.pool.distinct = get_count(p, "distinct", "pool.distinct", r.n_experts);
    r.pool.repeats = get_count(p, "repeats", "pool.repeats", 1);
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
      throw ConfigError("seed", "must be a non-negative integer");
    r.seed = doc["seed"].get<std::uint64_t>();
  }
  r.jobs = get_count(doc, "jobs", "jobs", r.jobs);

  if (doc.contains("utility")) {
    const auto& u = doc["utility"];
    reject_unknown(u, "utility",
                   {"name", "dim", "dataset_size", "pool_noise", "value", "hidden", "dataset", "endpoints",
                    "timeout_ms", "retries"});
    auto& us = cfg.utility;
    us.name = get_string(u, "name", "utility.name", us.name);
    us.dim = get_count(u, "dim", "utility.dim", us.dim);
    us.dataset_size = get_count(u, "dataset_size", "utility.dataset_size", us.dataset_size);
    us.pool_noise = get_real(u, "pool_noise", "utility.pool_noise", us.pool_noise);
    us.value = get_real(u, "value", "utility.value", us.value);
    if (u.contains("hidden")) us.hidden = u["hidden"];
    us.dataset = get_string(u, "dataset", "utility.dataset", us.dataset);
    if (u.contains("endpoints")) {
      if (!u["endpoints"].is_array()) throw ConfigError("utility.endpoints", "must be an array of URLs");
      for (const auto& e : u["endpoints"]) {
        if (!e.is_string()) throw ConfigError("utility.endpoints", "must be an array of URLs");
        us.endpoints.push_back(e.get<std::string>());
      }
    }
    us.timeout_ms = static_cast<long>(get_count(u, "timeout_ms", "utility.timeout_ms", static_cast<std::size_t>(us.timeout_ms)));
    us.retries = static_cast<int>(get_count(u, "retries", "utility.retries", static_cast<std::size_t>(us.retries)));
  }

  const auto& us = cfg.utility;
  if (us.name != "affine_target" && us.name != "hidden_dag" && us.name != "constant" && us.name != "remote_dataset")
    throw ConfigError("utility.name", "unknown utility '" + us.name + "'");
  if (us.name == "affine_target" && (us.dim == 0 || us.dataset_size == 0))
    throw ConfigError("utility.dim", "dim and dataset_size must be >= 1");
  if (us.pool_noise < 0.0) throw ConfigError("utility.pool_noise", "must be >= 0");
  if (us.name == "remote_dataset") {
    if (us.dataset.empty()) throw ConfigError("utility.dataset", "remote_dataset needs a dataset path");
    if (r.mode != RunMode::role_only) throw ConfigError("mode", "remote experts can only run role_only");
    if (!us.endpoints.empty() && us.endpoints.size() != 1 && us.endpoints.size() != r.n_experts)
      throw ConfigError("utility.endpoints", "give one endpoint or one per expert");
  }
  r.validate();
  return cfg;
}

AppConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json to_json(const AppConfig& cfg) {
  auto j = to_json(cfg.run);
  j["jobs"] = cfg.run.jobs;
  const auto& u = cfg.utility;
  json uj = {{"name", u.name}};
  if (u.name == "affine_target") {
    uj["dim"] = u.dim;
    uj["dataset_size"] = u.dataset_size;
    uj["pool_noise"] = u.pool_noise;
  } else if (u.name == "constant") {
    uj["value"] = u.value;
  } else if (u.name == "hidden_dag") {
    if (u.hidden) uj["hidden"] = *u.hidden;
  } else {
    uj["dataset"] = u.dataset;
    uj["endpoints"] = u.endpoints;
    uj["timeout_ms"] = u.timeout_ms;
    uj["retries"] = u.retries;
  }
  j["utility"] = uj;
  return j;
}

namespace {

ExpertPool scalar_pool(const RunConfig& run, SeededStream& rng) {
  ExpertPool pool;
  for (std::size_t b = 0; b < run.pool.distinct; ++b) {
    Expert e{{rng.uniform()}, {}};
    for (std::size_t k = 0; k < run.pool.repeats; ++k) pool.push_back(e);
  }
  return pool;
}

}  // namespace

Workload make_workload(const AppConfig& cfg) {
  const auto& run = cfg.run;
  const auto& us = cfg.utility;
  auto rng = SeededStream(run.seed).derive({key(StreamTag::task_data)});
  Workload w;
  if (us.name == "affine_target") {
    AffineTaskSpec spec;
    spec.n_experts = run.n_experts;
    spec.dim = us.dim;
    spec.dataset_size = us.dataset_size;
    spec.distinct = run.pool.distinct;
    spec.repeats = run.pool.repeats;
    spec.pool_noise = us.pool_noise;
    auto task = make_affine_task(spec, rng);
    w.utility = task.utility;
    w.initial_pool = std::move(task.initial_pool);
    w.hidden_dag = task.hidden_dag;
  } else if (us.name == "hidden_dag") {
    DagStructure hidden;
    if (us.hidden) {
      try {
        hidden = dag_from_json(*us.hidden);
      } catch (const std::exception& e) {
        throw ConfigError("utility.hidden", e.what());
      }
      if (hidden.n != run.n_experts) throw ConfigError("utility.hidden", "node count must equal n_experts");
    } else {
      hidden = random_dag(run.n_experts, rng);
    }
    w.utility = std::make_shared<HiddenDagUtility>(hidden);
    w.initial_pool = scalar_pool(run, rng);
    w.hidden_dag = hidden;
  } else if (us.name == "constant") {
    w.utility = std::make_shared<ConstantUtility>(us.value);
    w.initial_pool = scalar_pool(run, rng);
  } else {
    RemoteOptions opts;
    opts.timeout = std::chrono::milliseconds(us.timeout_ms);
    opts.retries = us.retries;
    opts = remote_options_from_env(opts);
    auto evaluator = std::make_shared<RemoteEvaluator>(opts);
    w.utility = std::make_shared<ExactMatchUtility>(load_text_dataset(us.dataset), evaluator);
    for (std::size_t k = 0; k < run.n_experts; ++k) {
      Expert e;
      if (!us.endpoints.empty()) e.endpoint = us.endpoints.size() == 1 ? us.endpoints[0] : us.endpoints[k];
      w.initial_pool.push_back(e);
    }
  }
  return w;
}

void save_pool(const std::string& dir, const ExpertPool& pool) {
  fs::create_directories(dir);
  json manifest = {{"format", "hswarm-pool"}, {"format_version", 1}, {"experts", json::array()}};
  for (std::size_t k = 0; k < pool.size(); ++k) {
    std::ostringstream name;
    name << "expert_" << std::setw(3) << std::setfill('0') << k << ".json";
    json e = {{"params", pool[k].params}};
    if (!pool[k].endpoint.empty()) e["endpoint"] = pool[k].endpoint;
    std::ofstream(fs::path(dir) / name.str()) << e.dump() << '\n';
    manifest["experts"].push_back(name.str());
  }
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';
}

ExpertPool load_pool(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw ContractViolation("pool directory " + dir + " has no manifest.json");
  json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "hswarm-pool")
    throw ContractViolation("pool manifest in " + dir + " is malformed");
  ExpertPool pool;
  for (const auto& name : manifest.at("experts")) {
    std::ifstream ein(fs::path(dir) / name.get<std::string>());
    json e = json::parse(ein, nullptr, false);
    if (e.is_discarded()) throw ContractViolation("cannot parse expert file " + name.get<std::string>());
    pool.push_back({e.value("params", std::vector<double>{}), e.value("endpoint", std::string{})});
  }
  if (pool.empty()) throw ContractViolation("pool directory " + dir + " lists no experts");
  return pool;
}

}  // namespace hswarm
