#include "htlab/config.hpp"

#include "htlab/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

extern char** environ;

namespace htlab {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::ConfigError, msg); }

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) config_error(path + key + " required");
  return obj.at(key);
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) config_error(key + " must be a number");
  return v.get<double>();
}

Vector vector_of(const json& v, const std::string& key) {
  if (!v.is_array()) config_error(key + " must be an array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = number(v[k], key);
  return out;
}

Matrix matrix_of(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) config_error(key + " must be a nested array");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) config_error(key + " rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], key);
    }
  }
  return m;
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

DistributionSpec distribution_of(const json& v, const std::string& key) {
  DistributionSpec d;
  d.family = parse_family(require(v, "family", key + ".").get<std::string>());
  d.mean = number(require(v, "mean", key + "."), key + ".mean");
  if (v.contains("sd")) {
    d.sd = number(v.at("sd"), key + ".sd");
  } else if (d.family == Family::Exponential) {
    d.sd = d.mean;
  } else if (d.family == Family::Deterministic) {
    d.sd = 0.0;
  } else {
    config_error(key + ".sd required");
  }
  return d;
}

json to_json(const DistributionSpec& d) { return json{{"family", to_string(d.family)}, {"mean", d.mean}, {"sd", d.sd}}; }

NamedPolicy policy_of(const json& v, const std::string& key, int num_buffers) {
  NamedPolicy np;
  np.spec.type = require(v, "type", key + ".").get<std::string>();
  np.name = v.value("name", np.spec.type);
  if (v.contains("ranking")) {
    for (const auto& x : v.at("ranking")) {
      const int b = x.get<int>();
      if (b < 1 || b > num_buffers) config_error(key + ".ranking entries must be buffer labels 1.." +
                                                 std::to_string(num_buffers));
      np.spec.ranking.push_back(b - 1);
    }
  }
  if (v.contains("levels")) {
    for (const auto& x : v.at("levels")) np.spec.levels.push_back(x.get<std::int64_t>());
  }
  np.spec.seed = v.value("seed", std::uint64_t{0});
  np.spec.idle_prob = v.value("idle_prob", 0.0);
  static const std::vector<std::string> known{"static_priority", "cmu", "fifo", "random_feasible", "threshold"};
  if (std::find(known.begin(), known.end(), np.spec.type) == known.end()) {
    config_error(key + ".type '" + np.spec.type + "' is not a built-in policy");
  }
  if (np.spec.type == "static_priority" && np.spec.ranking.empty()) config_error(key + ".ranking required");
  return np;
}

json to_json(const NamedPolicy& np) {
  json j{{"name", np.name}, {"type", np.spec.type}};
  if (!np.spec.ranking.empty()) {
    json r = json::array();
    for (int b : np.spec.ranking) r.push_back(b + 1);
    j["ranking"] = r;
  }
  if (!np.spec.levels.empty()) j["levels"] = np.spec.levels;
  if (np.spec.type == "random_feasible") {
    j["seed"] = np.spec.seed;
    j["idle_prob"] = np.spec.idle_prob;
  }
  return j;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "analyze") return Mode::Analyze;
  if (s == "simulate") return Mode::Simulate;
  if (s == "cost") return Mode::Cost;
  if (s == "bound") return Mode::Bound;
  if (s == "validate") return Mode::Validate;
  config_error("mode '" + s + "' is not one of analyze|simulate|cost|bound|validate");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Analyze: return "analyze";
    case Mode::Simulate: return "simulate";
    case Mode::Cost: return "cost";
    case Mode::Bound: return "bound";
    case Mode::Validate: return "validate";
  }
  return "analyze";
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) config_error("config must be an object");
  ExperimentConfig c;
  try {
    c.name = doc.value("name", c.name);
    if (doc.contains("mode")) c.mode = parse_mode(doc.at("mode").get<std::string>());

    const json& net = require(doc, "network", "");
    NetworkTopology& t = c.network.topology;
    t.C = matrix_of(require(net, "C", "network."), "network.C");
    t.A = matrix_of(require(net, "A", "network."), "network.A");
    t.num_buffers = static_cast<int>(t.C.rows());
    t.num_activities = static_cast<int>(t.C.cols());
    t.num_servers = static_cast<int>(t.A.rows());
    t.P = net.contains("P") ? matrix_of(net.at("P"), "network.P") : Matrix::Zero(t.num_buffers, t.num_activities);
    for (const auto& d : require(net, "interarrival", "network.")) {
      c.network.interarrival.push_back(distribution_of(d, "network.interarrival"));
    }
    for (const auto& d : require(net, "service", "network.")) {
      c.network.service.push_back(distribution_of(d, "network.service"));
    }
    t.num_exogenous = static_cast<int>(c.network.interarrival.size());
    c.network.theta1 =
        net.contains("theta1") ? vector_of(net.at("theta1"), "network.theta1") : Vector::Zero(t.num_buffers);
    c.network.theta2 =
        net.contains("theta2") ? vector_of(net.at("theta2"), "network.theta2") : Vector::Zero(t.num_activities);
    c.network.q0 = net.contains("q0") ? vector_of(net.at("q0"), "network.q0") : Vector::Zero(t.num_buffers);
    validate(c.network);

    if (doc.contains("sigma_convention")) {
      c.sigma_convention = parse_sigma_convention(doc.at("sigma_convention").get<std::string>());
    }
    if (doc.contains("workload") && doc.at("workload").contains("lambda")) {
      const json& l = doc.at("workload").at("lambda");
      if (!(l.is_string() && l.get<std::string>() == "auto")) c.lambda = matrix_of(l, "workload.lambda");
    }

    c.policy = policy_of(require(doc, "policy", ""), "policy", t.num_buffers);
    if (doc.contains("compare")) {
      for (const auto& p : doc.at("compare")) c.compare.push_back(policy_of(p, "compare", t.num_buffers));
    }

    if (doc.contains("r_list")) {
      c.r_list.clear();
      for (const auto& r : doc.at("r_list")) c.r_list.push_back(number(r, "r_list"));
    }
    if (c.r_list.empty()) config_error("r_list must not be empty");
    for (std::size_t k = 0; k < c.r_list.size(); ++k) {
      if (!(c.r_list[k] > 0.0)) config_error("r_list entries must be > 0");
      if (k > 0 && !(c.r_list[k] > c.r_list[k - 1])) config_error("r_list must be strictly increasing");
    }
    if (doc.contains("replications")) {
      const auto reps = doc.at("replications").get<std::int64_t>();
      if (reps < 2) config_error("replications must be >= 2");
      c.replications = static_cast<std::size_t>(reps);
    }

    const json& cost = require(doc, "cost", "");
    c.cost.gamma = number(require(cost, "gamma", "cost."), "cost.gamma");
    c.cost.h = vector_of(require(cost, "h", "cost."), "cost.h");
    if (cost.contains("p")) c.cost.p = vector_of(cost.at("p"), "cost.p");
    if (cost.contains("horizon")) c.cost.horizon_scaled = number(cost.at("horizon"), "cost.horizon");
    if (cost.contains("tail_tol") && !cost.at("tail_tol").is_null()) {
      c.cost.tail_tol = number(cost.at("tail_tol"), "cost.tail_tol");
    }
    if (!(c.cost.gamma > 0.0)) config_error("cost.gamma must be > 0");
    if (c.cost.h.size() != t.num_buffers) config_error("cost.h needs one entry per buffer");
    if (!(c.cost.h.array() > 0.0).all()) config_error("cost.h entries must be > 0");
    if (!(c.cost.horizon_scaled > 0.0)) config_error("cost.horizon must be > 0");

    if (doc.contains("seeds")) c.base_seed = doc.at("seeds").value("base", c.base_seed);
    c.output_dir = doc.value("output_dir", c.output_dir);
    if (doc.contains("simulate")) {
      const json& s = doc.at("simulate");
      c.sim_horizon = s.value("horizon", c.sim_horizon);
      c.grid_points = s.value("grid_points", c.grid_points);
      if (!(c.sim_horizon >= 0.0)) config_error("simulate.horizon must be >= 0");
    }
    if (doc.contains("bound")) {
      const json& b = doc.at("bound");
      c.slack_ses = b.value("slack_ses", c.slack_ses);
      c.rbm_paths = b.value("rbm_paths", c.rbm_paths);
      c.seed_blocks = b.value("seed_blocks", c.seed_blocks);
      if (c.rbm_paths < 2) config_error("bound.rbm_paths must be >= 2");
      if (c.seed_blocks < 1) config_error("bound.seed_blocks must be >= 1");
    }
  } catch (const json::exception& e) {
    config_error(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(std::string("network: ") + e.what());
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  const NetworkTopology& t = c.network.topology;
  json net;
  net["C"] = to_json(t.C);
  net["A"] = to_json(t.A);
  net["P"] = to_json(t.P);
  json ia = json::array();
  for (const auto& d : c.network.interarrival) ia.push_back(to_json(d));
  json sv = json::array();
  for (const auto& d : c.network.service) sv.push_back(to_json(d));
  net["interarrival"] = ia;
  net["service"] = sv;
  net["theta1"] = to_json(c.network.theta1);
  net["theta2"] = to_json(c.network.theta2);
  net["q0"] = to_json(c.network.q0);

  json doc;
  doc["name"] = c.name;
  doc["mode"] = to_string(c.mode);
  doc["network"] = net;
  doc["sigma_convention"] = to_string(c.sigma_convention);
  doc["workload"] = json{{"lambda", c.lambda ? to_json(*c.lambda) : json("auto")}};
  doc["policy"] = to_json(c.policy);
  json cmp = json::array();
  for (const auto& p : c.compare) cmp.push_back(to_json(p));
  doc["compare"] = cmp;
  doc["r_list"] = c.r_list;
  doc["replications"] = c.replications;
  json cost{{"gamma", c.cost.gamma}, {"h", to_json(c.cost.h)}, {"horizon", c.cost.horizon_scaled}};
  if (c.cost.p.size() > 0) cost["p"] = to_json(c.cost.p);
  cost["tail_tol"] = c.cost.tail_tol > 0.0 ? json(c.cost.tail_tol) : json(nullptr);
  doc["cost"] = cost;
  doc["seeds"] = json{{"base", c.base_seed}};
  doc["output_dir"] = c.output_dir;
  doc["simulate"] = json{{"horizon", c.sim_horizon}, {"grid_points", c.grid_points}};
  doc["bound"] = json{{"slack_ses", c.slack_ses}, {"rbm_paths", c.rbm_paths}, {"seed_blocks", c.seed_blocks}};
  return doc;
}

ExperimentConfig load_config(const std::string& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    config_error("cannot parse '" + path + "': " + e.what());
  }
  if (apply_env) apply_overrides(doc, environment_overrides());
  return parse_config(doc);
}

void apply_overrides(json& doc, const std::vector<std::pair<std::string, std::string>>& env, const std::string& prefix) {
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string path = name.substr(prefix.size());
    if (path.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
      const std::size_t pos = path.find("__", start);
      parts.push_back(lower(path.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
      if (pos == std::string::npos) break;
      start = pos + 2;
    }
    json* node = &doc;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!node->is_object() && !node->is_null()) config_error("override " + name + " descends into a non-object");
      std::string key = parts[k];
      for (auto it = node->begin(); it != node->end(); ++it) {
        if (lower(it.key()) == key) {
          key = it.key();
          break;
        }
      }
      node = &(*node)[key];
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
  }
}

std::vector<std::pair<std::string, std::string>> environment_overrides(const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv(*e);
    if (kv.rfind(prefix, 0) != 0) continue;
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace htlab
