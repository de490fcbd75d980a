#include "mel/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mel/errors.hpp"

namespace mel::config {

namespace {

using Type = SchemaKey::Type;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value,
                    int line = 0) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    std::ostringstream os;
    os << "config: malformed numeric value '" << value << "' for key '" << key
       << "'";
    if (line > 0) os << " at line " << line;
    throw ConfigError(os.str());
  }
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& value,
                       int line = 0) {
  const double d = parse_double(key, value, line);
  const std::int64_t i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d) {
    std::ostringstream os;
    os << "config: key '" << key << "' expects an integer, got '" << value << "'";
    if (line > 0) os << " at line " << line;
    throw ConfigError(os.str());
  }
  return i;
}

bool parse_bool(const std::string& key, const std::string& value, int line = 0) {
  std::string v = trim(value);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  std::ostringstream os;
  os << "config: malformed boolean '" << value << "' for key '" << key << "'";
  if (line > 0) os << " at line " << line;
  throw ConfigError(os.str());
}

}  // namespace

const std::vector<SchemaKey>& schema() {
  static const std::vector<SchemaKey> keys = {
      {"mode", Type::kString, "OL", "OL (orchestrator ships batches) or FL"},
      {"channel.bandwidth_hz", Type::kDouble, "5e6", "per-learner channel bandwidth W"},
      {"channel.tx_power_dbm", Type::kDouble, "23", "transmit power P"},
      {"channel.noise_psd_dbm_hz", Type::kDouble, "-174", "noise PSD N0"},
      {"channel.distance_m", Type::kDoubleList, "500",
       "orchestrator-learner distance; scalar or one entry per learner"},
      {"channel.gain_override", Type::kDoubleList, "",
       "linear power gain per learner, replaces the path-loss model"},
      {"channel.resample_per_cycle", Type::kBool, "false",
       "re-jitter distances at every global cycle"},
      {"fleet.K", Type::kInt, "20", "number of learners"},
      {"fleet.cpu_hz", Type::kDoubleList, "2.4e9, 1.2e9",
       "CPU rates cycled across learners"},
      {"fleet.distance_jitter", Type::kDouble, "0.2",
       "uniform +/- fraction applied to each learner's distance"},
      {"model.features", Type::kDouble, "784", "features per sample"},
      {"model.data_precision_bits", Type::kDouble, "8", "bits per feature"},
      {"model.model_precision_bits", Type::kDouble, "32", "bits per parameter"},
      {"model.size_fixed", Type::kDouble, "3e5",
       "batch-independent parameter count (arbitrary default)"},
      {"model.size_per_sample", Type::kDouble, "1",
       "parameters per allocated sample (arbitrary default)"},
      {"model.complexity_cycles", Type::kDouble, "1e6",
       "cycles per sample per local update (arbitrary default)"},
      {"bounds.eta", Type::kDouble, "0.01", "learning rate"},
      {"bounds.b0", Type::kDouble, "0.0075", "control parameter B0"},
      {"bounds.beta_override", Type::kDouble, "", "fixed beta instead of estimation"},
      {"bounds.delta_override", Type::kDouble, "", "fixed delta instead of estimation"},
      {"opt.tau_max", Type::kString, "auto", "integer cap or 'auto' (3-cycle rule)"},
      {"opt.tau_hard_cap", Type::kInt, "10000", "absolute cap on tau_max"},
      {"opt.policy", Type::kString, "HA", "HA or HU"},
      {"task.kind", Type::kString, "logistic", "logistic or quadratic"},
      {"task.dim", Type::kInt, "8", "synthetic feature dimension"},
      {"task.heterogeneity", Type::kDouble, "0.3",
       "per-learner distribution mean shift"},
      {"task.seed", Type::kInt, "1", "base RNG seed"},
      {"task.total_samples", Type::kInt, "54000", "dataset size d"},
      {"task.eval_samples", Type::kInt, "4000", "held-out evaluation samples"},
      {"task.noise", Type::kDouble, "0.1", "target noise (quadratic tasks)"},
      {"task.sgd_shuffle", Type::kBool, "false",
       "slide the sample window each cycle instead of reusing the prefix"},
      {"delta.estimator", Type::kString, "gradient", "gradient or loss divergence"},
      {"train.budget", Type::kDouble, "300", "wall-clock budget T for `train`"},
      {"sweep.budgets", Type::kDoubleList, "300, 400, 500, 600",
       "budgets swept by `sweep`"},
      {"sweep.seeds", Type::kInt, "20", "cells run seeds 1..N"},
      {"sweep.policies", Type::kStringList, "HA, HU", "policies swept"},
  };
  return keys;
}

std::string policy_name(orch::Policy p) {
  return p == orch::Policy::HA ? "HA" : "HU";
}

orch::Policy parse_policy(const std::string& name) {
  const std::string v = trim(name);
  if (v == "HA") return orch::Policy::HA;
  if (v == "HU") return orch::Policy::HU;
  throw ConfigError("config: unknown policy '" + name + "' (expected HA or HU)");
}

namespace {

struct RawConfig {
  std::map<std::string, std::string> values;  // key -> text value
  std::map<std::string, int> lines;           // key -> source line (flat mode)
};

const SchemaKey* find_key(const std::string& name) {
  for (const auto& k : schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

RawConfig parse_flat(const std::string& text) {
  RawConfig raw;
  std::vector<std::string> unknown;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected 'key = value' at line " +
                        std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!find_key(key)) {
      unknown.push_back(key + " (line " + std::to_string(line_no) + ")");
      continue;
    }
    raw.values[key] = value;
    raw.lines[key] = line_no;
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  return raw;
}

void flatten_json(const nlohmann::json& node, const std::string& prefix,
                  RawConfig& raw, std::vector<std::string>& unknown) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_json(value, prefix.empty() ? key : prefix + "." + key, raw,
                   unknown);
    }
    return;
  }
  if (!find_key(prefix)) {
    unknown.push_back(prefix);
    return;
  }
  std::string text;
  if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i > 0) text += ", ";
      text += node[i].is_string() ? node[i].get<std::string>()
                                  : node[i].dump();
    }
  } else if (node.is_string()) {
    text = node.get<std::string>();
  } else {
    text = node.dump();
  }
  raw.values[prefix] = text;
}

RawConfig parse_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("config: JSON document must be an object");
  }
  RawConfig raw;
  std::vector<std::string> unknown;
  flatten_json(doc, "", raw, unknown);
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  return raw;
}

class Resolver {
 public:
  explicit Resolver(RawConfig raw) : raw_(std::move(raw)) {}

  bool is_set(const std::string& key) const {
    auto it = raw_.values.find(key);
    return it != raw_.values.end() && !trim(it->second).empty();
  }
  std::string text(const std::string& key) const {
    auto it = raw_.values.find(key);
    if (it != raw_.values.end()) return it->second;
    const SchemaKey* sk = find_key(key);
    if (!sk) throw ConfigError("config: internal: key not in schema: " + key);
    return sk->default_value;
  }
  int line(const std::string& key) const {
    auto it = raw_.lines.find(key);
    return it == raw_.lines.end() ? 0 : it->second;
  }
  double number(const std::string& key) const {
    return parse_double(key, text(key), line(key));
  }
  std::int64_t integer(const std::string& key) const {
    return parse_int(key, text(key), line(key));
  }
  bool boolean(const std::string& key) const {
    return parse_bool(key, text(key), line(key));
  }
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(key))) {
      out.push_back(parse_double(key, item, line(key)));
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const {
    return split_list(text(key));
  }

 private:
  RawConfig raw_;
};

ExperimentConfig resolve(const RawConfig& raw) {
  Resolver r(raw);
  ExperimentConfig cfg;

  const std::string mode = trim(r.text("mode"));
  if (mode == "OL") {
    cfg.mode = cost::OffloadMode::OL;
  } else if (mode == "FL") {
    cfg.mode = cost::OffloadMode::FL;
  } else {
    throw ConfigError("config: mode must be OL or FL, got '" + mode + "'");
  }

  cfg.bandwidth_hz = r.number("channel.bandwidth_hz");
  cfg.tx_power_dbm = r.number("channel.tx_power_dbm");
  cfg.noise_psd_dbm_hz = r.number("channel.noise_psd_dbm_hz");
  cfg.distance_m = r.numbers("channel.distance_m");
  cfg.gain_override =
      r.is_set("channel.gain_override") ? r.numbers("channel.gain_override")
                                        : std::vector<double>{};
  cfg.resample_per_cycle = r.boolean("channel.resample_per_cycle");

  const std::int64_t k = r.integer("fleet.K");
  if (k < 1) throw ConfigError("config: fleet.K must be >= 1");
  cfg.learners = static_cast<std::size_t>(k);
  cfg.cpu_hz = r.numbers("fleet.cpu_hz");
  if (cfg.cpu_hz.empty()) throw ConfigError("config: fleet.cpu_hz must be non-empty");
  cfg.distance_jitter = r.number("fleet.distance_jitter");
  if (cfg.distance_jitter < 0.0 || cfg.distance_jitter >= 1.0) {
    throw ConfigError("config: fleet.distance_jitter must lie in [0, 1)");
  }

  cfg.model.features = r.number("model.features");
  cfg.model.data_precision_bits = r.number("model.data_precision_bits");
  cfg.model.model_precision_bits = r.number("model.model_precision_bits");
  cfg.model.size_fixed = r.number("model.size_fixed");
  cfg.model.size_per_sample = r.number("model.size_per_sample");
  cfg.model.complexity_cycles = r.number("model.complexity_cycles");

  cfg.eta = r.number("bounds.eta");
  cfg.b0 = r.number("bounds.b0");
  if (r.is_set("bounds.beta_override")) {
    cfg.beta_override = r.number("bounds.beta_override");
  }
  if (r.is_set("bounds.delta_override")) {
    cfg.delta_override = r.number("bounds.delta_override");
  }

  const std::string tau_max = trim(r.text("opt.tau_max"));
  if (tau_max == "auto") {
    cfg.tau_max = 0;
  } else {
    cfg.tau_max = parse_int("opt.tau_max", tau_max);
    if (cfg.tau_max < 1) {
      throw ConfigError("config: opt.tau_max must be >= 1 or 'auto'");
    }
  }
  cfg.tau_hard_cap = r.integer("opt.tau_hard_cap");
  if (cfg.tau_hard_cap < 1) throw ConfigError("config: opt.tau_hard_cap must be >= 1");
  cfg.policy = parse_policy(r.text("opt.policy"));

  const std::string kind = trim(r.text("task.kind"));
  if (kind == "logistic") {
    cfg.task_kind = learner::TaskKind::kLogistic;
  } else if (kind == "quadratic") {
    cfg.task_kind = learner::TaskKind::kQuadratic;
  } else {
    throw ConfigError("config: task.kind must be logistic or quadratic");
  }
  const std::int64_t dim = r.integer("task.dim");
  if (dim < 1) throw ConfigError("config: task.dim must be >= 1");
  cfg.task_dim = static_cast<std::size_t>(dim);
  cfg.heterogeneity = r.number("task.heterogeneity");
  if (cfg.heterogeneity < 0.0) {
    throw ConfigError("config: task.heterogeneity must be >= 0");
  }
  cfg.seed = static_cast<std::uint64_t>(r.integer("task.seed"));
  cfg.total_samples = r.integer("task.total_samples");
  if (cfg.total_samples < k) {
    throw ConfigError("config: task.total_samples must be >= fleet.K");
  }
  const std::int64_t eval_n = r.integer("task.eval_samples");
  if (eval_n < 0) throw ConfigError("config: task.eval_samples must be >= 0");
  cfg.eval_samples = static_cast<std::size_t>(eval_n);
  cfg.task_noise = r.number("task.noise");
  cfg.sgd_shuffle = r.boolean("task.sgd_shuffle");

  const std::string estimator = trim(r.text("delta.estimator"));
  if (estimator == "gradient") {
    cfg.delta_estimator = orch::DeltaEstimator::kGradient;
  } else if (estimator == "loss") {
    cfg.delta_estimator = orch::DeltaEstimator::kLoss;
  } else {
    throw ConfigError("config: delta.estimator must be gradient or loss");
  }

  cfg.train_budget_s = r.number("train.budget");
  cfg.sweep_budgets = r.numbers("sweep.budgets");
  if (cfg.sweep_budgets.empty()) {
    throw ConfigError("config: sweep.budgets must be non-empty");
  }
  for (const double t : cfg.sweep_budgets) {
    if (!(t > 0.0)) throw ConfigError("config: sweep budgets must be > 0");
  }
  if (!(cfg.train_budget_s > 0.0)) {
    throw ConfigError("config: train.budget must be > 0");
  }
  cfg.sweep_seeds = r.integer("sweep.seeds");
  if (cfg.sweep_seeds < 1) throw ConfigError("config: sweep.seeds must be >= 1");
  cfg.sweep_policies.clear();
  for (const auto& p : r.strings("sweep.policies")) {
    cfg.sweep_policies.push_back(parse_policy(p));
  }
  if (cfg.sweep_policies.empty()) {
    throw ConfigError("config: sweep.policies must be non-empty");
  }

  // Per-learner lists must either be scalar or match the fleet size.
  if (cfg.distance_m.size() != 1 && cfg.distance_m.size() != cfg.learners) {
    throw ConfigError(
        "config: channel.distance_m needs 1 entry or one per learner");
  }
  if (!cfg.gain_override.empty() && cfg.gain_override.size() != 1 &&
      cfg.gain_override.size() != cfg.learners) {
    throw ConfigError(
        "config: channel.gain_override needs 1 entry or one per learner");
  }
  return cfg;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const std::string trimmed = trim(text);
  RawConfig raw = (!trimmed.empty() && trimmed.front() == '{')
                      ? parse_json_text(text)
                      : parse_flat(text);
  return resolve(raw);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

ExperimentConfig default_config() { return parse_config(""); }

std::vector<cost::LearnerProfile> ExperimentConfig::build_fleet(
    std::uint64_t fleet_seed) const {
  std::mt19937_64 rng(splitmix64(fleet_seed ^ 0xF1EE7ULL));
  std::uniform_real_distribution<double> jitter(-distance_jitter,
                                                distance_jitter);
  std::vector<cost::LearnerProfile> fleet;
  fleet.reserve(learners);
  for (std::size_t k = 0; k < learners; ++k) {
    cost::LearnerProfile p;
    p.id = k;
    p.cpu_hz = cpu_hz[k % cpu_hz.size()];
    p.model = model;
    p.channel.bandwidth_hz = bandwidth_hz;
    p.channel.tx_power_dbm = tx_power_dbm;
    p.channel.noise_psd_dbm_hz = noise_psd_dbm_hz;
    const double base =
        distance_m.size() == 1 ? distance_m[0] : distance_m[k];
    p.channel.distance_m =
        distance_jitter > 0.0 ? base * (1.0 + jitter(rng)) : base;
    if (!gain_override.empty()) {
      p.channel.gain_override =
          gain_override.size() == 1 ? gain_override[0] : gain_override[k];
    }
    p.validate();
    fleet.push_back(std::move(p));
  }
  return fleet;
}

learner::TaskSpec ExperimentConfig::task_spec(std::uint64_t task_seed) const {
  learner::TaskSpec spec;
  spec.kind = task_kind;
  spec.dim = task_dim;
  spec.learners = learners;
  spec.total_samples = total_samples;
  spec.heterogeneity = heterogeneity;
  spec.noise = task_noise;
  spec.seed = task_seed;
  spec.eval_samples = eval_samples;
  spec.reshuffle_each_cycle = sgd_shuffle;
  return spec;
}

orch::TrainOptions ExperimentConfig::train_options(orch::Policy run_policy,
                                                   double budget_s,
                                                   std::uint64_t run_seed) const {
  orch::TrainOptions opt;
  opt.policy = run_policy;
  opt.mode = mode;
  opt.total_samples = total_samples;
  opt.budget_s = budget_s;
  opt.eta = eta;
  opt.b0 = b0;
  opt.tau_max = tau_max;
  opt.tau_hard_cap = tau_hard_cap;
  opt.delta_estimator = delta_estimator;
  opt.beta_override = beta_override;
  opt.delta_override = delta_override;
  opt.seed = run_seed;
  opt.resample_channels = resample_per_cycle;
  opt.distance_jitter = distance_jitter;
  return opt;
}

}  // namespace mel::config
