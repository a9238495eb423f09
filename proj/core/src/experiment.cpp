#include "ramplab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ramplab/csv.hpp"

namespace ramplab {
namespace {

// ordered_json keeps object insertion order, so error paths and the derived
// sweep labels follow the document as written.
using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw config_error(path + ": " + message);
}

const json* find(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const json* j = find(obj, key);
  if (!j) fail(path + "." + key, "missing required field");
  return *j;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

double number_or(const json& obj, const std::string& key, const std::string& path,
                 double fallback) {
  const json* j = find(obj, key);
  return j ? as_number(*j, path + "." + key) : fallback;
}

int int_or(const json& obj, const std::string& key, const std::string& path, int fallback) {
  const json* j = find(obj, key);
  return j ? as_int(*j, path + "." + key) : fallback;
}

bool bool_or(const json& obj, const std::string& key, const std::string& path,
             bool fallback) {
  const json* j = find(obj, key);
  return j ? as_bool(*j, path + "." + key) : fallback;
}

std::string string_or(const json& obj, const std::string& key, const std::string& path,
                      const std::string& fallback) {
  const json* j = find(obj, key);
  return j ? as_string(*j, path + "." + key) : fallback;
}

std::vector<double> as_number_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

network parse_network(const json& j, const std::string& path) {
  const std::string type = as_string(require(j, "type", path), path + ".type");
  if (type == "single_bus") return network::single_bus();
  if (type != "radial")
    fail(path + ".type", "unknown network type '" + type + "' (single_bus or radial)");
  const int buses = as_int(require(j, "buses", path), path + ".buses");
  const int reference = int_or(j, "reference_bus", path, 0);
  std::vector<std::string> labels;
  if (const json* jl = find(j, "labels")) {
    if (!jl->is_array()) fail(path + ".labels", "expected an array of strings");
    for (std::size_t i = 0; i < jl->size(); ++i)
      labels.push_back(as_string((*jl)[i], path + ".labels[" + std::to_string(i) + "]"));
  }
  const json& jlines = require(j, "lines", path);
  if (!jlines.is_array()) fail(path + ".lines", "expected an array");
  std::vector<radial_line> lines;
  for (std::size_t i = 0; i < jlines.size(); ++i) {
    const std::string lpath = path + ".lines[" + std::to_string(i) + "]";
    const json& jl = jlines[i];
    radial_line l;
    l.from_bus = as_int(require(jl, "from", lpath), lpath + ".from");
    l.to_bus = as_int(require(jl, "to", lpath), lpath + ".to");
    l.limit_forward = as_number(require(jl, "limit_forward", lpath), lpath + ".limit_forward");
    l.limit_backward =
        as_number(require(jl, "limit_backward", lpath), lpath + ".limit_backward");
    lines.push_back(l);
  }
  try {
    return network::radial(lines, reference, buses, std::move(labels));
  } catch (const invalid_input& e) {
    fail(path, e.what());
  }
}

std::vector<generator_spec> parse_generators(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  std::vector<generator_spec> gens;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string gpath = path + "[" + std::to_string(i) + "]";
    const json& jg = j[i];
    generator_spec g;
    g.id = as_string(require(jg, "id", gpath), gpath + ".id");
    g.bus = int_or(jg, "bus", gpath, 0);
    g.marginal_cost = as_number(require(jg, "marginal_cost", gpath), gpath + ".marginal_cost");
    g.quadratic_cost = number_or(jg, "quadratic_cost", gpath, 0.0);
    g.capacity = as_number(require(jg, "capacity", gpath), gpath + ".capacity");
    g.ramp_up = as_number(require(jg, "ramp_up", gpath), gpath + ".ramp_up");
    g.ramp_down = as_number(require(jg, "ramp_down", gpath), gpath + ".ramp_down");
    if (const json* jr = find(jg, "revealed_ramp_up"))
      g.revealed_ramp_up = as_number(*jr, gpath + ".revealed_ramp_up");
    if (const json* jr = find(jg, "revealed_ramp_down"))
      g.revealed_ramp_down = as_number(*jr, gpath + ".revealed_ramp_down");
    gens.push_back(std::move(g));
  }
  return gens;
}

rolling_config parse_rolling(const json& j, const std::string& path) {
  rolling_config rc;
  rc.horizon = as_int(require(j, "horizon", path), path + ".horizon");
  rc.window = as_int(require(j, "window", path), path + ".window");
  if (const json* jd = find(j, "initial_dispatch")) {
    const std::vector<double> v = as_number_array(*jd, path + ".initial_dispatch");
    rc.initial_dispatch = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  }
  const std::string end = string_or(j, "end_of_horizon", path, "shrink");
  if (end == "shrink")
    rc.end_mode = horizon_end::shrink;
  else if (end == "hold_forecast")
    rc.end_mode = horizon_end::hold_forecast;
  else
    fail(path + ".end_of_horizon", "expected 'shrink' or 'hold_forecast'");
  rc.slack_enabled = bool_or(j, "slack_enabled", path, false);
  rc.slack_penalty = number_or(j, "slack_penalty", path, defaults::slack_penalty);
  rc.kkt_tolerance = number_or(j, "kkt_tolerance", path, defaults::kkt_tolerance);
  return rc;
}

Eigen::MatrixXd parse_inline_profile(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected an array of per-bus rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t m = 0; m < j.size(); ++m)
    rows.push_back(as_number_array(j[m], path + "[" + std::to_string(m) + "]"));
  const std::size_t cols = rows.front().size();
  if (cols == 0) fail(path + "[0]", "empty profile row");
  Eigen::MatrixXd profile(rows.size(), cols);
  for (std::size_t m = 0; m < rows.size(); ++m) {
    if (rows[m].size() != cols)
      fail(path + "[" + std::to_string(m) + "]", "rows must have equal length");
    for (std::size_t t = 0; t < cols; ++t) profile(m, t) = rows[m][t];
  }
  return profile;
}

void parse_scenario_block(const json& j, const std::string& path, const std::string& base_dir,
                          experiment_config& cfg) {
  const json* inline_profile = find(j, "mean_profile");
  const json* file_profile = find(j, "mean_profile_file");
  if (inline_profile && file_profile)
    fail(path, "give either mean_profile or mean_profile_file, not both");
  if (inline_profile) {
    cfg.mean_profile = parse_inline_profile(*inline_profile, path + ".mean_profile");
  } else if (file_profile) {
    const std::string rel = as_string(*file_profile, path + ".mean_profile_file");
    const std::filesystem::path p = std::filesystem::path(rel).is_absolute()
                                        ? std::filesystem::path(rel)
                                        : std::filesystem::path(base_dir) / rel;
    if (!std::filesystem::exists(p))
      fail(path + ".mean_profile_file", "file not found: " + p.string());
    cfg.mean_profile = load_mean_profile_csv(p.string());
  } else {
    fail(path, "missing mean_profile or mean_profile_file");
  }
  cfg.demand_std_fraction = number_or(j, "demand_std_fraction", path, 0.0);
  if (const json* js = find(j, "sigma_fractions"))
    cfg.sigma_fractions = as_number_array(*js, path + ".sigma_fractions");
  cfg.num_scenarios = int_or(j, "scenarios", path, 1);
  if (const json* js = find(j, "base_seed")) cfg.base_seed = as_seed(*js, path + ".base_seed");
}

sweep_spec parse_sweep(const json& j, const std::string& path) {
  sweep_spec spec;
  const std::string kind = string_or(j, "kind", path, "none");
  if (kind == "none") {
    spec.kind = sweep_kind::none;
  } else if (kind == "ramp_path") {
    spec.kind = sweep_kind::ramp_path;
    const json& jp = require(j, "points", path);
    if (!jp.is_array()) fail(path + ".points", "expected an array");
    for (std::size_t i = 0; i < jp.size(); ++i) {
      const std::string ppath = path + ".points[" + std::to_string(i) + "]";
      ramp_path_point pt;
      pt.label = string_or(jp[i], "label", ppath, "point" + std::to_string(i + 1));
      const json& jr = require(jp[i], "ramps", ppath);
      if (!jr.is_object()) fail(ppath + ".ramps", "expected an object of id -> MW limit");
      for (auto it = jr.begin(); it != jr.end(); ++it)
        pt.ramp_by_gen.emplace_back(it.key(),
                                    as_number(it.value(), ppath + ".ramps." + it.key()));
      spec.ramp_path.push_back(std::move(pt));
    }
  } else if (kind == "revelation") {
    spec.kind = sweep_kind::revelation;
    spec.revelation_generator =
        as_string(require(j, "generator", path), path + ".generator");
    spec.revelation_grid = as_number_array(require(j, "grid", path), path + ".grid");
  } else if (kind == "sigma") {
    spec.kind = sweep_kind::sigma;
    spec.sigma_grid = as_number_array(require(j, "grid", path), path + ".grid");
  } else if (kind == "line_capacity") {
    spec.kind = sweep_kind::line_capacity;
    spec.line_index = int_or(j, "line", path, 0);
    spec.line_capacity_grid = as_number_array(require(j, "grid", path), path + ".grid");
  } else {
    fail(path + ".kind",
         "unknown sweep kind '" + kind +
             "' (none, ramp_path, revelation, sigma, line_capacity)");
  }
  return spec;
}

// ---- run plumbing ----

struct unit_task {
  int point = 0;
  double sigma = 0.0;
  int scenario = 0;
};

struct unit_result {
  double generation_cost = 0.0;
  std::vector<price_schedule> prices;      // per configured policy
  std::vector<settlement_report> reports;  // per configured policy
};

std::vector<double> point_sigmas(const experiment_point& pt,
                                 const std::vector<double>& config_sigmas) {
  if (pt.sigma_override >= 0.0) return {pt.sigma_override};
  return config_sigmas;
}

unit_result run_unit(const experiment_config& cfg, const experiment_point& pt,
                     double sigma, int scenario_index) {
  const int lead = std::max(cfg.rolling.window - 1, 0);
  const demand_scenario sc =
      generate_scenario(cfg.base_seed, scenario_index,
                        cfg.mean_profile.leftCols(cfg.rolling.horizon),
                        cfg.demand_std_fraction, sigma, lead);
  const rolling_trajectory traj = run_rolling(sc, pt.net, pt.generators, cfg.rolling);
  unit_result r;
  r.generation_cost = traj.total_generation_cost;
  for (policy_kind policy : cfg.policies) {
    price_schedule ps = prices_for(policy, traj, pt.net, pt.generators, cfg.rolling,
                                   cfg.pricing);
    r.reports.push_back(settle(traj, ps, pt.net, pt.generators, cfg.settlement));
    r.prices.push_back(std::move(ps));
  }
  return r;
}

std::string unit_coordinates(const experiment_point& pt, const unit_task& task) {
  return "sweep point '" + pt.label + "', sigma " + csv_number(task.sigma) +
         ", scenario " + std::to_string(task.scenario);
}

std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// Appends a mean and a stderr row: (prefix..., tag, seed, extra..., columns...).
void add_aggregate_rows(csv_table& table, const std::vector<std::string>& prefix,
                        const std::string& seed, const std::vector<std::string>& extra,
                        const std::vector<std::vector<double>>& columns) {
  std::vector<std::string> mean_row = prefix;
  std::vector<std::string> se_row = prefix;
  mean_row.push_back("mean");
  se_row.push_back("stderr");
  mean_row.push_back(seed);
  se_row.push_back(seed);
  for (const std::string& cell : extra) {
    mean_row.push_back(cell);
    se_row.push_back(cell);
  }
  for (const std::vector<double>& col : columns) {
    const auto [mean, se] = mean_stderr(col);
    mean_row.push_back(csv_number(mean));
    se_row.push_back(csv_number(se));
  }
  table.add(mean_row);
  table.add(se_row);
}

// ---- verify plumbing ----

struct checker {
  verify_line line;
  double tolerance;

  checker(std::string name, double tol) : tolerance(tol) { line.name = std::move(name); }

  void feed(double violation) {
    line.instances += 1;
    line.max_violation = std::max(line.max_violation, violation);
    if (violation > tolerance) line.pass = false;
  }
};

double rel_diff(double a, double b) {
  return std::abs(a - b) / (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace

void experiment_config::validate() const {
  if (generators.empty()) throw config_error("config.generators: empty generator list");
  for (const generator_spec& g : generators) {
    try {
      g.validate(net.num_buses());
    } catch (const invalid_input& e) {
      throw config_error(std::string("config.generators: ") + e.what());
    }
  }
  try {
    rolling.validate(static_cast<int>(generators.size()));
  } catch (const invalid_input& e) {
    throw config_error(std::string("config.rolling: ") + e.what());
  }
  if (rolling.window > rolling.horizon)
    throw config_error("config.rolling: window exceeds horizon");
  if (mean_profile.rows() != net.num_buses())
    throw config_error("config.scenario: mean profile has " +
                       std::to_string(mean_profile.rows()) + " bus rows, network has " +
                       std::to_string(net.num_buses()));
  if (mean_profile.cols() < rolling.horizon)
    throw config_error("config.scenario: mean profile covers " +
                       std::to_string(mean_profile.cols()) + " intervals, horizon is " +
                       std::to_string(rolling.horizon));
  if ((mean_profile.array() < 0.0).any())
    throw config_error("config.scenario: negative mean demand");
  if (num_scenarios < 1) throw config_error("config.scenario: scenarios must be >= 1");
  if (sigma_fractions.empty())
    throw config_error("config.scenario: empty sigma_fractions list");
  for (double s : sigma_fractions)
    if (s < 0.0) throw config_error("config.scenario: negative sigma fraction");
  if (demand_std_fraction < 0.0)
    throw config_error("config.scenario: negative demand_std_fraction");
  if (policies.empty()) throw config_error("config.policies: empty policy list");
  for (std::size_t i = 0; i < policies.size(); ++i)
    for (std::size_t k = i + 1; k < policies.size(); ++k)
      if (policies[i] == policies[k])
        throw config_error("config.policies: duplicate policy '" +
                           policy_name(policies[i]) + "'");
  if (pricing.pmp_past_horizon < 0)
    throw config_error("config.pricing: negative pmp_past_horizon");
  if (check_tolerance <= 0.0)
    throw config_error("config.tolerances: check tolerance must be positive");
  try {
    build_sweep(sweep, generators, net);
  } catch (const invalid_input& e) {
    throw config_error(std::string("config.sweep: ") + e.what());
  }
}

experiment_config parse_config(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("config: expected a JSON object");

  const std::string version =
      as_string(require(doc, "schema_version", "config"), "config.schema_version");
  if (version != config_schema_version)
    fail("config.schema_version",
         "expected '" + std::string(config_schema_version) + "', got '" + version + "'");

  experiment_config cfg;
  cfg.net = parse_network(require(doc, "network", "config"), "config.network");
  cfg.generators = parse_generators(require(doc, "generators", "config"), "config.generators");
  cfg.rolling = parse_rolling(require(doc, "rolling", "config"), "config.rolling");
  parse_scenario_block(require(doc, "scenario", "config"), "config.scenario", base_dir, cfg);
  if (const json* js = find(doc, "sweep")) cfg.sweep = parse_sweep(*js, "config.sweep");

  const json& jp = require(doc, "policies", "config");
  if (!jp.is_array()) fail("config.policies", "expected an array of policy names");
  for (std::size_t i = 0; i < jp.size(); ++i) {
    const std::string ppath = "config.policies[" + std::to_string(i) + "]";
    try {
      cfg.policies.push_back(policy_from_name(as_string(jp[i], ppath)));
    } catch (const config_error&) {
      fail(ppath, "unknown policy '" + as_string(jp[i], ppath) + "'");
    }
  }

  if (const json* j = find(doc, "pricing")) {
    cfg.pricing.pmp_past_horizon = int_or(*j, "pmp_past_horizon", "config.pricing", 0);
    cfg.pricing.pmp_past_balance = bool_or(*j, "pmp_past_balance", "config.pricing", false);
    cfg.pricing.pmp_past_uses_realized =
        bool_or(*j, "pmp_past_uses_realized", "config.pricing", true);
  }
  if (const json* j = find(doc, "settlement")) {
    cfg.settlement.loc_uses_true_limits =
        bool_or(*j, "loc_uses_true_limits", "config.settlement", false);
    cfg.settlement.exclude_congestion_rent =
        bool_or(*j, "exclude_congestion_rent", "config.settlement", false);
  }
  if (const json* j = find(doc, "tolerances"))
    cfg.check_tolerance = number_or(*j, "check", "config.tolerances",
                                    defaults::check_tolerance);
  cfg.output_dir = string_or(doc, "output_dir", "config", "out");

  cfg.validate();
  return cfg;
}

experiment_config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file " + path);
  std::ostringstream text;
  text << is.rdbuf();
  return parse_config(text.str(), std::filesystem::path(path).parent_path().string());
}

Eigen::MatrixXd load_mean_profile_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("mean profile: cannot open " + path);
  std::vector<std::tuple<int, int, double>> cells;
  int max_hour = 0, max_bus = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    int hour = 0, bus = 0;
    double mw = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf", &hour, &bus, &mw) != 3) {
      if (line_no == 1) continue;  // header line
      throw config_error("mean profile " + path + ": bad row at line " +
                         std::to_string(line_no));
    }
    if (hour < 1 || bus < 0)
      throw config_error("mean profile " + path + ": hour must be >= 1 and bus >= 0 at line " +
                         std::to_string(line_no));
    max_hour = std::max(max_hour, hour);
    max_bus = std::max(max_bus, bus);
    cells.emplace_back(hour, bus, mw);
  }
  if (cells.empty()) throw config_error("mean profile " + path + ": no data rows");
  Eigen::MatrixXd profile =
      Eigen::MatrixXd::Constant(max_bus + 1, max_hour, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [hour, bus, mw] : cells) {
    if (!std::isnan(profile(bus, hour - 1)))
      throw config_error("mean profile " + path + ": duplicate entry for hour " +
                         std::to_string(hour) + ", bus " + std::to_string(bus));
    profile(bus, hour - 1) = mw;
  }
  if (profile.hasNaN())
    throw config_error("mean profile " + path + ": missing (hour, bus) entries");
  return profile;
}

std::string config_schema() {
  return R"schema({
  "schema_version": "ramplab-config/1",
  "blocks": {
    "network": {
      "type": "'single_bus' or 'radial'",
      "buses": "radial only: bus count",
      "reference_bus": "radial only: angle reference bus index (default 0)",
      "labels": "radial only, optional: bus label strings",
      "lines": "radial only: [{from, to, limit_forward, limit_backward}] in MW"
    },
    "generators": [{
      "id": "unique name",
      "bus": "bus index (default 0)",
      "marginal_cost": "$/MWh",
      "quadratic_cost": "$/MW^2h, optional (default 0)",
      "capacity": "MW",
      "ramp_up": "MW per interval (true limit)",
      "ramp_down": "MW per interval (true limit)",
      "revealed_ramp_up": "optional: limit submitted to the market",
      "revealed_ramp_down": "optional: limit submitted to the market"
    }],
    "rolling": {
      "horizon": "intervals T",
      "window": "look-ahead length W (1 <= W <= T)",
      "initial_dispatch": "optional per-generator MW anchoring the first ramp",
      "end_of_horizon": "'shrink' (default) or 'hold_forecast'",
      "slack_enabled": "emergency injection/curtailment (default false)",
      "slack_penalty": "$/MWh on slack (default 10000)",
      "kkt_tolerance": "solver acceptance (default 1e-8)"
    },
    "scenario": {
      "mean_profile": "inline [bus rows][T columns] in MW, or use mean_profile_file",
      "mean_profile_file": "CSV with columns hour,bus,MW (hour 1-based, bus 0-based)",
      "demand_std_fraction": "actual-demand spread around the mean (default 0)",
      "sigma_fractions": "one-step forecast error stds as fractions (default [0])",
      "scenarios": "Monte-Carlo draws per sweep point (default 1)",
      "base_seed": "root seed for all random streams (default 1)"
    },
    "sweep": {
      "kind": "'none' (default), 'ramp_path', 'revelation', 'sigma', 'line_capacity'",
      "points": "ramp_path: [{label, ramps: {generator id: symmetric MW limit}}]",
      "generator": "revelation: whose revealed limits vary",
      "grid": "revelation/sigma/line_capacity: numeric grid",
      "line": "line_capacity: line index (default 0)"
    },
    "policies": "non-empty subset of ['lmp','tlmp','pmp','cmp','mlmp']",
    "pricing": {
      "pmp_past_horizon": "past intervals kept in the price-preserving program (0 = all)",
      "pmp_past_balance": "also constrain past intervals (default false)",
      "pmp_past_uses_realized": "past balance uses realized demand (default true)"
    },
    "settlement": {
      "loc_uses_true_limits": "self-schedule against true instead of revealed limits",
      "exclude_congestion_rent": "keep congestion rent out of the consumer rebate"
    },
    "tolerances": {"check": "market identity tolerance (default 1e-6)"},
    "output_dir": "report directory (default 'out'; --out overrides)"
  },
  "outputs": ["loc_vs_sweep.csv", "iso_surplus.csv", "consumer_payment.csv",
              "generator_profit.csv", "volatility.csv", "prices_raw.csv"]
})schema";
}

bool verify_report::all_pass() const {
  for (const verify_line& line : lines)
    if (!line.pass) return false;
  return true;
}

void run_experiment(const experiment_config& config, const run_options& options) {
  experiment_config cfg = config;
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  if (options.seed) cfg.base_seed = *options.seed;
  cfg.validate();

  std::filesystem::create_directories(cfg.output_dir);
  const std::string marker =
      (std::filesystem::path(cfg.output_dir) / "INCOMPLETE").string();
  {
    std::ofstream m(marker);
    m << "run in flight or aborted; removed on success\n";
  }

  const std::vector<experiment_point> points = build_sweep(cfg.sweep, cfg.generators, cfg.net);
  std::vector<unit_task> tasks;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (double sigma : point_sigmas(points[p], cfg.sigma_fractions))
      for (int s = 0; s < cfg.num_scenarios; ++s)
        tasks.push_back({static_cast<int>(p), sigma, s});

  std::vector<unit_result> results(tasks.size());
  auto run_one = [&](std::size_t i) {
    const unit_task& task = tasks[i];
    const experiment_point& pt = points[task.point];
    try {
      results[i] = run_unit(cfg, pt, task.sigma, task.scenario);
    } catch (const solve_failure& e) {
      throw solve_failure(e.status, unit_coordinates(pt, task) + ": " + e.what(),
                          e.violated_rows);
    } catch (const invariant_violation& e) {
      throw invariant_violation(unit_coordinates(pt, task) + ": " + e.what());
    }
  };

  const int jobs = std::max(options.jobs, 1);
  if (jobs == 1 || tasks.size() < 2) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int spawn = std::min<std::size_t>(jobs, tasks.size());
    for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  csv_table loc_table("policy,sweep,value,sigma,scenario,seed,total_loc,generation_cost");
  csv_table iso_table(
      "policy,sweep,value,sigma,scenario,seed,iso_surplus,iso_surplus_less_congestion,"
      "merchandising_surplus,congestion_rent,ramping_surplus");
  csv_table pay_table(
      "policy,sweep,value,sigma,scenario,seed,demand_payment,adjusted_payment,"
      "adjusted_payment_keep_congestion");
  csv_table profit_table(
      "policy,sweep,value,sigma,scenario,seed,generator,revenue,loc,true_cost,profit");
  csv_table vol_table("policy,sweep,value,sigma,scenario,seed,hour,dispersion,flagged");
  csv_table raw_table(
      "policy,sweep,value,sigma,scenario,seed,t,bus,participant,price,energy,"
      "congestion,ramping");

  const std::string seed_cell = std::to_string(cfg.base_seed);
  std::size_t index = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const experiment_point& pt = points[p];
    for (double sigma : point_sigmas(pt, cfg.sigma_fractions)) {
      const std::size_t base = index;
      for (int s = 0; s < cfg.num_scenarios; ++s, ++index) {
        const unit_result& r = results[index];
        for (std::size_t pi = 0; pi < cfg.policies.size(); ++pi) {
          const settlement_report& rep = r.reports[pi];
          const std::vector<std::string> prefix = {
              policy_name(cfg.policies[pi]), pt.label, csv_number(pt.value),
              csv_number(sigma), std::to_string(s), seed_cell};

          std::vector<std::string> row = prefix;
          row.push_back(csv_number(rep.total_loc));
          row.push_back(csv_number(r.generation_cost));
          loc_table.add(row);

          row = prefix;
          row.push_back(csv_number(rep.iso_surplus));
          row.push_back(csv_number(rep.iso_surplus - rep.congestion_rent));
          row.push_back(csv_number(rep.merchandising_surplus));
          row.push_back(csv_number(rep.congestion_rent));
          row.push_back(csv_number(rep.ramping_surplus));
          iso_table.add(row);

          row = prefix;
          row.push_back(csv_number(rep.demand_payment));
          row.push_back(csv_number(rep.demand_payment - rep.iso_surplus));
          row.push_back(
              csv_number(rep.demand_payment - rep.iso_surplus + rep.congestion_rent));
          pay_table.add(row);

          for (const generator_settlement& gs : rep.generators) {
            row = prefix;
            row.push_back(gs.id);
            row.push_back(csv_number(gs.revenue));
            row.push_back(csv_number(gs.loc));
            row.push_back(csv_number(gs.true_cost));
            row.push_back(csv_number(gs.profit));
            profit_table.add(row);
          }

          const price_schedule& ps = r.prices[pi];
          const bool split = ps.energy_component.size() > 0;
          for (int t = 1; t <= cfg.rolling.horizon; ++t) {
            for (int m = 0; m < pt.net.num_buses(); ++m) {
              row = prefix;
              row.push_back(std::to_string(t));
              row.push_back(pt.net.bus_labels()[m]);
              row.push_back("DEMAND");
              row.push_back(csv_number(ps.demand_price(m, t - 1)));
              row.insert(row.end(), {"", "", ""});
              raw_table.add(row);
            }
            for (std::size_t i = 0; i < pt.generators.size(); ++i) {
              const int gi = static_cast<int>(i);
              row = prefix;
              row.push_back(std::to_string(t));
              row.push_back(pt.net.bus_labels()[pt.generators[i].bus]);
              row.push_back(pt.generators[i].id);
              row.push_back(csv_number(ps.generator_price(gi, t - 1)));
              if (split) {
                row.push_back(csv_number(ps.energy_component(gi, t - 1)));
                row.push_back(csv_number(ps.congestion_component(gi, t - 1)));
                row.push_back(csv_number(ps.ramping_component(gi, t - 1)));
              } else {
                row.insert(row.end(), {"", "", ""});
              }
              raw_table.add(row);
            }
          }
        }
      }

      // Aggregate and dispersion rows per (point, sigma, policy).
      for (std::size_t pi = 0; pi < cfg.policies.size(); ++pi) {
        const std::vector<std::string> prefix = {
            policy_name(cfg.policies[pi]), pt.label, csv_number(pt.value),
            csv_number(sigma)};
        std::vector<double> total_loc, gen_cost, iso, iso_less, ms, cr, ramp;
        std::vector<double> pay, adj, adj_keep;
        std::vector<std::vector<double>> by_gen(cfg.generators.size() * 4);
        for (int s = 0; s < cfg.num_scenarios; ++s) {
          const unit_result& r = results[base + s];
          const settlement_report& rep = r.reports[pi];
          total_loc.push_back(rep.total_loc);
          gen_cost.push_back(r.generation_cost);
          iso.push_back(rep.iso_surplus);
          iso_less.push_back(rep.iso_surplus - rep.congestion_rent);
          ms.push_back(rep.merchandising_surplus);
          cr.push_back(rep.congestion_rent);
          ramp.push_back(rep.ramping_surplus);
          pay.push_back(rep.demand_payment);
          adj.push_back(rep.demand_payment - rep.iso_surplus);
          adj_keep.push_back(rep.demand_payment - rep.iso_surplus + rep.congestion_rent);
          for (std::size_t i = 0; i < rep.generators.size(); ++i) {
            by_gen[4 * i + 0].push_back(rep.generators[i].revenue);
            by_gen[4 * i + 1].push_back(rep.generators[i].loc);
            by_gen[4 * i + 2].push_back(rep.generators[i].true_cost);
            by_gen[4 * i + 3].push_back(rep.generators[i].profit);
          }
        }
        add_aggregate_rows(loc_table, prefix, seed_cell, {}, {total_loc, gen_cost});
        add_aggregate_rows(iso_table, prefix, seed_cell, {},
                           {iso, iso_less, ms, cr, ramp});
        add_aggregate_rows(pay_table, prefix, seed_cell, {}, {pay, adj, adj_keep});
        for (std::size_t i = 0; i < pt.generators.size(); ++i)
          add_aggregate_rows(profit_table, prefix, seed_cell, {pt.generators[i].id},
                             {by_gen[4 * i + 0], by_gen[4 * i + 1], by_gen[4 * i + 2],
                              by_gen[4 * i + 3]});

        if (cfg.num_scenarios >= 2) {
          std::vector<Eigen::MatrixXd> series;
          for (int s = 0; s < cfg.num_scenarios; ++s) {
            const price_schedule& ps = results[base + s].prices[pi];
            if (cfg.policies[pi] == policy_kind::tlmp) {
              Eigen::MatrixXd stacked(ps.demand_price.rows() + ps.generator_price.rows(),
                                      ps.demand_price.cols());
              stacked << ps.demand_price, ps.generator_price;
              series.push_back(std::move(stacked));
            } else {
              series.push_back(ps.demand_price);
            }
          }
          const volatility_result vol = price_volatility(series);
          for (int h = 1; h <= cfg.rolling.horizon; ++h) {
            std::vector<std::string> row = prefix;
            row.push_back("agg");
            row.push_back(seed_cell);
            row.push_back(std::to_string(h));
            row.push_back(csv_number(vol.per_hour(h - 1)));
            row.push_back(vol.flagged_hour[h - 1] ? "1" : "0");
            vol_table.add(row);
          }
          std::vector<std::string> row = prefix;
          row.push_back("agg");
          row.push_back(seed_cell);
          row.push_back("avg");
          row.push_back(csv_number(vol.average));
          row.push_back(vol.any_flagged ? "1" : "0");
          vol_table.add(row);
        }
      }
    }
  }

  loc_table.save(cfg.output_dir, "loc_vs_sweep.csv", options.with_timestamp);
  iso_table.save(cfg.output_dir, "iso_surplus.csv", options.with_timestamp);
  pay_table.save(cfg.output_dir, "consumer_payment.csv", options.with_timestamp);
  profit_table.save(cfg.output_dir, "generator_profit.csv", options.with_timestamp);
  vol_table.save(cfg.output_dir, "volatility.csv", options.with_timestamp);
  raw_table.save(cfg.output_dir, "prices_raw.csv", options.with_timestamp);

  std::filesystem::remove(marker);
}

verify_report verify_experiment(const experiment_config& config, int random_instances,
                                std::ostream& log) {
  experiment_config cfg = config;
  cfg.validate();
  const double tol = cfg.check_tolerance;

  checker uniform_surplus("uniform-surplus-identity: lmp MS == sum c'phi", tol);
  checker temporal_uplift("temporal-zero-uplift: tlmp loc == 0", tol);
  checker demand_parity("temporal-demand-parity: tlmp demand price == lmp", tol);
  checker deviation_identity("deviation-uplift-identity: mlmp loc == lmp loc", tol);
  checker oneshot_decomp(
      "one-shot-surplus-decomposition: tlmp MS == ramping + congestion", tol);
  checker gap_identity("payment-gap-identity: lmp - tlmp revenue == dual formula", tol);
  checker gap_sign("payment-gap-nonnegative", tol);
  checker perfect_uplift("perfect-foresight-zero-uplift: one-shot lmp loc == 0", tol);

  auto check_rolling = [&](const rolling_trajectory& traj, const network& net,
                           const std::vector<generator_spec>& gens) {
    const price_schedule lmp = lmp_prices(traj, net, gens);
    const price_schedule tlmp = tlmp_prices(traj, net, gens);
    const settlement_report lrep = settle(traj, lmp, net, gens);
    uniform_surplus.feed(rel_diff(lrep.merchandising_surplus, lrep.congestion_rent));
    const double price_scale = 1.0 + lmp.demand_price.cwiseAbs().maxCoeff();
    demand_parity.feed(
        (tlmp.demand_price - lmp.demand_price).cwiseAbs().maxCoeff() / price_scale);
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const int gi = static_cast<int>(i);
      const loc_result tl = loc(tlmp.generator_price.row(gi).transpose(),
                                traj.dispatch.row(gi).transpose(), gens[i]);
      temporal_uplift.feed(std::abs(tl.loc) / (1.0 + std::abs(tl.dispatch_profit)));
      const loc_result direct = loc(lmp.generator_price.row(gi).transpose(),
                                    traj.dispatch.row(gi).transpose(), gens[i]);
      const loc_result dev =
          loc_mlmp(traj, lmp.generator_price.row(gi).transpose(), gi, gens[i]);
      deviation_identity.feed(rel_diff(direct.loc, dev.loc));
    }
  };

  auto check_one_shot = [&](const Eigen::MatrixXd& actual, const network& net,
                            const std::vector<generator_spec>& gens,
                            const rolling_config& base_config) {
    rolling_config rc = base_config;
    rc.horizon = static_cast<int>(actual.cols());
    rc.initial_dispatch.reset();
    rc.slack_enabled = true;
    const rolling_trajectory traj = one_shot(actual, net, gens, rc);
    const price_schedule lmp = lmp_prices(traj, net, gens);
    const price_schedule tlmp = tlmp_prices(traj, net, gens);
    const settlement_report trep = settle(traj, tlmp, net, gens);
    oneshot_decomp.feed(rel_diff(trep.merchandising_surplus,
                                 trep.ramping_surplus + trep.congestion_rent));
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const int gi = static_cast<int>(i);
      const revenue_gap_result gap = revenue_gap(traj, net, gens, gi);
      gap_identity.feed(rel_diff(gap.direct, gap.formula));
      gap_sign.feed(std::max(0.0, -gap.direct) / (1.0 + std::abs(gap.direct)));
      const loc_result lr = loc(lmp.generator_price.row(gi).transpose(),
                                traj.dispatch.row(gi).transpose(), gens[i]);
      perfect_uplift.feed(std::abs(lr.loc) / (1.0 + std::abs(lr.dispatch_profit)));
    }
  };

  // Configured instance: rolling runs on the first sweep point, then a
  // free-boundary one-shot run on the mean profile.
  const std::vector<experiment_point> points = build_sweep(cfg.sweep, cfg.generators, cfg.net);
  const experiment_point& pt = points.front();
  const int checked_scenarios = std::min(cfg.num_scenarios, 3);
  for (double sigma : point_sigmas(pt, cfg.sigma_fractions))
    for (int s = 0; s < checked_scenarios; ++s) {
      const demand_scenario sc = generate_scenario(
          cfg.base_seed, s, cfg.mean_profile.leftCols(cfg.rolling.horizon),
          cfg.demand_std_fraction, sigma, std::max(cfg.rolling.window - 1, 0));
      check_rolling(run_rolling(sc, pt.net, pt.generators, cfg.rolling), pt.net,
                    pt.generators);
    }
  check_one_shot(cfg.mean_profile.leftCols(cfg.rolling.horizon), pt.net, pt.generators,
                 cfg.rolling);

  // Randomized bank of small instances.
  std::mt19937_64 eng(rng::derive(cfg.base_seed, {0x76657269667900ULL}));
  std::uniform_int_distribution<int> gen_count(2, 4);
  std::uniform_int_distribution<int> horizon_draw(2, 6);
  std::uniform_real_distribution<double> cost(5.0, 45.0);
  std::uniform_real_distribution<double> capacity(120.0, 320.0);
  std::uniform_real_distribution<double> ramp(10.0, 90.0);
  std::uniform_real_distribution<double> line_cap(30.0, 120.0);
  std::uniform_real_distribution<double> load(30.0, 180.0);
  const double sigma_bank[3] = {0.0, 0.006, 0.06};
  for (int k = 0; k < random_instances; ++k) {
    const int T = horizon_draw(eng);
    std::uniform_int_distribution<int> window_draw(1, T);
    const int W = window_draw(eng);
    const bool two_bus = (eng() & 1u) != 0;
    const double cap = line_cap(eng);
    const network net =
        two_bus ? network::radial({{0, 1, cap, cap}}, 1, 2) : network::single_bus();
    const int n = gen_count(eng);
    std::vector<generator_spec> gens(n);
    for (int i = 0; i < n; ++i) {
      gens[i].id = "G" + std::to_string(i + 1);
      gens[i].bus = i % net.num_buses();
      gens[i].marginal_cost = cost(eng);
      gens[i].capacity = capacity(eng);
      gens[i].ramp_up = ramp(eng);
      gens[i].ramp_down = ramp(eng);
    }
    Eigen::MatrixXd mean(net.num_buses(), T);
    for (int m = 0; m < net.num_buses(); ++m)
      for (int t = 0; t < T; ++t) mean(m, t) = load(eng);
    const double sigma = sigma_bank[eng() % 3];

    rolling_config rc;
    rc.horizon = T;
    rc.window = W;
    rc.slack_enabled = true;
    const demand_scenario sc = generate_scenario(cfg.base_seed, 100000 + k, mean, 0.1,
                                                 sigma, std::max(W - 1, 0));
    check_rolling(run_rolling(sc, net, gens, rc), net, gens);
    check_one_shot(sc.actual, net, gens, rc);
  }

  verify_report report;
  for (checker* c : {&uniform_surplus, &temporal_uplift, &demand_parity,
                     &deviation_identity, &oneshot_decomp, &gap_identity, &gap_sign,
                     &perfect_uplift}) {
    report.lines.push_back(c->line);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-4s  %-62s  instances %3d  max violation %.3e\n",
                  c->line.pass ? "PASS" : "FAIL", c->line.name.c_str(),
                  c->line.instances, c->line.max_violation);
    log << buf;
  }
  return report;
}

}  // namespace ramplab
