#include "config.hpp"

#include <fstream>
#include <set>

#include "resnet_lab/csv.hpp"
#include "resnet_lab/io.hpp"

namespace resnet_lab::cli {

namespace {

using nlohmann::json;

// Typed access to one JSON object with unknown-key rejection. `where` is the
// dotted path used in messages ("flow", "dataset.generate", ...).
class Section {
 public:
  Section(const json& node, std::string where, std::set<std::string> known)
      : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) throw ConfigError("'" + where_ + "' must be an object");
    for (const auto& item : node_.items())
      if (!known.count(item.key())) throw ConfigError("unknown key '" + key(item.key()) + "'");
  }

  bool has(const std::string& k) const { return node_.contains(k); }
  const json& at(const std::string& k) const {
    if (!has(k)) throw ConfigError("missing required key '" + key(k) + "'");
    return node_.at(k);
  }
  std::string key(const std::string& k) const { return where_.empty() ? k : where_ + "." + k; }

  template <typename T>
  void read(const std::string& k, T& target) const {
    if (!has(k)) return;
    target = get<T>(k);
  }

  template <typename T>
  T get(const std::string& k) const {
    const json& v = at(k);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("key '" + key(k) + "' has the wrong type");
    }
  }

  template <typename T>
  std::vector<T> list(const std::string& k) const {
    const json& v = at(k);
    if (!v.is_array()) throw ConfigError("key '" + key(k) + "' must be a list");
    std::vector<T> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("key '" + key(k) + "' must be a list of numbers");
      if (std::is_integral_v<T> && !e.is_number_integer())
        throw ConfigError("key '" + key(k) + "' must be a list of integers");
      out.push_back(e.get<T>());
    }
    return out;
  }

  Section child(const std::string& k, std::set<std::string> known) const {
    return Section(at(k), key(k), std::move(known));
  }

 private:
  const json& node_;
  std::string where_;
};

ActivationFamily parse_family(const Section& s) {
  ActivationFamily fam;
  try {
    fam.kind = family_kind_from_string(s.get<std::string>("kind"));
  } catch (const ContractViolation& e) {
    throw ConfigError(s.key("kind") + ": " + e.what());
  }
  fam.d = s.get<int>("d");
  s.read("tau", fam.tau);
  return fam;
}

MeasuringFunction parse_g(const Section& s) {
  const auto w = s.list<double>("w");
  double c = 0.0;
  s.read("c", c);
  return MeasuringFunction(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), c);
}

Dataset parse_dataset(const Section& s, const ActivationFamily& fam, const MeasuringFunction& g,
                      const std::filesystem::path& base_dir) {
  if (s.has("path") == s.has("generate"))
    throw ConfigError("'dataset' needs exactly one of 'dataset.path' or 'dataset.generate'");
  if (s.has("path")) {
    std::filesystem::path p = s.get<std::string>("path");
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p))
      throw ConfigError("key 'dataset.path': no such file '" + p.string() + "'");
    return load_csv(p);
  }
  const Section gen = s.child("generate", {"n", "radius", "seed", "labels"});
  LabelRule rule;
  rule.family = fam;
  rule.g = g;
  double radius = 1.0;
  std::uint64_t seed = 1;
  gen.read("radius", radius);
  gen.read("seed", seed);
  if (gen.has("labels")) {
    const Section lab = gen.child("labels", {"kind", "value", "frequency", "teacher_width", "teacher_scale",
                                             "teacher_seed", "teacher_depth_steps"});
    try {
      rule.kind = label_kind_from_string(lab.get<std::string>("kind"));
    } catch (const ContractViolation& e) {
      throw ConfigError(lab.key("kind") + ": " + e.what());
    }
    lab.read("value", rule.value);
    lab.read("frequency", rule.frequency);
    lab.read("teacher_width", rule.teacher_width);
    lab.read("teacher_scale", rule.teacher_scale);
    lab.read("teacher_seed", rule.teacher_seed);
    lab.read("teacher_depth_steps", rule.teacher_depth_steps);
  }
  return generate(seed, gen.get<int>("n"), fam.d, radius, rule);
}

void parse_flow(const Section& s, FlowConfig& flow) {
  s.read("h_s", flow.h_s);
  s.read("steps", flow.steps);
  if (s.has("integrator")) {
    try {
      flow.integrator = integrator_from_string(s.get<std::string>("integrator"));
    } catch (const ContractViolation& e) {
      throw ConfigError(s.key("integrator") + ": " + e.what());
    }
  }
  s.read("snapshot_every", flow.snapshot_every);
  s.read("audit_slack", flow.audit_slack);
}

RunConfig build(json raw, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  const Section top(raw, "",
                    {"out", "seed", "family", "measuring_function", "dataset", "flow", "model", "depth_sweep",
                     "width_sweep", "zero_loss", "gradcheck"});
  if (top.has("out")) cfg.out = top.get<std::string>("out");
  top.read("seed", cfg.seed);

  if (top.has("flow")) parse_flow(top.child("flow", {"h_s", "steps", "integrator", "snapshot_every", "audit_slack"}), cfg.flow);
  cfg.flow.seed = cfg.seed;

  if (top.has("model")) {
    const Section m = top.child("model", {"L", "M", "N_t", "init_scale", "init"});
    m.read("L", cfg.model.L);
    m.read("M", cfg.model.M);
    m.read("N_t", cfg.model.N_t);
    m.read("init_scale", cfg.model.init_scale);
    if (m.has("init")) {
      cfg.model.init = m.get<std::string>("init");
      if (cfg.model.init.is_relative()) cfg.model.init = base_dir / cfg.model.init;
    }
  }

  // Problem: family, read-out and data. Missing pieces only matter to the
  // commands that need them.
  std::optional<ActivationFamily> fam;
  std::optional<MeasuringFunction> g;
  if (top.has("family")) fam = parse_family(top.child("family", {"kind", "d", "tau"}));
  if (top.has("measuring_function")) g = parse_g(top.child("measuring_function", {"w", "c"}));
  if (!fam) {
    cfg.missing_problem_key = "family";
  } else if (!g) {
    cfg.missing_problem_key = "measuring_function";
  } else if (!top.has("dataset")) {
    cfg.missing_problem_key = "dataset";
  } else {
    Problem pb;
    pb.family = *fam;
    pb.g = *g;
    pb.data = parse_dataset(top.child("dataset", {"path", "generate"}), *fam, *g, base_dir);
    try {
      pb.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
    cfg.problem = std::move(pb);
  }

  if (top.has("depth_sweep")) {
    const Section s = top.child("depth_sweep", {"M", "init_scale", "L_values", "reference_N_t", "slope_min",
                                                "slope_max", "min_r_squared"});
    s.read("M", cfg.depth.M);
    s.read("init_scale", cfg.depth.init_scale);
    if (s.has("L_values")) cfg.depth.L_values = s.list<int>("L_values");
    s.read("reference_N_t", cfg.depth.reference_N_t);
    s.read("slope_min", cfg.depth_verdict.slope_min);
    s.read("slope_max", cfg.depth_verdict.slope_max);
    s.read("min_r_squared", cfg.depth_verdict.min_r_squared);
  }
  if (cfg.depth.L_values.size() < 3) throw ConfigError("key 'depth_sweep.L_values' needs at least 3 values");
  cfg.depth.seed = cfg.seed;
  cfg.depth.flow = cfg.flow;

  if (top.has("width_sweep")) {
    const Section s = top.child("width_sweep", {"N_t", "init_scale", "M_values", "n_seeds", "M_ref", "shared_draw",
                                                "slope_target", "slope_tolerance", "min_r_squared"});
    s.read("N_t", cfg.width.N_t);
    s.read("init_scale", cfg.width.init_scale);
    if (s.has("M_values")) cfg.width.M_values = s.list<int>("M_values");
    s.read("n_seeds", cfg.width.n_seeds);
    s.read("M_ref", cfg.width.M_ref);
    s.read("shared_draw", cfg.width.shared_draw);
    s.read("slope_target", cfg.width_verdict.slope_target);
    s.read("slope_tolerance", cfg.width_verdict.slope_tolerance);
    s.read("min_r_squared", cfg.width_verdict.min_r_squared);
  }
  if (cfg.width.M_values.size() < 3) throw ConfigError("key 'width_sweep.M_values' needs at least 3 values");
  if (cfg.width.n_seeds < 5) throw ConfigError("key 'width_sweep.n_seeds' must be at least 5");
  cfg.width.seed = cfg.seed;
  cfg.width.flow = cfg.flow;

  if (top.has("zero_loss")) {
    const Section s = top.child("zero_loss", {"M", "N_t", "init_scale", "threshold", "monotone_after",
                                              "monotone_slack"});
    s.read("M", cfg.zero_loss.M);
    s.read("N_t", cfg.zero_loss.N_t);
    s.read("init_scale", cfg.zero_loss.init_scale);
    s.read("threshold", cfg.zero_loss.threshold);
    s.read("monotone_after", cfg.zero_loss.monotone_after);
    s.read("monotone_slack", cfg.zero_loss.monotone_slack);
  }
  cfg.zero_loss.seed = cfg.seed;
  cfg.zero_loss.flow = cfg.flow;

  if (top.has("gradcheck")) {
    const Section s = top.child("gradcheck", {"seed", "discrete_configs", "continuum_configs", "continuum_N_t",
                                              "directions", "discrete_h", "continuum_eps", "discrete_tol",
                                              "continuum_tol"});
    s.read("seed", cfg.gradcheck.seed);
    s.read("discrete_configs", cfg.gradcheck.discrete_configs);
    s.read("continuum_configs", cfg.gradcheck.continuum_configs);
    s.read("continuum_N_t", cfg.gradcheck.continuum_N_t);
    s.read("directions", cfg.gradcheck.directions_per_config);
    s.read("discrete_h", cfg.gradcheck.discrete_h);
    s.read("continuum_eps", cfg.gradcheck.continuum_eps);
    s.read("discrete_tol", cfg.gradcheck.discrete_tol);
    s.read("continuum_tol", cfg.gradcheck.continuum_tol);
  }

  try {
    cfg.flow.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  cfg.raw = std::move(raw);
  return cfg;
}

json apply_overrides(json raw, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed) {
  if (out) raw["out"] = *out;
  if (seed) raw["seed"] = *seed;
  return raw;
}

}  // namespace

const Problem& RunConfig::require_problem() const {
  if (!problem) throw ConfigError("missing required key '" + missing_problem_key + "'");
  return *problem;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::optional<std::string>& out,
                          const std::optional<std::uint64_t>& seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json raw;
  try {
    in >> raw;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return build(apply_overrides(std::move(raw), out, seed), path.parent_path());
}

RunConfig default_run_config(const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed) {
  return build(apply_overrides(json::object(), out, seed), std::filesystem::current_path());
}

json manifest(const RunConfig& cfg, const std::string& command) {
  json versions = json::object();
  for (const char* module : {"activation", "dataset", "resnet_discrete", "continuum", "measure", "flow_driver",
                             "experiments", "cli"})
    versions[module] = RESNET_LAB_VERSION;
  json doc = {{"command", command},
              {"config_hash", csv::hex64(io::json_hash(cfg.raw))},
              {"seed", cfg.seed},
              {"module_versions", versions},
              {"config", cfg.raw}};
  doc["dataset_checksum"] = cfg.problem ? json(csv::hex64(checksum(cfg.problem->data))) : json(nullptr);
  return doc;
}

}  // namespace resnet_lab::cli
