// resnet_lab command-line driver.
//
// Exit codes: 0 pass, 1 quantitative verdict failed, 2 usage/config/input
// error, 3 numeric abort.

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "config.hpp"
#include "resnet_lab/csv.hpp"
#include "resnet_lab/init.hpp"
#include "resnet_lab/io.hpp"

namespace fs = std::filesystem;
using namespace resnet_lab;
using namespace resnet_lab::cli;

namespace {

enum Exit { kPass = 0, kVerdictFail = 1, kConfigError = 2, kNumericAbort = 3 };

std::string fmt(double v) { return csv::format_short(v); }

void write_manifest(const RunConfig& cfg, const std::string& command, nlohmann::json extra = {}) {
  auto doc = manifest(cfg, command);
  for (auto& [k, v] : extra.items()) doc[k] = v;
  io::write_json(cfg.out / "manifest.json", doc);
}

void report_audit(const AuditReport& audit) {
  if (audit.pass()) return;
  std::cerr << "warning: " << audit.violations.size() << " E_s increase(s) beyond slack " << audit.slack
            << "; first at trace row " << audit.violations.front().row << '\n';
}

void print_trace_summary(const FlowTrace& trace) {
  const auto& last = trace.rows.back();
  std::cout << "s=" << fmt(last.s) << " E=" << fmt(last.E) << " E_s=" << fmt(last.E_s)
            << " trace_checksum=" << csv::hex64(trace.checksum()) << '\n';
}

ParamPathEnsemble initial_ensemble(const RunConfig& cfg, const ActivationFamily& fam, int M, int N_t,
                                   double scale) {
  if (cfg.model.init.empty()) return sample_t_constant(fam, M, N_t, scale, cfg.seed);
  auto loaded = io::load_ensemble(cfg.model.init);
  if (loaded.family.kind != fam.kind || loaded.family.d != fam.d)
    throw ConfigError("key 'model.init': ensemble family does not match 'family'");
  return loaded.ensemble;
}

// ---------------------------------------------------------------------------

int train_discrete(const RunConfig& cfg) {
  const Problem& pb = cfg.require_problem();
  ParamGrid grid;
  if (!cfg.model.init.empty()) {
    auto loaded = io::load_grid(cfg.model.init);
    if (loaded.family.kind != pb.family.kind || loaded.family.d != pb.family.d)
      throw ConfigError("key 'model.init': grid family does not match 'family'");
    grid = loaded.grid;
  } else {
    grid = grid_from_ensemble(sample_t_constant(pb.family, cfg.model.M, 1, cfg.model.init_scale, cfg.seed),
                              cfg.model.L);
  }
  const auto r = flow_discrete(grid, pb.family, pb.g, pb.data, cfg.flow);
  io::save_grid(r.final, pb.family, cfg.out / "grid.csv");
  r.trace.save_csv(cfg.out / "trace.csv");
  write_manifest(cfg, "train-discrete", {{"trace_checksum", csv::hex64(r.trace.checksum())},
                                         {"audit_violations", r.audit.violations.size()}});
  print_trace_summary(r.trace);
  report_audit(r.audit);
  return kPass;
}

int train_continuum(const RunConfig& cfg) {
  const Problem& pb = cfg.require_problem();
  const auto ens = initial_ensemble(cfg, pb.family, cfg.model.M, cfg.model.N_t, cfg.model.init_scale);
  const auto r = flow_continuum(ens, pb.family, pb.g, pb.data, DepthGrid(ens.N_t), cfg.flow);
  io::save_ensemble(r.final, pb.family, cfg.out / "ensemble.csv");
  r.trace.save_csv(cfg.out / "trace.csv");
  write_manifest(cfg, "train-continuum", {{"trace_checksum", csv::hex64(r.trace.checksum())},
                                          {"audit_violations", r.audit.violations.size()}});
  print_trace_summary(r.trace);
  report_audit(r.audit);
  return kPass;
}

int sweep_depth(const RunConfig& cfg) {
  DepthSweepConfig sc = cfg.depth;
  sc.problem = cfg.require_problem();
  const auto r = depth_sweep(sc);
  const auto& v = cfg.depth_verdict;
  const bool pass = r.fitted_slope >= v.slope_min && r.fitted_slope <= v.slope_max && r.r_squared >= v.min_r_squared;
  auto doc = manifest(cfg, "sweep-depth");
  doc["pass"] = pass;
  write_sweep(r, cfg.out, "depth", doc);
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    const std::string name =
        i < sc.L_values.size() ? "trace_L" + std::to_string(sc.L_values[i]) : std::string("trace_reference");
    r.traces[i].save_csv(cfg.out / "traces" / (name + ".csv"));
  }
  for (const auto& p : r.points) std::cout << "L=" << p.value << " |E_L-E|=" << fmt(p.error) << '\n';
  std::cout << "slope=" << fmt(r.fitted_slope) << " r_squared=" << fmt(r.r_squared) << " target=["
            << fmt(v.slope_min) << ", " << fmt(v.slope_max) << "] " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kPass : kVerdictFail;
}

int sweep_width(const RunConfig& cfg) {
  WidthSweepConfig sc = cfg.width;
  sc.problem = cfg.require_problem();
  const auto r = width_sweep(sc);
  const auto& v = cfg.width_verdict;
  const bool pass = std::abs(r.fitted_slope - v.slope_target) <= v.slope_tolerance && r.r_squared >= v.min_r_squared;
  auto doc = manifest(cfg, "sweep-width");
  doc["pass"] = pass;
  write_sweep(r, cfg.out, "width", doc);
  for (const auto& p : r.points)
    std::cout << "M=" << p.value << " std=" << fmt(p.error) << " bias=" << fmt(p.aux) << '\n';
  for (const auto& f : r.flags) std::cout << "note: " << f << '\n';
  std::cout << "slope=" << fmt(r.fitted_slope) << " r_squared=" << fmt(r.r_squared) << " target="
            << fmt(v.slope_target) << "+-" << fmt(v.slope_tolerance) << ' ' << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kPass : kVerdictFail;
}

int zero_loss(const RunConfig& cfg) {
  ZeroLossConfig zc = cfg.zero_loss;
  zc.problem = cfg.require_problem();
  if (!cfg.model.init.empty())
    zc.initial = initial_ensemble(cfg, zc.problem.family, zc.M, zc.N_t, zc.init_scale);
  const auto r = zero_loss_run(zc);
  io::save_ensemble(r.flow.final, zc.problem.family, cfg.out / "ensemble.csv");
  r.flow.trace.save_csv(cfg.out / "trace.csv");
  std::ostringstream spread;
  spread << "j,min_pairwise,median_pairwise\n";
  for (std::size_t j = 0; j < r.spread.size(); ++j)
    spread << j << ',' << csv::format_double(r.spread[j].min_pairwise) << ','
           << csv::format_double(r.spread[j].median_pairwise) << '\n';
  csv::write_text(cfg.out / "spread.csv", spread.str());
  write_manifest(cfg, "zero-loss", {{"final_E", r.final_E},
                                    {"below_threshold", r.below_threshold},
                                    {"monotone", r.monotone},
                                    {"first_increase_step", r.first_increase_step},
                                    {"audit_violations", r.flow.audit.violations.size()},
                                    {"trace_checksum", csv::hex64(r.flow.trace.checksum())},
                                    {"pass", r.pass()}});
  std::cout << "E(0)=" << fmt(r.initial_E) << " E(S)=" << fmt(r.final_E) << " threshold=" << fmt(zc.threshold)
            << " monotone=" << (r.monotone ? "yes" : "no") << " audit_violations=" << r.flow.audit.violations.size()
            << ' ' << (r.pass() ? "PASS" : "FAIL") << '\n';
  return r.pass() ? kPass : kVerdictFail;
}

int gradcheck(const RunConfig& cfg, bool write) {
  const auto rep = gradcheck_suite(cfg.gradcheck);
  std::cout << "discrete: max_rel_err=" << fmt(rep.discrete_max_rel) << " over " << rep.discrete_checked
            << " entries (tol " << fmt(cfg.gradcheck.discrete_tol) << ")\n"
            << "continuum: max_rel_err=" << fmt(rep.continuum_max_rel) << " over " << rep.continuum_checked
            << " directions (tol " << fmt(cfg.gradcheck.continuum_tol) << ")\n"
            << "interpolating configs give zero gradient: " << (rep.interpolating_zero ? "yes" : "no") << '\n'
            << (rep.pass() ? "PASS" : "FAIL") << '\n';
  if (write)
    write_manifest(cfg, "gradcheck", {{"discrete_max_rel", rep.discrete_max_rel},
                                      {"continuum_max_rel", rep.continuum_max_rel},
                                      {"interpolating_zero", rep.interpolating_zero},
                                      {"pass", rep.pass()}});
  return rep.pass() ? kPass : kVerdictFail;
}

int energy_audit_cmd(const fs::path& trace_path, double slack) {
  const auto rep = energy_audit(FlowTrace::load_csv(trace_path), slack);
  for (const auto& v : rep.violations)
    std::cout << "row " << v.row << ": E_s " << csv::format_double(v.before) << " -> "
              << csv::format_double(v.after) << '\n';
  std::cout << rep.violations.size() << " violation(s) at slack " << fmt(slack) << ' '
            << (rep.pass() ? "PASS" : "FAIL") << '\n';
  return rep.pass() ? kPass : kVerdictFail;
}

int w2_cmd(const fs::path& a, const fs::path& b, int sliced, std::uint64_t seed) {
  const auto ca = io::load_cloud(a);
  const auto cb = io::load_cloud(b);
  const double dist = sliced > 0 ? w2_sliced(ca, cb, sliced, seed) : w2_exact(ca, cb);
  std::cout << fmt(dist) << '\n';
  return kPass;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericOverflow& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kNumericAbort;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite and continuous-depth ResNet gradient flows with a verification harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RESNET_LAB_VERSION);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  auto add_run_options = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", out, "output directory (overrides 'out')");
    sub->add_option("--seed", seed, "seed (overrides 'seed')");
  };

  using Command = std::function<int(const RunConfig&)>;
  std::vector<std::pair<CLI::App*, Command>> run_commands;
  auto add_run_command = [&](const std::string& name, const std::string& help, Command cmd) {
    auto* sub = app.add_subcommand(name, help);
    add_run_options(sub, true);
    run_commands.emplace_back(sub, std::move(cmd));
  };
  add_run_command("train-discrete", "gradient flow of the finite network", train_discrete);
  add_run_command("train-continuum", "gradient flow of the continuous-depth particle ensemble", train_continuum);
  add_run_command("sweep-depth", "|E_L - E| against depth L", sweep_depth);
  add_run_command("sweep-width", "across-seed spread of E against width M", sweep_width);
  add_run_command("zero-loss", "long run on an interpolation task", zero_loss);

  auto* grad_cmd = app.add_subcommand("gradcheck", "adjoint gradients against finite differences");
  add_run_options(grad_cmd, false);

  fs::path trace_path;
  double slack = 1e-10;
  auto* audit_cmd = app.add_subcommand("energy-audit", "check a trace for E_s increases");
  audit_cmd->add_option("trace", trace_path, "trace CSV")->required()->check(CLI::ExistingFile);
  audit_cmd->add_option("--slack", slack, "allowed increase per row")->capture_default_str();

  fs::path cloud_a, cloud_b;
  int sliced = 0;
  std::uint64_t w2_seed = 0;
  auto* w2 = app.add_subcommand("w2", "Wasserstein-2 distance between two particle clouds");
  w2->add_option("a", cloud_a, "particle CSV")->required()->check(CLI::ExistingFile);
  w2->add_option("b", cloud_b, "particle CSV")->required()->check(CLI::ExistingFile);
  w2->add_option("--sliced", sliced, "use this many random projections instead of the exact distance");
  w2->add_option("--seed", w2_seed, "projection seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  for (auto& [sub, cmd] : run_commands)
    if (sub->parsed())
      return guarded([&] { return cmd(load_run_config(config_path, out, seed)); });
  if (grad_cmd->parsed())
    return guarded([&] {
      const bool has_file = !config_path.empty();
      const auto cfg = has_file ? load_run_config(config_path, out, seed) : default_run_config(out, seed);
      return gradcheck(cfg, has_file || out.has_value());
    });
  if (audit_cmd->parsed()) return guarded([&] { return energy_audit_cmd(trace_path, slack); });
  if (w2->parsed()) return guarded([&] { return w2_cmd(cloud_a, cloud_b, sliced, w2_seed); });
  return kConfigError;
}
