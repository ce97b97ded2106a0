#include "resnet_lab/flow.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "resnet_lab/csv.hpp"

namespace resnet_lab {

std::string to_string(Integrator integrator) {
  return integrator == Integrator::Euler ? "euler" : "rk4";
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler" || name == "Euler") return Integrator::Euler;
  if (name == "rk4" || name == "RK4") return Integrator::RK4;
  throw ContractViolation("unknown integrator '" + name + "'");
}

void FlowConfig::validate() const {
  require(h_s > 0.0 && std::isfinite(h_s), "flow: h_s must be positive");
  require(steps >= 1, "flow: steps must be at least 1");
  require(snapshot_every >= 1, "flow: snapshot_every must be at least 1");
  require(audit_slack >= 0.0, "flow: audit slack must be nonnegative");
}

// ---------------------------------------------------------------------------
// Trace IO

namespace {
constexpr const char* kTraceHeader = "s,E,E_s,second_moment,grad_norm,wall_ms";
}

void FlowTrace::save_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << csv::format_double(r.s) << ',' << csv::format_double(r.E) << ','
        << csv::format_double(r.E_s) << ',' << csv::format_double(r.second_moment) << ','
        << csv::format_double(r.grad_norm) << ',' << csv::format_double(r.wall_ms) << '\n';
  }
  csv::write_text(path, out.str());
}

FlowTrace FlowTrace::load_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError("empty trace", 0);
  if (lines[0] != kTraceHeader) throw ParseError(std::string("trace header must be ") + kTraceHeader, 0);
  FlowTrace trace;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const long row = static_cast<long>(i);
    const auto f = csv::split(lines[i]);
    if (f.size() != 6) throw ParseError("expected 6 columns, found " + std::to_string(f.size()), row);
    FlowTraceRow r;
    r.s = csv::parse_double(f[0], row);
    r.E = csv::parse_double(f[1], row);
    r.E_s = csv::parse_double(f[2], row);
    r.second_moment = csv::parse_double(f[3], row);
    r.grad_norm = csv::parse_double(f[4], row);
    r.wall_ms = csv::parse_double(f[5], row);
    trace.rows.push_back(r);
  }
  return trace;
}

std::uint64_t FlowTrace::checksum() const {
  std::uint64_t h = csv::fnv1a("");
  for (const auto& r : rows) {
    for (double v : {r.s, r.E, r.E_s, r.second_moment, r.grad_norm}) {
      h = csv::fnv1a(csv::format_double(v), h);
      h = csv::fnv1a(",", h);
    }
  }
  return h;
}

AuditReport energy_audit(const FlowTrace& trace, double slack) {
  AuditReport rep;
  rep.slack = slack;
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    const double before = trace.rows[i - 1].E_s;
    const double after = trace.rows[i].E_s;
    if (after > before + slack) rep.violations.push_back({i, before, after});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Generic driver. State exposes `values` (an Eigen matrix); `eval(state, s, E)`
// returns the update direction and sets E; `moment(state)` is the
// regularizer's second-moment term.

namespace {

using Clock = std::chrono::steady_clock;

template <typename State, typename Eval, typename Moment>
State integrate(const State& initial, const FlowConfig& cfg, Eval&& eval, Moment&& moment,
                FlowTrace& trace, std::vector<State>* snapshots) {
  cfg.validate();
  const auto start = Clock::now();
  State state = initial;
  const double h = cfg.h_s;

  auto record = [&](long step, double E, const State& dir) {
    const double s = step * h;
    FlowTraceRow row;
    row.s = s;
    row.E = E;
    row.second_moment = moment(state);
    row.E_s = E + std::exp(-s) * row.second_moment;
    row.grad_norm = dir.values.norm();
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    trace.rows.push_back(row);
    if (snapshots) snapshots->push_back(state);
  };

  auto guarded_eval = [&](const State& st, double s, double& E, long step) {
    try {
      return eval(st, s, E);
    } catch (const NumericOverflow& e) {
      throw NumericOverflow(std::string(e.what()) + " during flow step", step);
    }
  };

  for (long step = 0; step <= cfg.steps; ++step) {
    const double s = step * h;
    double E = 0.0;
    State k1 = guarded_eval(state, s, E, step);
    if (step % cfg.snapshot_every == 0 || step == cfg.steps) record(step, E, k1);
    if (step == cfg.steps) break;

    if (cfg.integrator == Integrator::Euler) {
      state.values += h * k1.values;
    } else {
      double unused = 0.0;
      State tmp = state;
      tmp.values = state.values + 0.5 * h * k1.values;
      State k2 = guarded_eval(tmp, s + 0.5 * h, unused, step);
      tmp.values = state.values + 0.5 * h * k2.values;
      State k3 = guarded_eval(tmp, s + 0.5 * h, unused, step);
      tmp.values = state.values + h * k3.values;
      State k4 = guarded_eval(tmp, s + h, unused, step);
      state.values += (h / 6.0) * (k1.values + 2.0 * k2.values + 2.0 * k3.values + k4.values);
    }
    if (!state.values.allFinite())
      throw NumericOverflow("flow: non-finite parameters after step", step + 1);
  }
  return state;
}

}  // namespace

ParamGrid discrete_direction(const ParamGrid& grid, const ActivationFamily& fam,
                             const MeasuringFunction& g, const Dataset& data, double s,
                             double* loss_out) {
  auto lg = loss_and_grad(grid, fam, g, data);
  if (loss_out) *loss_out = lg.loss;
  const double scale = static_cast<double>(grid.M) * grid.L;
  lg.grad.values = -(scale * lg.grad.values + 2.0 * std::exp(-s) * grid.values);
  return std::move(lg.grad);
}

DiscreteFlowResult flow_discrete(const ParamGrid& grid, const ActivationFamily& fam,
                                 const MeasuringFunction& g, const Dataset& data,
                                 const FlowConfig& cfg) {
  detail::check_problem(grid, fam, g, data);
  DiscreteFlowResult result;
  auto eval = [&](const ParamGrid& st, double s, double& E) {
    return discrete_direction(st, fam, g, data, s, &E);
  };
  auto moment = [](const ParamGrid& st) { return st.second_moment(); };
  result.final = integrate(grid, cfg, eval, moment, result.trace,
                           static_cast<std::vector<ParamGrid>*>(nullptr));
  result.audit = energy_audit(result.trace, cfg.audit_slack);
  return result;
}

ContinuumFlowResult flow_continuum(const ParamPathEnsemble& ens, const ActivationFamily& fam,
                                   const MeasuringFunction& g, const Dataset& data,
                                   const DepthGrid& grid, const FlowConfig& cfg) {
  detail::check_continuum_problem(ens, fam, g, data, grid);
  ContinuumFlowResult result;
  auto eval = [&](const ParamPathEnsemble& st, double s, double& E) {
    auto lg = loss_and_functional_grad(st, fam, g, data, s, grid);
    E = lg.loss;
    lg.grad.values = -lg.grad.values;
    return std::move(lg.grad);
  };
  auto moment = [](const ParamPathEnsemble& st) { return integrated_second_moment(st); };
  result.final = integrate(ens, cfg, eval, moment, result.trace,
                           cfg.keep_snapshots ? &result.snapshots : nullptr);
  result.audit = energy_audit(result.trace, cfg.audit_slack);
  return result;
}

}  // namespace resnet_lab
