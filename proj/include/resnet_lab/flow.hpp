#pragma once

// Pseudo-time integration of the regularized gradient flows
//   finite network:   dTheta/ds   = -M L grad E(Theta) - 2 e^{-s} Theta
//   continuum paths:  dtheta_m/ds = -G_m(t)   (functional gradient incl. regularizer)
// with a per-snapshot trace of E, E_s and the second moment.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/dataset.hpp"
#include "resnet_lab/resnet_discrete.hpp"

namespace resnet_lab {

enum class Integrator { Euler, RK4 };

std::string to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& name);

struct FlowConfig {
  double h_s = 1e-3;
  long steps = 1000;
  Integrator integrator = Integrator::Euler;
  long snapshot_every = 1;
  std::uint64_t seed = 0;
  double audit_slack = 1e-10;
  /// Keep a copy of the parameters at every trace row (continuum only).
  bool keep_snapshots = false;

  void validate() const;
};

struct FlowTraceRow {
  double s = 0.0;
  double E = 0.0;
  double E_s = 0.0;
  double second_moment = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct FlowTrace {
  std::vector<FlowTraceRow> rows;

  void save_csv(const std::filesystem::path& path) const;
  static FlowTrace load_csv(const std::filesystem::path& path);

  /// FNV-1a over every column except wall_ms, so reruns compare equal.
  std::uint64_t checksum() const;
};

struct EnergyViolation {
  std::size_t row = 0;  // the later row of the offending pair
  double before = 0.0;
  double after = 0.0;
};

struct AuditReport {
  std::vector<EnergyViolation> violations;
  double slack = 0.0;
  bool pass() const { return violations.empty(); }
};

/// Flags every consecutive pair with E_s(next) > E_s(prev) + slack.
AuditReport energy_audit(const FlowTrace& trace, double slack);

struct DiscreteFlowResult {
  ParamGrid final;
  FlowTrace trace;
  AuditReport audit;
};

struct ContinuumFlowResult {
  ParamPathEnsemble final;
  FlowTrace trace;
  AuditReport audit;
  std::vector<ParamPathEnsemble> snapshots;
};

DiscreteFlowResult flow_discrete(const ParamGrid& grid, const ActivationFamily& fam,
                                 const MeasuringFunction& g, const Dataset& data,
                                 const FlowConfig& cfg);

ContinuumFlowResult flow_continuum(const ParamPathEnsemble& ens, const ActivationFamily& fam,
                                   const MeasuringFunction& g, const Dataset& data,
                                   const DepthGrid& grid, const FlowConfig& cfg);

/// Update direction of the finite-network flow at (Theta, s); also returns E.
ParamGrid discrete_direction(const ParamGrid& grid, const ActivationFamily& fam,
                             const MeasuringFunction& g, const Dataset& data, double s,
                             double* loss_out = nullptr);

}  // namespace resnet_lab
