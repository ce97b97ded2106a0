#pragma once

// Desk-scale verification runs: depth and width sweeps, long zero-loss runs,
// stability probes and gradient checks.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/dataset.hpp"
#include "resnet_lab/flow.hpp"
#include "resnet_lab/measure.hpp"
#include "resnet_lab/resnet_discrete.hpp"
#include "resnet_lab/stats.hpp"

namespace resnet_lab {

/// Problem shared by every experiment: family, read-out and data.
struct Problem {
  ActivationFamily family;
  MeasuringFunction g;
  Dataset data;

  void validate() const;
};

enum class SweepAxis { DepthL, WidthM, PseudoTimeS };
std::string to_string(SweepAxis axis);

struct SweepPoint {
  double value = 0.0;   // L, M or S
  double error = 0.0;   // the quantity fitted against `value`
  std::uint64_t seed = 0;
  double aux = 0.0;     // depth: E_L; width: |mean E_M - E_ref|
};

struct SweepResult {
  SweepAxis axis = SweepAxis::DepthL;
  std::vector<SweepPoint> points;
  double fitted_slope = 0.0;
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
  double r_squared = 0.0;
  double reference = 0.0;  // E of the reference model
  std::vector<std::string> flags;
  std::vector<FlowTrace> traces;  // one per flow run, reference last
};

// ---------------------------------------------------------------------------

struct DepthSweepConfig {
  Problem problem;
  int M = 4;
  double init_scale = 1.0;
  std::uint64_t seed = 1;
  std::vector<int> L_values{8, 16, 32, 64, 128};
  FlowConfig flow;
  /// Depth intervals of the continuum reference; 0 means 8 * max(L).
  int reference_N_t = 0;
};

/// Runs the finite network at every L and the continuum model once, all from
/// the same t-constant draw (theta_{l,m}(0) = theta_m(0; l/L)), and fits
/// log |E_L(S) - E(S)| against log L.
SweepResult depth_sweep(const DepthSweepConfig& cfg);

struct WidthSweepConfig {
  Problem problem;
  int N_t = 8;
  double init_scale = 1.0;
  std::uint64_t seed = 1;
  std::vector<int> M_values{8, 32, 128, 512};
  int n_seeds = 20;
  /// Reference width for the bias column; 0 means max(M_values).
  int M_ref = 0;
  /// Every replicate reuses the first seed (degenerate check).
  bool shared_draw = false;
  FlowConfig flow;
};

/// Runs the continuum flow from i.i.d. draws for every (M, replicate) and fits
/// log std_seeds E_M(S) against log M.
SweepResult width_sweep(const WidthSweepConfig& cfg);

// ---------------------------------------------------------------------------

struct ZeroLossConfig {
  Problem problem;
  int M = 32;
  int N_t = 32;
  double init_scale = 1.0;
  std::uint64_t seed = 1;
  FlowConfig flow;
  double threshold = 1e-2;
  /// E must not increase between trace rows from this step on.
  long monotone_after = 100;
  double monotone_slack = 0.0;
  /// Start from this ensemble instead of a random draw, when non-empty.
  ParamPathEnsemble initial;
};

struct SupportSpread {
  double min_pairwise = 0.0;
  double median_pairwise = 0.0;
};

struct ZeroLossReport {
  ContinuumFlowResult flow;
  double initial_E = 0.0;
  double final_E = 0.0;
  bool below_threshold = false;
  bool monotone = false;
  long first_increase_step = -1;
  /// Heuristic stand-in for full support: per-node pairwise particle distances.
  std::vector<SupportSpread> spread;
  bool pass() const { return below_threshold && monotone; }
};

ZeroLossReport zero_loss_run(const ZeroLossConfig& cfg);

std::vector<SupportSpread> support_spread(const ParamPathEnsemble& ens);

// ---------------------------------------------------------------------------

struct StabilityConfig {
  Problem problem;
  int M = 8;
  int N_t = 32;
  double init_scale = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> deltas{1e-3, 1e-2, 1e-1};
  /// ratio(smallest delta) may differ from ratio(next) by at most this fraction.
  double linear_tolerance = 0.2;
  /// Use this ensemble as the base instead of a random draw, when non-empty.
  ParamPathEnsemble base;
  /// Use this perturbation direction (unit per particle) instead of a random one.
  ParamPathEnsemble direction;
};

struct StabilityRow {
  double delta = 0.0;
  double particle_distance = 0.0;  // d1 between base and perturbed
  double state_ratio = 0.0;        // max_x |dZ(1;x)| / delta
  double adjoint_ratio = 0.0;      // max_{x,t} |dp(t;x)| / delta
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  bool pass = false;
};

StabilityReport stability_probe(const StabilityConfig& cfg);

// ---------------------------------------------------------------------------

struct GradcheckConfig {
  std::uint64_t seed = 2024;
  int discrete_configs = 20;
  int continuum_configs = 10;
  int continuum_N_t = 128;
  int directions_per_config = 6;
  double discrete_h = 1e-5;
  double continuum_eps = 1e-5;
  double discrete_tol = 1e-5;
  double continuum_tol = 1e-4;
};

struct GradcheckReport {
  double discrete_max_rel = 0.0;
  double continuum_max_rel = 0.0;
  long discrete_checked = 0;
  long continuum_checked = 0;
  bool interpolating_zero = false;  // both gradients vanish on E = 0 configs
  bool discrete_pass = false;
  bool continuum_pass = false;
  bool pass() const { return discrete_pass && continuum_pass && interpolating_zero; }
};

/// Relative error used by the gradient checks:
///   |a - b| / max(|a|, |b|, floor)
double gradcheck_rel_err(double analytic, double numeric, double floor);

/// Coordinate-wise central differences of E over the whole parameter grid
/// against the adjoint gradient. Returns the max relative error; the floor of
/// the denominator is 1e-3 * max |numeric gradient|.
double discrete_gradcheck(const ParamGrid& grid, const Problem& problem, double h);

/// Directional central differences of E_s along hat-shaped perturbations of
/// single particle paths against the functional gradient. The loss part is
/// integrated with a fourth-order rule on each linear piece of the hat; the
/// regularizer part with the trapezoid rule E_s itself uses. Returns the max
/// relative error over `directions` probes.
double continuum_gradcheck(const ParamPathEnsemble& ens, const Problem& problem, double s,
                           double eps, int directions, std::uint64_t seed);

GradcheckReport gradcheck_suite(const GradcheckConfig& cfg);

// ---------------------------------------------------------------------------
// Artifacts

/// results CSV (`value,error,seed,aux`), gnuplot data file and manifest JSON.
void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir,
                 const std::string& name, const nlohmann::json& manifest);

nlohmann::json to_json(const SweepResult& result);

}  // namespace resnet_lab
