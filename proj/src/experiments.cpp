#include "resnet_lab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "resnet_lab/csv.hpp"
#include "resnet_lab/init.hpp"
#include "resnet_lab/io.hpp"
#include "resnet_lab/parallel.hpp"

namespace resnet_lab {

void Problem::validate() const {
  family.validate();
  g.validate();
  data.validate();
  require(g.dim() == family.d, "problem: measuring function dimension does not match the family");
  require(data.dim() == family.d, "problem: dataset dimension does not match the family");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::DepthL: return "depth_L";
    case SweepAxis::WidthM: return "width_M";
    case SweepAxis::PseudoTimeS: return "pseudo_time_S";
  }
  return "depth_L";
}

namespace {

void apply_fit(SweepResult& result) {
  std::vector<double> x, y;
  for (const auto& p : result.points) {
    x.push_back(p.value);
    y.push_back(p.error);
  }
  bool positive = true;
  for (double v : y) positive = positive && v > 0.0;
  if (!positive) {
    result.flags.push_back("non-positive error point; slope fit skipped");
    result.fitted_slope = 0.0;
    result.r_squared = 0.0;
    return;
  }
  const SlopeFit fit = fit_loglog(x, y);
  result.fitted_slope = fit.slope;
  result.slope_ci_lo = fit.ci_lo;
  result.slope_ci_hi = fit.ci_hi;
  result.r_squared = fit.r_squared;
}

double final_E(const FlowTrace& trace) { return trace.rows.back().E; }

}  // namespace

// ---------------------------------------------------------------------------

SweepResult depth_sweep(const DepthSweepConfig& cfg) {
  cfg.problem.validate();
  cfg.flow.validate();
  require(cfg.L_values.size() >= 3, "depth_sweep: need at least 3 L values");
  require(cfg.M >= 1, "depth_sweep: M must be positive");
  for (int L : cfg.L_values) require(L >= 1, "depth_sweep: L values must be positive");
  const int max_L = *std::max_element(cfg.L_values.begin(), cfg.L_values.end());
  const int N_ref = cfg.reference_N_t > 0 ? cfg.reference_N_t : 8 * max_L;

  const auto& pb = cfg.problem;
  const ParamPathEnsemble init = sample_t_constant(pb.family, cfg.M, N_ref, cfg.init_scale, cfg.seed);

  const std::size_t jobs = cfg.L_values.size() + 1;
  std::vector<FlowTrace> traces(jobs);
  parallel_for(jobs, [&](std::size_t job) {
    if (job < cfg.L_values.size()) {
      const ParamGrid grid = grid_from_ensemble(init, cfg.L_values[job]);
      traces[job] = flow_discrete(grid, pb.family, pb.g, pb.data, cfg.flow).trace;
    } else {
      traces[job] = flow_continuum(init, pb.family, pb.g, pb.data, DepthGrid(N_ref), cfg.flow).trace;
    }
  });

  SweepResult result;
  result.axis = SweepAxis::DepthL;
  result.reference = final_E(traces.back());
  for (std::size_t i = 0; i < cfg.L_values.size(); ++i) {
    const double EL = final_E(traces[i]);
    result.points.push_back({static_cast<double>(cfg.L_values[i]), std::abs(EL - result.reference),
                             cfg.seed, EL});
  }
  if (N_ref < 8 * max_L) result.flags.push_back("reference N_t below 8*max(L)");
  result.traces = std::move(traces);
  apply_fit(result);
  return result;
}

SweepResult width_sweep(const WidthSweepConfig& cfg) {
  cfg.problem.validate();
  cfg.flow.validate();
  require(cfg.n_seeds >= 5, "width_sweep: need at least 5 seeds per width");
  require(cfg.M_values.size() >= 3, "width_sweep: need at least 3 M values");
  for (int M : cfg.M_values) require(M >= 1, "width_sweep: M values must be positive");
  const int max_M = *std::max_element(cfg.M_values.begin(), cfg.M_values.end());
  const int M_ref = cfg.M_ref > 0 ? cfg.M_ref : max_M;
  const auto& pb = cfg.problem;
  const DepthGrid grid(cfg.N_t);

  const std::size_t per_M = static_cast<std::size_t>(cfg.n_seeds);
  const std::size_t runs = cfg.M_values.size() * per_M;
  std::vector<FlowTrace> traces(runs + 1);
  auto replicate_seed = [&](std::size_t r) {
    return cfg.shared_draw ? cfg.seed : cfg.seed + 1000003ULL * r;
  };
  parallel_for(runs + 1, [&](std::size_t job) {
    int M = M_ref;
    std::uint64_t seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    if (job < runs) {
      M = cfg.M_values[job / per_M];
      seed = replicate_seed(job % per_M);
    }
    const auto init = sample_t_constant(pb.family, M, cfg.N_t, cfg.init_scale, seed);
    traces[job] = flow_continuum(init, pb.family, pb.g, pb.data, grid, cfg.flow).trace;
  });

  SweepResult result;
  result.axis = SweepAxis::WidthM;
  result.reference = final_E(traces.back());
  for (std::size_t i = 0; i < cfg.M_values.size(); ++i) {
    std::vector<double> E;
    for (std::size_t r = 0; r < per_M; ++r) E.push_back(final_E(traces[i * per_M + r]));
    result.points.push_back({static_cast<double>(cfg.M_values[i]), stddev(E), cfg.seed,
                             std::abs(mean(E) - result.reference)});
  }
  if (M_ref <= max_M)
    result.flags.push_back("M_ref does not exceed max(M): the last bias point sits at the sampling noise floor");
  result.traces = std::move(traces);
  apply_fit(result);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<SupportSpread> support_spread(const ParamPathEnsemble& ens) {
  std::vector<SupportSpread> out;
  for (int j = 0; j <= ens.N_t; ++j) {
    std::vector<double> dist;
    const auto cloud = ens.cloud(j);
    for (int a = 0; a < ens.M; ++a)
      for (int b = a + 1; b < ens.M; ++b) dist.push_back((cloud.col(a) - cloud.col(b)).norm());
    SupportSpread s;
    if (!dist.empty()) {
      std::sort(dist.begin(), dist.end());
      s.min_pairwise = dist.front();
      s.median_pairwise = dist[dist.size() / 2];
    }
    out.push_back(s);
  }
  return out;
}

ZeroLossReport zero_loss_run(const ZeroLossConfig& cfg) {
  cfg.problem.validate();
  cfg.flow.validate();
  const auto& pb = cfg.problem;
  const ParamPathEnsemble init =
      cfg.initial.values.size() > 0
          ? cfg.initial
          : sample_t_constant(pb.family, cfg.M, cfg.N_t, cfg.init_scale, cfg.seed);
  ZeroLossReport rep;
  rep.flow = flow_continuum(init, pb.family, pb.g, pb.data, DepthGrid(init.N_t), cfg.flow);
  const auto& rows = rep.flow.trace.rows;
  rep.initial_E = rows.front().E;
  rep.final_E = rows.back().E;
  rep.below_threshold = rep.final_E < cfg.threshold;
  rep.monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long step = std::lround(rows[i - 1].s / cfg.flow.h_s);
    if (step < cfg.monotone_after) continue;
    if (rows[i].E > rows[i - 1].E + cfg.monotone_slack) {
      rep.monotone = false;
      rep.first_increase_step = std::lround(rows[i].s / cfg.flow.h_s);
      break;
    }
  }
  rep.spread = support_spread(rep.flow.final);
  return rep;
}

// ---------------------------------------------------------------------------

StabilityReport stability_probe(const StabilityConfig& cfg) {
  cfg.problem.validate();
  const auto& pb = cfg.problem;
  const ParamPathEnsemble base =
      cfg.base.values.size() > 0
          ? cfg.base
          : sample_t_constant(pb.family, cfg.M, cfg.N_t, cfg.init_scale, cfg.seed);
  const DepthGrid grid(base.N_t);

  ParamPathEnsemble dir;
  if (cfg.direction.values.size() > 0) {
    dir = cfg.direction;
    require(dir.N_t == base.N_t && dir.M == base.M && dir.k() == base.k(),
            "stability_probe: direction shape does not match the base ensemble");
  } else {
    // One unit offset per particle, shared by every depth node.
    dir = ParamPathEnsemble(base.N_t, base.M, base.k());
    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
    for (int m = 0; m < base.M; ++m) {
      Vector u = truncated_gaussian(base.k(), 1.0, rng);
      u /= u.norm();
      for (int j = 0; j <= base.N_t; ++j) dir.theta(j, m) = u;
    }
  }

  const auto ref = trajectories(base, pb.family, pb.g, pb.data, grid);
  StabilityReport rep;
  for (double delta : cfg.deltas) {
    if (!(delta > 0.0)) continue;  // ratios undefined at delta = 0
    ParamPathEnsemble moved = base;
    moved.values += delta * dir.values;
    const auto pert = trajectories(moved, pb.family, pb.g, pb.data, grid);
    StabilityRow row;
    row.delta = delta;
    row.particle_distance = base.M <= kExactW2MaxParticles ? d1(base, moved) : 0.0;
    for (int i = 0; i < pb.data.size(); ++i) {
      row.state_ratio = std::max(row.state_ratio, (pert.Z[i].col(grid.N_t) - ref.Z[i].col(grid.N_t)).norm() / delta);
      for (int j = 0; j <= grid.N_t; ++j)
        row.adjoint_ratio = std::max(row.adjoint_ratio, (pert.P[i].col(j) - ref.P[i].col(j)).norm() / delta);
    }
    rep.rows.push_back(row);
  }
  std::sort(rep.rows.begin(), rep.rows.end(),
            [](const StabilityRow& a, const StabilityRow& b) { return a.delta < b.delta; });

  bool ok = rep.rows.size() >= 2;
  for (const auto& r : rep.rows) ok = ok && std::isfinite(r.state_ratio) && std::isfinite(r.adjoint_ratio);
  if (ok) {
    // Ratios must settle, not grow, as delta shrinks.
    auto close = [&](double small, double larger) {
      const double scale = std::max({std::abs(small), std::abs(larger), 1e-12});
      return std::abs(small - larger) <= cfg.linear_tolerance * scale;
    };
    ok = close(rep.rows[0].state_ratio, rep.rows[1].state_ratio) &&
         close(rep.rows[0].adjoint_ratio, rep.rows[1].adjoint_ratio);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      ok = ok && rep.rows[i - 1].state_ratio <= rep.rows[i].state_ratio * (1.0 + cfg.linear_tolerance) + 1e-12;
    }
  }
  rep.pass = ok;
  return rep;
}

// ---------------------------------------------------------------------------

double gradcheck_rel_err(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double discrete_gradcheck(const ParamGrid& grid, const Problem& pb, double h) {
  const ParamGrid analytic = grad(grid, pb.family, pb.g, pb.data);
  ParamGrid probe = grid;
  Matrix numeric(grid.values.rows(), grid.values.cols());
  for (Eigen::Index i = 0; i < grid.values.size(); ++i) {
    const double orig = grid.values.data()[i];
    probe.values.data()[i] = orig + h;
    const double up = loss(probe, pb.family, pb.g, pb.data);
    probe.values.data()[i] = orig - h;
    const double down = loss(probe, pb.family, pb.g, pb.data);
    probe.values.data()[i] = orig;
    numeric.data()[i] = (up - down) / (2.0 * h);
  }
  const double floor = std::max(1e-3 * numeric.cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, gradcheck_rel_err(analytic.values.data()[i], numeric.data()[i], floor));
  return worst;
}

double continuum_gradcheck(const ParamPathEnsemble& ens, const Problem& pb, double s, double eps,
                           int directions, std::uint64_t seed) {
  const DepthGrid grid(ens.N_t);
  // Loss part of the functional gradient; the regularizer term is paired with
  // the perturbation below exactly as E_s discretizes it (trapezoid).
  const ParamPathEnsemble G =
      functional_grad(ens, pb.family, pb.g, pb.data, std::numeric_limits<double>::infinity(), grid);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_m(0, ens.M - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int N = ens.N_t;
  double worst = 0.0;
  for (int r = 0; r < directions; ++r) {
    const int m = pick_m(rng);
    Vector v = truncated_gaussian(ens.k(), 1.0, rng);
    v /= v.norm();
    // Hat with kinks on grid nodes: centre c, half-width w (in nodes). The
    // centre keeps at least 6 nodes on each side so both linear pieces of the
    // hat get the fourth-order rule.
    const int w = std::max(6, static_cast<int>(std::lround((0.1 + 0.3 * unit(rng)) * N)));
    const int c = std::uniform_int_distribution<int>(5, N - 5)(rng);
    std::vector<double> hat(N + 1, 0.0);
    for (int j = 0; j <= N; ++j) hat[j] = std::max(0.0, 1.0 - std::abs(j - c) / static_cast<double>(w));

    ParamPathEnsemble plus = ens, minus = ens;
    for (int j = 0; j <= N; ++j) {
      plus.theta(j, m) += eps * hat[j] * v;
      minus.theta(j, m) -= eps * hat[j] * v;
    }
    const double numeric = (loss_regularized_continuum(plus, pb.family, pb.g, pb.data, grid, s) -
                            loss_regularized_continuum(minus, pb.family, pb.g, pb.data, grid, s)) /
                           (2.0 * eps);
    // (1/M) int_0^1 G_m(t) . nu(t) dt: the loss part integrated separately on
    // the two linear pieces of the hat, plus 2 e^-s trapz(theta_m . nu).
    const double h = 1.0 / N;
    const int lo = std::max(0, c - w), hi = std::min(N, c + w);
    double analytic = 0.0;
    if (std::isfinite(s)) {
      double reg = 0.0;
      for (int j = 0; j <= N; ++j) reg += (j == 0 || j == N ? 0.5 : 1.0) * hat[j] * ens.theta(j, m).dot(v);
      analytic += 2.0 * std::exp(-s) * h * reg;
    }
    for (auto [a, b] : {std::pair{lo, c}, std::pair{c, hi}}) {
      std::vector<double> f;
      for (int j = a; j <= b; ++j) f.push_back(hat[j] * G.theta(j, m).dot(v));
      analytic += integrate_samples(f, h);
    }
    analytic /= ens.M;
    worst = std::max(worst, gradcheck_rel_err(analytic, numeric, 1e-8));
  }
  return worst;
}

GradcheckReport gradcheck_suite(const GradcheckConfig& cfg) {
  GradcheckReport rep;
  std::mt19937_64 rng(cfg.seed);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto random_problem = [&](int d, int n, FamilyKind kind) {
    Problem pb;
    pb.family = {kind, d, 1.0};
    Vector w(d);
    for (int c = 0; c < d; ++c) w[c] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    if (w.norm() < 0.2) w[0] += 0.5;
    pb.g = MeasuringFunction(w, std::uniform_real_distribution<double>(-0.5, 0.5)(rng));
    LabelRule rule;
    rule.kind = LabelKind::Trig;
    rule.value = 1.0;
    pb.data = generate(rng(), n, d, 1.0, rule);
    return pb;
  };

  for (int c = 0; c < cfg.discrete_configs; ++c) {
    const int d = uniform_int(1, 3), L = uniform_int(1, 5), M = uniform_int(1, 4), n = uniform_int(1, 6);
    const FamilyKind kind = c % 4 == 3 ? FamilyKind::ConventionalForm : FamilyKind::DifferenceForm;
    const Problem pb = random_problem(d, n, kind);
    ParamGrid grid(L, M, pb.family.k());
    std::mt19937_64 init_rng(rng());
    for (Eigen::Index col = 0; col < grid.values.cols(); ++col)
      grid.values.col(col) = truncated_gaussian(grid.k(), 1.0, init_rng);
    rep.discrete_max_rel = std::max(rep.discrete_max_rel, discrete_gradcheck(grid, pb, cfg.discrete_h));
    rep.discrete_checked += grid.values.size();
  }

  for (int c = 0; c < cfg.continuum_configs; ++c) {
    const int d = uniform_int(1, 2), M = uniform_int(1, 4), n = uniform_int(1, 6);
    const FamilyKind kind = c % 5 == 4 ? FamilyKind::ConventionalForm : FamilyKind::DifferenceForm;
    const Problem pb = random_problem(d, n, kind);
    const int N = cfg.continuum_N_t;
    ParamPathEnsemble ens(N, M, pb.family.k());
    std::mt19937_64 init_rng(rng());
    for (int m = 0; m < M; ++m) {
      const Vector a = truncated_gaussian(ens.k(), 1.0, init_rng);
      const Vector b = truncated_gaussian(ens.k(), 0.5, init_rng);
      for (int j = 0; j <= N; ++j) {
        const double t = static_cast<double>(j) / N;
        ens.theta(j, m) = a + b * std::sin(2.0 * t + m);
      }
    }
    const double s = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    rep.continuum_max_rel = std::max(
        rep.continuum_max_rel,
        continuum_gradcheck(ens, pb, s, cfg.continuum_eps, cfg.directions_per_config, rng()));
    rep.continuum_checked += cfg.directions_per_config;
  }

  // Interpolating configurations: labels produced by the model itself.
  {
    Problem pb = random_problem(2, 4, FamilyKind::DifferenceForm);
    ParamGrid grid(3, 2, pb.family.k());
    std::mt19937_64 init_rng(rng());
    for (Eigen::Index col = 0; col < grid.values.cols(); ++col)
      grid.values.col(col) = truncated_gaussian(grid.k(), 1.0, init_rng);
    for (int i = 0; i < pb.data.size(); ++i)
      pb.data.labels[i] = eval_g<double>(pb.g, forward(grid, pb.family, pb.data.x(i)).col(grid.L));
    const bool discrete_zero = grad(grid, pb.family, pb.g, pb.data).values.isZero(0.0);

    const auto ens = sample_t_constant(pb.family, 3, 16, 1.0, rng());
    const DepthGrid dg(16);
    for (int i = 0; i < pb.data.size(); ++i)
      pb.data.labels[i] = eval_g<double>(pb.g, forward_oie(ens, pb.family, pb.data.x(i), dg).col(16));
    const bool continuum_zero =
        functional_grad(ens, pb.family, pb.g, pb.data, std::numeric_limits<double>::infinity(), dg)
            .values.isZero(0.0);
    rep.interpolating_zero = discrete_zero && continuum_zero;
  }

  rep.discrete_pass = rep.discrete_max_rel < cfg.discrete_tol;
  rep.continuum_pass = rep.continuum_max_rel < cfg.continuum_tol;
  return rep;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SweepResult& result) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : result.points)
    pts.push_back({{"value", p.value}, {"error", p.error}, {"seed", p.seed}, {"aux", p.aux}});
  return {{"axis", to_string(result.axis)},
          {"points", pts},
          {"fitted_slope", result.fitted_slope},
          {"slope_ci", {result.slope_ci_lo, result.slope_ci_hi}},
          {"r_squared", result.r_squared},
          {"reference", result.reference},
          {"flags", result.flags}};
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir,
                 const std::string& name, const nlohmann::json& manifest) {
  std::ostringstream table, plot;
  table << "value,error,seed,aux\n";
  plot << "# " << to_string(result.axis) << " sweep; columns: value error aux\n";
  plot << "# fitted slope " << csv::format_double(result.fitted_slope) << " R^2 "
       << csv::format_double(result.r_squared) << '\n';
  for (const auto& p : result.points) {
    table << csv::format_double(p.value) << ',' << csv::format_double(p.error) << ',' << p.seed << ','
          << csv::format_double(p.aux) << '\n';
    plot << csv::format_double(p.value) << ' ' << csv::format_double(p.error) << ' '
         << csv::format_double(p.aux) << '\n';
  }
  csv::write_text(out_dir / (name + ".csv"), table.str());
  csv::write_text(out_dir / (name + ".dat"), plot.str());
  nlohmann::json doc = manifest;
  doc["result"] = to_json(result);
  io::write_json(out_dir / (name + "_manifest.json"), doc);
}

}  // namespace resnet_lab
