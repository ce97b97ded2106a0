#pragma once

// Continuous-depth network driven by an empirical parameter measure:
//   dZ/dt = 1/M sum_m f(Z, theta_m(t)),  Z(0) = x,  t in [0, 1],
// with theta_m piecewise linear between the depth nodes t_j = j / N_t.
// The forward pass is classical RK4 on the node grid. The adjoint
//   dp/dt = -(1/M sum_m d_z f(Z, theta_m(t)))^T p,  p(1) = (g(Z(1)) - y) grad g,
// is integrated backward by RK4 on the same grid, with Z at interval
// midpoints recovered by cubic Hermite interpolation of the stored nodes.

#include <cmath>
#include <limits>
#include <vector>

#include "resnet_lab/activation.hpp"
#include "resnet_lab/dataset.hpp"
#include "resnet_lab/errors.hpp"
#include "resnet_lab/parallel.hpp"
#include "resnet_lab/types.hpp"

namespace resnet_lab {

struct DepthGrid {
  int N_t = 1;

  DepthGrid() = default;
  explicit DepthGrid(int n) : N_t(n) { require(n >= 1, "DepthGrid: N_t must be at least 1"); }

  double step() const { return 1.0 / N_t; }
  double node(int j) const { return static_cast<double>(j) / N_t; }
  int nodes() const { return N_t + 1; }
};

/// M parameter paths sampled at N_t + 1 depth nodes. Node j of particle m is
/// column j*M + m of `values` (m 0-based in code, 1-based in files).
template <typename Scalar>
struct ParamPathEnsembleT {
  int N_t = 0;
  int M = 0;
  MatrixX<Scalar> values;  // k x ((N_t+1)*M)

  ParamPathEnsembleT() = default;
  ParamPathEnsembleT(int N_t_, int M_, int k)
      : N_t(N_t_), M(M_), values(MatrixX<Scalar>::Zero(k, (N_t_ + 1) * M_)) {
    require(N_t_ >= 1 && M_ >= 1, "ParamPathEnsemble: N_t and M must be positive");
    require(k >= 1, "ParamPathEnsemble: k must be positive");
  }

  static ParamPathEnsembleT zeros(int N_t, int M, int k) { return ParamPathEnsembleT(N_t, M, k); }

  int k() const { return static_cast<int>(values.rows()); }
  int nodes() const { return N_t + 1; }
  DepthGrid grid() const { return DepthGrid(N_t); }

  auto theta(int j, int m) { return values.col(static_cast<Eigen::Index>(j) * M + m); }
  auto theta(int j, int m) const { return values.col(static_cast<Eigen::Index>(j) * M + m); }

  /// All particles at node j as a k x M block (the layer-t cloud).
  auto cloud(int j) const { return values.middleCols(static_cast<Eigen::Index>(j) * M, M); }

  /// Piecewise-linear interpolant theta_m(t), t in [0, 1].
  VectorX<Scalar> at(double t, int m) const {
    require(t >= 0.0 && t <= 1.0, "ParamPathEnsemble: t outside [0, 1]");
    const double u = t * N_t;
    int j = static_cast<int>(std::floor(u));
    if (j >= N_t) j = N_t - 1;
    const Scalar a = Scalar(u - j);
    return theta(j, m) + a * (theta(j + 1, m) - theta(j, m));
  }

  template <typename Other>
  ParamPathEnsembleT<Other> cast() const {
    ParamPathEnsembleT<Other> out;
    out.N_t = N_t;
    out.M = M;
    out.values = values.template cast<Other>();
    return out;
  }
};

using ParamPathEnsemble = ParamPathEnsembleT<double>;

/// Node-wise mean of |theta|^2, integrated over t by the trapezoid rule.
template <typename Scalar>
Scalar integrated_second_moment(const ParamPathEnsembleT<Scalar>& ens) {
  Scalar acc(0);
  for (int j = 0; j <= ens.N_t; ++j) {
    const Scalar w = (j == 0 || j == ens.N_t) ? Scalar(0.5) : Scalar(1);
    acc += w * ens.cloud(j).squaredNorm();
  }
  return acc / (Scalar(ens.N_t) * Scalar(ens.M));
}

/// Per-sample state and adjoint at every depth node (d x (N_t+1) each).
template <typename Scalar>
struct TrajectoryBundle {
  std::vector<MatrixX<Scalar>> Z;
  std::vector<MatrixX<Scalar>> P;
};

namespace detail {

template <typename Scalar>
void check_ensemble(const ParamPathEnsembleT<Scalar>& ens, const ActivationFamily& fam,
                    const DepthGrid& grid) {
  fam.validate();
  require(ens.N_t >= 1 && ens.M >= 1, "ParamPathEnsemble: N_t and M must be positive");
  require(ens.values.cols() == static_cast<Eigen::Index>(ens.N_t + 1) * ens.M,
          "ParamPathEnsemble: table size does not match (N_t+1)*M");
  require(ens.k() == fam.k(), "ParamPathEnsemble: parameter length does not match the family");
  require(ens.N_t == grid.N_t, "ParamPathEnsemble: depth grid does not match the ensemble");
  require(ens.values.allFinite(), "ParamPathEnsemble: non-finite parameters");
}

template <typename Scalar>
MatrixX<Scalar> midpoints(const ParamPathEnsembleT<Scalar>& ens) {
  const Eigen::Index M = ens.M;
  MatrixX<Scalar> mid(ens.k(), ens.N_t * M);
  for (int j = 0; j < ens.N_t; ++j)
    mid.middleCols(j * M, M) = Scalar(0.5) * (ens.cloud(j) + ens.cloud(j + 1));
  return mid;
}

/// out = 1/M sum_m f(z, params.col(m))
template <typename Scalar, typename ZVec, typename Cloud, typename Out>
void mean_field_rhs(const ActivationFamily& fam, const ZVec& z, const Cloud& params, Out& out) {
  out.setZero();
  const Scalar w = Scalar(1) / Scalar(params.cols());
  for (Eigen::Index m = 0; m < params.cols(); ++m) kernel::add_f(fam, z, params.col(m), w, out);
}

/// out = -(1/M sum_m d_z f(z, params.col(m)))^T p
template <typename Scalar, typename ZVec, typename Cloud, typename PVec, typename Out>
void adjoint_rhs(const ActivationFamily& fam, const ZVec& z, const Cloud& params, const PVec& p,
                 Out& out) {
  out.setZero();
  const Scalar w = -Scalar(1) / Scalar(params.cols());
  for (Eigen::Index m = 0; m < params.cols(); ++m) kernel::add_vjp_z(fam, z, params.col(m), p, w, out);
}

/// RK4 forward pass. Fills Z and F (the right-hand side at each node).
template <typename Scalar, typename XVec>
void forward_with_rhs(const ParamPathEnsembleT<Scalar>& ens, const MatrixX<Scalar>& mid,
                      const ActivationFamily& fam, const XVec& x, MatrixX<Scalar>& Z,
                      MatrixX<Scalar>& F) {
  const int d = fam.d;
  const int N = ens.N_t;
  const Eigen::Index M = ens.M;
  const Scalar h = Scalar(1) / Scalar(N);
  Z.resize(d, N + 1);
  F.resize(d, N + 1);
  Z.col(0) = x.template cast<Scalar>();
  VectorX<Scalar> k2(d), k3(d), k4(d), tmp(d);
  for (int j = 0; j < N; ++j) {
    auto k1 = F.col(j);
    const auto mid_cloud = mid.middleCols(j * M, M);
    mean_field_rhs<Scalar>(fam, Z.col(j), ens.cloud(j), k1);
    tmp = Z.col(j) + Scalar(0.5) * h * k1;
    mean_field_rhs<Scalar>(fam, tmp, mid_cloud, k2);
    tmp = Z.col(j) + Scalar(0.5) * h * k2;
    mean_field_rhs<Scalar>(fam, tmp, mid_cloud, k3);
    tmp = Z.col(j) + h * k3;
    mean_field_rhs<Scalar>(fam, tmp, ens.cloud(j + 1), k4);
    Z.col(j + 1) = Z.col(j) + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    if (!Z.col(j + 1).allFinite()) throw NumericOverflow("forward_oie: non-finite state at node", j + 1);
  }
  auto last = F.col(N);
  mean_field_rhs<Scalar>(fam, Z.col(N), ens.cloud(N), last);
}

template <typename Scalar>
MatrixX<Scalar> backward_adjoint(const ParamPathEnsembleT<Scalar>& ens, const MatrixX<Scalar>& mid,
                                 const ActivationFamily& fam, const MeasuringFunction& g,
                                 const MatrixX<Scalar>& Z, const MatrixX<Scalar>& F, double y) {
  const int d = fam.d;
  const int N = ens.N_t;
  const Eigen::Index M = ens.M;
  const Scalar h = Scalar(1) / Scalar(N);
  MatrixX<Scalar> P(d, N + 1);
  const Scalar residual = eval_g<Scalar>(g, Z.col(N)) - Scalar(y);
  P.col(N) = residual * g.w.template cast<Scalar>();
  VectorX<Scalar> k1(d), k2(d), k3(d), k4(d), tmp(d), zmid(d);
  for (int j = N - 1; j >= 0; --j) {
    const auto mid_cloud = mid.middleCols(j * M, M);
    zmid = Scalar(0.5) * (Z.col(j) + Z.col(j + 1)) + (h / Scalar(8)) * (F.col(j) - F.col(j + 1));
    const auto p = P.col(j + 1);
    adjoint_rhs<Scalar>(fam, Z.col(j + 1), ens.cloud(j + 1), p, k1);
    tmp = p - Scalar(0.5) * h * k1;
    adjoint_rhs<Scalar>(fam, zmid, mid_cloud, tmp, k2);
    tmp = p - Scalar(0.5) * h * k2;
    adjoint_rhs<Scalar>(fam, zmid, mid_cloud, tmp, k3);
    tmp = p - h * k3;
    adjoint_rhs<Scalar>(fam, Z.col(j), ens.cloud(j), tmp, k4);
    P.col(j) = p - (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    if (!P.col(j).allFinite()) throw NumericOverflow("adjoint_oie: non-finite adjoint at node", j);
  }
  return P;
}

template <typename Scalar>
void check_continuum_problem(const ParamPathEnsembleT<Scalar>& ens, const ActivationFamily& fam,
                             const MeasuringFunction& g, const Dataset& data,
                             const DepthGrid& grid) {
  check_ensemble(ens, fam, grid);
  g.validate();
  data.validate();
  require(g.dim() == fam.d, "measuring function dimension does not match the family");
  require(data.dim() == fam.d, "dataset dimension does not match the family");
}

}  // namespace detail

/// State path Z(t_j; x) as a d x (N_t+1) matrix.
template <typename Scalar, typename XVec>
MatrixX<Scalar> forward_oie(const ParamPathEnsembleT<Scalar>& ens, const ActivationFamily& fam,
                            const XVec& x, const DepthGrid& grid) {
  detail::check_ensemble(ens, fam, grid);
  require(x.size() == fam.d, "forward_oie: input has wrong dimension");
  const auto mid = detail::midpoints(ens);
  MatrixX<Scalar> Z, F;
  detail::forward_with_rhs(ens, mid, fam, x, Z, F);
  return Z;
}

/// Adjoint path p(t_j; x) as a d x (N_t+1) matrix, given the state path.
template <typename Scalar>
MatrixX<Scalar> adjoint_oie(const ParamPathEnsembleT<Scalar>& ens, const ActivationFamily& fam,
                            const MeasuringFunction& g, const MatrixX<Scalar>& Z, double y,
                            const DepthGrid& grid) {
  detail::check_ensemble(ens, fam, grid);
  g.validate();
  require(g.dim() == fam.d, "adjoint_oie: measuring function dimension mismatch");
  require(Z.rows() == fam.d && Z.cols() == grid.nodes(), "adjoint_oie: state path shape");
  const auto mid = detail::midpoints(ens);
  const Eigen::Index M = ens.M;
  MatrixX<Scalar> F(fam.d, grid.nodes());
  for (int j = 0; j <= grid.N_t; ++j) {
    auto col = F.col(j);
    detail::mean_field_rhs<Scalar>(fam, Z.col(j), ens.values.middleCols(j * M, M), col);
  }
  return detail::backward_adjoint(ens, mid, fam, g, Z, F, y);
}

template <typename Scalar>
TrajectoryBundle<Scalar> trajectories(const ParamPathEnsembleT<Scalar>& ens,
                                      const ActivationFamily& fam, const MeasuringFunction& g,
                                      const Dataset& data, const DepthGrid& grid) {
  detail::check_continuum_problem(ens, fam, g, data, grid);
  const auto mid = detail::midpoints(ens);
  const int n = data.size();
  TrajectoryBundle<Scalar> out;
  out.Z.resize(n);
  out.P.resize(n);
  parallel_for(n, [&](std::size_t i) {
    MatrixX<Scalar> F;
    detail::forward_with_rhs(ens, mid, fam, data.x(static_cast<int>(i)), out.Z[i], F);
    out.P[i] = detail::backward_adjoint(ens, mid, fam, g, out.Z[i], F, data.y(static_cast<int>(i)));
  });
  return out;
}

template <typename Scalar>
Scalar loss_continuum(const ParamPathEnsembleT<Scalar>& ens, const ActivationFamily& fam,
                      const MeasuringFunction& g, const Dataset& data, const DepthGrid& grid) {
  detail::check_continuum_problem(ens, fam, g, data, grid);
  const auto mid = detail::midpoints(ens);
  const int n = data.size();
  std::vector<Scalar> terms(n);
  parallel_for(n, [&](std::size_t i) {
    MatrixX<Scalar> Z, F;
    detail::forward_with_rhs(ens, mid, fam, data.x(static_cast<int>(i)), Z, F);
    const Scalar r = eval_g<Scalar>(g, Z.col(grid.N_t)) - Scalar(data.y(static_cast<int>(i)));
    terms[i] = Scalar(0.5) * r * r;
  });
  Scalar acc(0);
  for (const auto& t : terms) acc += t;
  return acc / Scalar(n);
}

template <typename Scalar>
Scalar loss_regularized_continuum(const ParamPathEnsembleT<Scalar>& ens,
                                  const ActivationFamily& fam, const MeasuringFunction& g,
                                  const Dataset& data, const DepthGrid& grid, double s) {
  require(s >= 0.0, "loss_regularized_continuum: pseudo-time s must be nonnegative");
  using std::exp;
  return loss_continuum(ens, fam, g, data, grid) + exp(-Scalar(s)) * integrated_second_moment(ens);
}

template <typename Scalar>
struct LossAndFunctionalGrad {
  Scalar loss;                         // E (unregularized)
  ParamPathEnsembleT<Scalar> grad;     // G_m(t_j), including the regularizer term
};

/// G_m(t_j) = mean_x[ d_theta f(Z(t_j;x), theta_m(t_j))^T p(t_j;x) ] + 2 e^{-s} theta_m(t_j).
/// This is M times the L2-in-t derivative of E_s with respect to path m.
/// Pass s = +infinity to drop the regularizer.
template <typename Scalar>
LossAndFunctionalGrad<Scalar> loss_and_functional_grad(const ParamPathEnsembleT<Scalar>& ens,
                                                       const ActivationFamily& fam,
                                                       const MeasuringFunction& g,
                                                       const Dataset& data, double s,
                                                       const DepthGrid& grid) {
  require(s >= 0.0, "functional_grad: pseudo-time s must be nonnegative");
  detail::check_continuum_problem(ens, fam, g, data, grid);
  const auto mid = detail::midpoints(ens);
  const int n = data.size();
  const int N = grid.N_t;
  const Eigen::Index M = ens.M;
  std::vector<Scalar> terms(n);
  std::vector<MatrixX<Scalar>> partial(n);
  parallel_for(n, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    MatrixX<Scalar> Z, F;
    detail::forward_with_rhs(ens, mid, fam, data.x(idx), Z, F);
    const MatrixX<Scalar> P = detail::backward_adjoint(ens, mid, fam, g, Z, F, data.y(idx));
    const Scalar r = eval_g<Scalar>(g, Z.col(N)) - Scalar(data.y(idx));
    terms[i] = Scalar(0.5) * r * r;
    MatrixX<Scalar> G = MatrixX<Scalar>::Zero(ens.k(), ens.values.cols());
    for (int j = 0; j <= N; ++j) {
      const auto z = Z.col(j);
      const auto p = P.col(j);
      for (Eigen::Index m = 0; m < M; ++m) {
        auto out = G.col(j * M + m);
        kernel::add_vjp_theta(fam, z, ens.values.col(j * M + m), p, Scalar(1), out);
      }
    }
    partial[i] = std::move(G);
  });
  LossAndFunctionalGrad<Scalar> result{Scalar(0), ParamPathEnsembleT<Scalar>(N, ens.M, ens.k())};
  for (int i = 0; i < n; ++i) {
    result.loss += terms[i];
    result.grad.values += partial[i];
  }
  result.loss /= Scalar(n);
  result.grad.values /= Scalar(n);
  using std::exp;
  const Scalar reg = Scalar(2) * exp(-Scalar(s));
  if (reg != Scalar(0)) result.grad.values += reg * ens.values;
  return result;
}

template <typename Scalar>
ParamPathEnsembleT<Scalar> functional_grad(const ParamPathEnsembleT<Scalar>& ens,
                                           const ActivationFamily& fam,
                                           const MeasuringFunction& g, const Dataset& data,
                                           double s, const DepthGrid& grid) {
  return loss_and_functional_grad(ens, fam, g, data, s, grid).grad;
}

}  // namespace resnet_lab
