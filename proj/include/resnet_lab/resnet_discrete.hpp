#pragma once

// Finite-depth, finite-width residual network
//   Z(l+1) = Z(l) + 1/(M L) sum_m f(Z(l), theta_{l,m}),   Z(0) = x,
// its quadratic cost and the backward adjoint iteration that yields the
// parameter gradient.
//
// Adjoint convention: p(l) = dE_x / dZ(l+1) for l = 0..L-1, so that
//   p(L-1) = (g(Z(L)) - y) grad g,
//   p(l)   = (I + 1/(ML) sum_m d_z f(Z(l+1), theta_{l+1,m}))^T p(l+1),
//   dE/dtheta_{l,m} = 1/(ML) mean_x[ d_theta f(Z(l), theta_{l,m})^T p(l) ].

#include <cmath>
#include <vector>

#include "resnet_lab/activation.hpp"
#include "resnet_lab/dataset.hpp"
#include "resnet_lab/errors.hpp"
#include "resnet_lab/parallel.hpp"
#include "resnet_lab/types.hpp"

namespace resnet_lab {

/// L x M table of parameter vectors. Entry (l, m) is column l*M + m of
/// `values` (m is 0-based in code, 1-based in files).
template <typename Scalar>
struct ParamGridT {
  int L = 0;
  int M = 0;
  MatrixX<Scalar> values;  // k x (L*M)

  ParamGridT() = default;
  ParamGridT(int L_, int M_, int k) : L(L_), M(M_), values(MatrixX<Scalar>::Zero(k, L_ * M_)) {
    require(L_ >= 1 && M_ >= 1, "ParamGrid: L and M must be positive");
    require(k >= 1, "ParamGrid: k must be positive");
  }

  static ParamGridT zeros(int L, int M, int k) { return ParamGridT(L, M, k); }

  int k() const { return static_cast<int>(values.rows()); }
  auto theta(int l, int m) { return values.col(static_cast<Eigen::Index>(l) * M + m); }
  auto theta(int l, int m) const { return values.col(static_cast<Eigen::Index>(l) * M + m); }

  /// (1/(M L)) sum_{l,m} |theta_{l,m}|^2
  Scalar second_moment() const { return values.squaredNorm() / Scalar(L * M); }

  template <typename Other>
  ParamGridT<Other> cast() const {
    ParamGridT<Other> out;
    out.L = L;
    out.M = M;
    out.values = values.template cast<Other>();
    return out;
  }
};

using ParamGrid = ParamGridT<double>;

namespace detail {

template <typename Scalar>
void check_grid(const ParamGridT<Scalar>& grid, const ActivationFamily& fam) {
  fam.validate();
  require(grid.L >= 1 && grid.M >= 1, "ParamGrid: L and M must be positive");
  require(grid.values.cols() == static_cast<Eigen::Index>(grid.L) * grid.M,
          "ParamGrid: table size does not match L*M");
  require(grid.k() == fam.k(), "ParamGrid: parameter length does not match the family");
  require(grid.values.allFinite(), "ParamGrid: non-finite parameters");
}

template <typename Scalar>
void check_problem(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                   const MeasuringFunction& g, const Dataset& data) {
  check_grid(grid, fam);
  g.validate();
  data.validate();
  require(g.dim() == fam.d, "measuring function dimension does not match the family");
  require(data.dim() == fam.d, "dataset dimension does not match the family");
}

}  // namespace detail

/// States Z(0..L) as columns of a d x (L+1) matrix.
template <typename Scalar, typename XVec>
MatrixX<Scalar> forward(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                        const XVec& x) {
  detail::check_grid(grid, fam);
  require(x.size() == fam.d, "forward: input has wrong dimension");
  const int d = fam.d;
  MatrixX<Scalar> Z(d, grid.L + 1);
  Z.col(0) = x.template cast<Scalar>();
  const Scalar w = Scalar(1) / Scalar(grid.M * grid.L);
  for (int l = 0; l < grid.L; ++l) {
    auto next = Z.col(l + 1);
    next = Z.col(l);
    const auto z = Z.col(l);
    for (int m = 0; m < grid.M; ++m) kernel::add_f(fam, z, grid.theta(l, m), w, next);
    if (!next.allFinite()) throw NumericOverflow("forward: non-finite state at layer", l + 1);
  }
  return Z;
}

/// Adjoints p(0..L-1) as columns of a d x L matrix, given the forward states.
template <typename Scalar>
MatrixX<Scalar> adjoint_backward(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                                 const MeasuringFunction& g, const MatrixX<Scalar>& Z,
                                 double y) {
  detail::check_grid(grid, fam);
  require(Z.rows() == fam.d && Z.cols() == grid.L + 1, "adjoint_backward: trajectory shape");
  const int d = fam.d;
  const int L = grid.L;
  MatrixX<Scalar> P(d, L);
  const Scalar residual = eval_g<Scalar>(g, Z.col(L)) - Scalar(y);
  P.col(L - 1) = residual * g.w.template cast<Scalar>();
  const Scalar w = Scalar(1) / Scalar(grid.M * L);
  for (int l = L - 2; l >= 0; --l) {
    auto cur = P.col(l);
    const auto next = P.col(l + 1);
    cur = next;
    const auto z = Z.col(l + 1);
    for (int m = 0; m < grid.M; ++m) kernel::add_vjp_z(fam, z, grid.theta(l + 1, m), next, w, cur);
    if (!cur.allFinite()) throw NumericOverflow("adjoint_backward: non-finite adjoint at layer", l);
  }
  return P;
}

template <typename Scalar>
Scalar loss(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
            const MeasuringFunction& g, const Dataset& data) {
  detail::check_problem(grid, fam, g, data);
  const int n = data.size();
  std::vector<Scalar> terms(n);
  parallel_for(n, [&](std::size_t i) {
    const auto Z = forward(grid, fam, data.x(static_cast<int>(i)));
    const Scalar r = eval_g<Scalar>(g, Z.col(grid.L)) - Scalar(data.y(static_cast<int>(i)));
    terms[i] = Scalar(0.5) * r * r;
  });
  Scalar acc(0);
  for (const auto& t : terms) acc += t;
  return acc / Scalar(n);
}

template <typename Scalar>
Scalar loss_regularized(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                        const MeasuringFunction& g, const Dataset& data, double s) {
  require(s >= 0.0, "loss_regularized: pseudo-time s must be nonnegative");
  using std::exp;
  return loss(grid, fam, g, data) + exp(-Scalar(s)) * grid.second_moment();
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  ParamGridT<Scalar> grad;  // dE/dtheta_{l,m}, same shape as the parameters
};

/// One forward/adjoint sweep per sample; returns E and grad_Theta E.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                                  const MeasuringFunction& g, const Dataset& data) {
  detail::check_problem(grid, fam, g, data);
  const int n = data.size();
  const int L = grid.L, M = grid.M, k = grid.k();
  std::vector<Scalar> terms(n);
  std::vector<MatrixX<Scalar>> partial(n);
  parallel_for(n, [&](std::size_t i) {
    const int s = static_cast<int>(i);
    const auto Z = forward(grid, fam, data.x(s));
    const auto P = adjoint_backward(grid, fam, g, Z, data.y(s));
    const Scalar r = eval_g<Scalar>(g, Z.col(L)) - Scalar(data.y(s));
    terms[i] = Scalar(0.5) * r * r;
    MatrixX<Scalar> G = MatrixX<Scalar>::Zero(k, static_cast<Eigen::Index>(L) * M);
    for (int l = 0; l < L; ++l) {
      const auto z = Z.col(l);
      const auto p = P.col(l);
      for (int m = 0; m < M; ++m) {
        auto out = G.col(static_cast<Eigen::Index>(l) * M + m);
        kernel::add_vjp_theta(fam, z, grid.theta(l, m), p, Scalar(1), out);
      }
    }
    partial[i] = std::move(G);
  });
  LossAndGrad<Scalar> result{Scalar(0), ParamGridT<Scalar>(L, M, k)};
  for (int i = 0; i < n; ++i) {
    result.loss += terms[i];
    result.grad.values += partial[i];
  }
  result.loss /= Scalar(n);
  result.grad.values /= Scalar(n) * Scalar(M) * Scalar(L);
  return result;
}

template <typename Scalar>
ParamGridT<Scalar> grad(const ParamGridT<Scalar>& grid, const ActivationFamily& fam,
                        const MeasuringFunction& g, const Dataset& data) {
  return loss_and_grad(grid, fam, g, data).grad;
}

}  // namespace resnet_lab
