#pragma once

// Residual map f(z, theta) and its Jacobians.
//
// Two parametric families are provided, both built on the smoothed ReLU
//   sigma(u) = tau * log(1 + exp(u / tau))
// which is C^2 with 0 < sigma' < 1 and bounded sigma''.
//
// DifferenceForm (k = 2d^2 + 2d):
//   f(z, theta) = sigma(A z + a) - sigma(B z + b)   (component-wise)
//   layout: A (d x d, row-major), a (d), B (d x d, row-major), b (d)
//
// ConventionalForm (k = 2d + 1):
//   f(z, theta) = u * sigma(w . z + c)
//   layout: w (d), u (d), c (1)
//
// The layout is part of the on-disk parameter format; do not reorder.

#include <cmath>
#include <string>

#include "resnet_lab/errors.hpp"
#include "resnet_lab/types.hpp"

namespace resnet_lab {

enum class FamilyKind { DifferenceForm, ConventionalForm };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

struct ActivationFamily {
  FamilyKind kind = FamilyKind::DifferenceForm;
  int d = 1;
  double tau = 1.0;

  int k() const {
    return kind == FamilyKind::DifferenceForm ? 2 * d * d + 2 * d : 2 * d + 1;
  }

  void validate() const {
    require(d >= 1, "activation: state dimension d must be positive");
    require(tau > 0.0 && std::isfinite(tau), "activation: tau must be positive and finite");
  }
};

// ---------------------------------------------------------------------------
// Scalar smoothed ReLU and its derivatives.

template <typename Scalar>
Scalar softplus(Scalar u, Scalar tau) {
  using std::abs;
  using std::exp;
  using std::log1p;
  const Scalar v = u / tau;
  const Scalar pos = v > Scalar(0) ? v : Scalar(0);
  return tau * (pos + log1p(exp(-abs(v))));
}

/// Logistic function evaluated without overflow for large |v|.
template <typename Scalar>
Scalar logistic(Scalar v) {
  using std::exp;
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-v));
  const Scalar e = exp(v);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar softplus_prime(Scalar u, Scalar tau) {
  return logistic(u / tau);
}

template <typename Scalar>
Scalar softplus_second(Scalar u, Scalar tau) {
  const Scalar s = logistic(u / tau);
  return s * (Scalar(1) - s) / tau;
}

// ---------------------------------------------------------------------------
// Unchecked kernels. Inputs are assumed to have the family's dimensions; the
// network passes validate once and then call these in their inner loops.
// All of them accumulate into `out` with a weight so that sums over particles
// need no temporaries.

namespace kernel {

/// out += weight * f(z, theta)
template <typename Scalar, typename ZVec, typename TVec, typename OutVec>
void add_f(const ActivationFamily& fam, const ZVec& z, const TVec& theta, Scalar weight,
           OutVec& out) {
  const int d = fam.d;
  const Scalar tau(fam.tau);
  if (fam.kind == FamilyKind::DifferenceForm) {
    const int o2 = d * d, o3 = d * d + d, o4 = 2 * d * d + d;
    for (int i = 0; i < d; ++i) {
      Scalar a = theta[o2 + i];
      Scalar b = theta[o4 + i];
      for (int j = 0; j < d; ++j) {
        a += theta[i * d + j] * z[j];
        b += theta[o3 + i * d + j] * z[j];
      }
      out[i] += weight * (softplus(a, tau) - softplus(b, tau));
    }
  } else {
    Scalar a = theta[2 * d];
    for (int j = 0; j < d; ++j) a += theta[j] * z[j];
    const Scalar s = weight * softplus(a, tau);
    for (int i = 0; i < d; ++i) out[i] += theta[d + i] * s;
  }
}

/// out += weight * (df/dz)^T p
template <typename Scalar, typename ZVec, typename TVec, typename PVec, typename OutVec>
void add_vjp_z(const ActivationFamily& fam, const ZVec& z, const TVec& theta, const PVec& p,
               Scalar weight, OutVec& out) {
  const int d = fam.d;
  const Scalar tau(fam.tau);
  if (fam.kind == FamilyKind::DifferenceForm) {
    const int o2 = d * d, o3 = d * d + d, o4 = 2 * d * d + d;
    for (int i = 0; i < d; ++i) {
      Scalar a = theta[o2 + i];
      Scalar b = theta[o4 + i];
      for (int j = 0; j < d; ++j) {
        a += theta[i * d + j] * z[j];
        b += theta[o3 + i * d + j] * z[j];
      }
      const Scalar ga = weight * p[i] * softplus_prime(a, tau);
      const Scalar gb = weight * p[i] * softplus_prime(b, tau);
      for (int j = 0; j < d; ++j) out[j] += ga * theta[i * d + j] - gb * theta[o3 + i * d + j];
    }
  } else {
    Scalar a = theta[2 * d];
    for (int j = 0; j < d; ++j) a += theta[j] * z[j];
    Scalar up = 0;
    for (int i = 0; i < d; ++i) up += theta[d + i] * p[i];
    const Scalar s = weight * up * softplus_prime(a, tau);
    for (int j = 0; j < d; ++j) out[j] += s * theta[j];
  }
}

/// out += weight * (df/dtheta)^T p, out has length k.
template <typename Scalar, typename ZVec, typename TVec, typename PVec, typename OutVec>
void add_vjp_theta(const ActivationFamily& fam, const ZVec& z, const TVec& theta, const PVec& p,
                   Scalar weight, OutVec& out) {
  const int d = fam.d;
  const Scalar tau(fam.tau);
  if (fam.kind == FamilyKind::DifferenceForm) {
    const int o2 = d * d, o3 = d * d + d, o4 = 2 * d * d + d;
    for (int i = 0; i < d; ++i) {
      Scalar a = theta[o2 + i];
      Scalar b = theta[o4 + i];
      for (int j = 0; j < d; ++j) {
        a += theta[i * d + j] * z[j];
        b += theta[o3 + i * d + j] * z[j];
      }
      const Scalar ga = weight * p[i] * softplus_prime(a, tau);
      const Scalar gb = weight * p[i] * softplus_prime(b, tau);
      for (int j = 0; j < d; ++j) {
        out[i * d + j] += ga * z[j];
        out[o3 + i * d + j] -= gb * z[j];
      }
      out[o2 + i] += ga;
      out[o4 + i] -= gb;
    }
  } else {
    Scalar a = theta[2 * d];
    for (int j = 0; j < d; ++j) a += theta[j] * z[j];
    Scalar up = 0;
    for (int i = 0; i < d; ++i) up += theta[d + i] * p[i];
    const Scalar sp = weight * up * softplus_prime(a, tau);
    const Scalar s = weight * softplus(a, tau);
    for (int j = 0; j < d; ++j) {
      out[j] += sp * z[j];
      out[d + j] += s * p[j];
    }
    out[2 * d] += sp;
  }
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Checked, allocating entry points.

namespace detail {
template <typename DZ, typename DT>
void check_point(const ActivationFamily& fam, const Eigen::MatrixBase<DZ>& z,
                 const Eigen::MatrixBase<DT>& theta) {
  fam.validate();
  require(z.size() == fam.d, "activation: state has wrong dimension");
  require(theta.size() == fam.k(), "activation: parameter vector has wrong length");
}
}  // namespace detail

/// f(z, theta); accepts any Eigen vector expressions of a common scalar type.
template <typename DZ, typename DT>
VectorX<typename DZ::Scalar> eval_f(const ActivationFamily& fam, const Eigen::MatrixBase<DZ>& z,
                                    const Eigen::MatrixBase<DT>& theta) {
  using Scalar = typename DZ::Scalar;
  detail::check_point(fam, z, theta);
  const VectorX<Scalar> zv = z;
  const VectorX<Scalar> tv = theta;
  VectorX<Scalar> out = VectorX<Scalar>::Zero(fam.d);
  kernel::add_f(fam, zv, tv, Scalar(1), out);
  return out;
}

/// df/dz, d x d.
template <typename DZ, typename DT>
MatrixX<typename DZ::Scalar> jac_z(const ActivationFamily& fam, const Eigen::MatrixBase<DZ>& z,
                                   const Eigen::MatrixBase<DT>& theta) {
  using Scalar = typename DZ::Scalar;
  detail::check_point(fam, z, theta);
  const VectorX<Scalar> zv = z;
  const VectorX<Scalar> tv = theta;
  const int d = fam.d;
  MatrixX<Scalar> J(d, d);
  VectorX<Scalar> e(d), row(d);
  for (int i = 0; i < d; ++i) {
    e.setZero();
    e[i] = Scalar(1);
    row.setZero();
    kernel::add_vjp_z(fam, zv, tv, e, Scalar(1), row);
    J.row(i) = row.transpose();
  }
  return J;
}

/// df/dtheta, d x k, columns in parameter-layout order.
template <typename DZ, typename DT>
MatrixX<typename DZ::Scalar> jac_theta(const ActivationFamily& fam, const Eigen::MatrixBase<DZ>& z,
                                       const Eigen::MatrixBase<DT>& theta) {
  using Scalar = typename DZ::Scalar;
  detail::check_point(fam, z, theta);
  const VectorX<Scalar> zv = z;
  const VectorX<Scalar> tv = theta;
  const int d = fam.d;
  MatrixX<Scalar> J(d, fam.k());
  VectorX<Scalar> e(d), row(fam.k());
  for (int i = 0; i < d; ++i) {
    e.setZero();
    e[i] = Scalar(1);
    row.setZero();
    kernel::add_vjp_theta(fam, zv, tv, e, Scalar(1), row);
    J.row(i) = row.transpose();
  }
  return J;
}

}  // namespace resnet_lab
