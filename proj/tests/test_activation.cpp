#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "resnet_lab/activation.hpp"
#include "test_support.hpp"

using namespace resnet_lab;
using resnet_lab::testing::random_vector;

namespace {

ActivationFamily diff(int d) { return {FamilyKind::DifferenceForm, d, 1.0}; }
ActivationFamily conv(int d) { return {FamilyKind::ConventionalForm, d, 1.0}; }

// Central differences of eval_f, column by column.
Matrix fd_jac_z(const ActivationFamily& fam, const Vector& z, const Vector& th, double h) {
  Matrix J(fam.d, fam.d);
  for (int j = 0; j < fam.d; ++j) {
    Vector zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (eval_f(fam, zp, th) - eval_f(fam, zm, th)) / (2 * h);
  }
  return J;
}

Matrix fd_jac_theta(const ActivationFamily& fam, const Vector& z, const Vector& th, double h) {
  Matrix J(fam.d, fam.k());
  for (int c = 0; c < fam.k(); ++c) {
    Vector tp = th, tm = th;
    tp[c] += h;
    tm[c] -= h;
    J.col(c) = (eval_f(fam, z, tp) - eval_f(fam, z, tm)) / (2 * h);
  }
  return J;
}

double max_rel(const Matrix& a, const Matrix& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, resnet_lab::testing::rel_err(a.data()[i], b.data()[i], floor));
  return worst;
}

}  // namespace

TEST_CASE("parameter length per family") {
  CHECK(diff(1).k() == 4);
  CHECK(diff(3).k() == 24);
  CHECK(conv(1).k() == 3);
  CHECK(conv(4).k() == 9);
}

TEST_CASE("smoothed relu") {
  CHECK(softplus(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Large arguments must not overflow.
  CHECK(softplus(800.0, 1.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0, 1.0) >= 0.0);
  CHECK(softplus_prime(0.0, 1.0) == 0.5);
  for (double u : {-50.0, -3.0, -0.1, 0.0, 0.7, 4.0, 60.0}) {
    const double s1 = softplus_prime(u, 0.5);
    CHECK(s1 >= 0.0);
    CHECK(s1 <= 1.0);
    CHECK(std::isfinite(softplus_second(u, 0.5)));
  }
  // Strictly inside (0, 1) wherever it is representable.
  CHECK(softplus_prime(-5.0, 1.0) > 0.0);
  CHECK(softplus_prime(5.0, 1.0) < 1.0);
  // sigma'' is the derivative of sigma'.
  const double h = 1e-6;
  for (double u : {-2.0, 0.3, 1.5}) {
    const double fd = (softplus_prime(u + h, 0.7) - softplus_prime(u - h, 0.7)) / (2 * h);
    CHECK(softplus_second(u, 0.7) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("eval_f examples") {
  CHECK(eval_f(diff(1), Vector::Constant(1, 3.7), Vector::Zero(4))[0] == 0.0);

  Vector th = Vector::Zero(3);
  th << 0.4, 0.0, -1.3;  // W, U = 0, b
  CHECK(eval_f(conv(1), Vector::Constant(1, 2.0), th)[0] == 0.0);

  Vector t1 = Vector::Zero(4);
  t1[0] = 1.0;
  // softplus(1) - softplus(0), 30-digit reference.
  CHECK(eval_f(diff(1), Vector::Constant(1, 1.0), t1)[0] ==
        doctest::Approx(0.62011450695827752).epsilon(1e-14));

  CHECK_THROWS_AS(eval_f(diff(2), Vector::Zero(3), Vector::Zero(12)), ContractViolation);
  CHECK_THROWS_AS(eval_f(diff(2), Vector::Zero(2), Vector::Zero(11)), ContractViolation);
}

TEST_CASE("jacobian examples") {
  CHECK(jac_z(diff(2), Vector::Ones(2), Vector::Zero(12)).isZero(0.0));

  Vector t1 = Vector::Zero(4);
  t1[0] = 1.0;
  CHECK(jac_z(diff(1), Vector::Zero(1), t1)(0, 0) == 0.5);

  // theta = 0, z = 0: the bias block of the first branch is sigma'(0) I.
  const int d = 3;
  const Matrix Jt = jac_theta(diff(d), Vector::Zero(d), Vector::Zero(diff(d).k()));
  const Matrix bias = Jt.middleCols(d * d, d);
  CHECK(bias.isApprox(0.5 * Matrix::Identity(d, d)));
  CHECK(Jt.middleCols(2 * d * d + d, d).isApprox(-0.5 * Matrix::Identity(d, d)));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector z = random_vector(d, 2.0, rng);
    const Vector th = random_vector(conv(d).k(), 2.0, rng);
    const double a = th.head(d).dot(z) + th[2 * d];
    const Matrix U = jac_theta(conv(d), z, th).middleCols(d, d);
    CHECK(U.isApprox(softplus(a, 1.0) * Matrix::Identity(d, d)));
  }
}

TEST_CASE("jacobians agree with central differences") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    for (const auto& fam : {diff(1 + probe % 3), conv(1 + probe % 3)}) {
      const Vector z = random_vector(fam.d, 2.0, rng);
      const Vector th = random_vector(fam.k(), 1.5, rng);
      const Matrix Jz = jac_z(fam, z, th);
      const Matrix Jt = jac_theta(fam, z, th);
      const double scale = std::max(Jz.cwiseAbs().maxCoeff(), Jt.cwiseAbs().maxCoeff());
      worst = std::max(worst, max_rel(Jz, fd_jac_z(fam, z, th, 1e-6), 1e-6 * (1 + scale)));
      worst = std::max(worst, max_rel(Jt, fd_jac_theta(fam, z, th, 1e-6), 1e-6 * (1 + scale)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("symmetric difference-form parameters cancel") {
  std::mt19937_64 rng(5);
  const int d = 2;
  const auto fam = diff(d);
  for (int trial = 0; trial < 20; ++trial) {
    Vector th(fam.k());
    const Vector half = random_vector(d * d + d, 2.0, rng);
    th << half, half;
    const Vector z = random_vector(d, 3.0, rng);
    CHECK(eval_f(fam, z, th).isZero(0.0));
    CHECK(jac_z(fam, z, th).isZero(0.0));
  }
}

TEST_CASE("growth bound for the difference form") {
  // |sigma(a) - sigma(b)| <= |a - b| gives |f| <= sqrt(2) |theta| (|z| + 1).
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mag(-3.0, 3.0);
  double first_half = 0.0, second_half = 0.0;
  for (int probe = 0; probe < 10000; ++probe) {
    const auto fam = diff(1 + probe % 3);
    const Vector z = random_vector(fam.d, std::pow(10.0, mag(rng)), rng);
    const Vector th = random_vector(fam.k(), std::pow(10.0, mag(rng)), rng);
    const double ratio = eval_f(fam, z, th).norm() / ((th.norm() + 1) * (z.norm() + 1));
    (probe < 5000 ? first_half : second_half) = std::max(probe < 5000 ? first_half : second_half, ratio);
  }
  CHECK(first_half <= std::sqrt(2.0));
  CHECK(second_half <= std::sqrt(2.0));
  CHECK(second_half <= 1.5 * first_half);
}
