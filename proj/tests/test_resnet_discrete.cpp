#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "resnet_lab/resnet_discrete.hpp"
#include "test_support.hpp"

using namespace resnet_lab;
using resnet_lab::testing::random_dataset;
using resnet_lab::testing::random_g;
using resnet_lab::testing::random_grid;
using resnet_lab::testing::random_vector;

namespace {

ActivationFamily diff(int d) { return {FamilyKind::DifferenceForm, d, 1.0}; }

Dataset one_sample(double x, double y) {
  Dataset data;
  data.inputs = Matrix::Constant(1, 1, x);
  data.labels = Vector::Constant(1, y);
  data.radius = std::max(1.0, std::abs(x));
  return data;
}

MeasuringFunction identity_g() { return MeasuringFunction(Vector::Ones(1), 0.0); }

// Loss of a single sample when the forward pass is restarted from Z(1) = z1,
// i.e. the network without its first layer. Used as a finite-difference
// oracle for p(0) = dE/dZ(1).
double loss_from_layer1(const ParamGrid& grid, const ActivationFamily& fam,
                        const MeasuringFunction& g, const Vector& z1, double y) {
  Vector z = z1;
  const double w = 1.0 / (grid.M * grid.L);
  for (int l = 1; l < grid.L; ++l) {
    Vector next = z;
    for (int m = 0; m < grid.M; ++m) next += w * eval_f(fam, z, grid.theta(l, m));
    z = next;
  }
  const double r = eval_g(g, z) - y;
  return 0.5 * r * r;
}

}  // namespace

TEST_CASE("forward examples") {
  const auto fam = diff(2);
  ParamGrid zero(3, 2, fam.k());
  Vector x(2);
  x << 0.3, -0.8;
  const Matrix Z = forward(zero, fam, x);
  for (int l = 0; l <= 3; ++l) CHECK(Z.col(l) == x);

  ParamGrid one(1, 1, 4);
  one.theta(0, 0) << 1.0, 0.0, 0.0, 0.0;
  CHECK(forward(one, diff(1), Vector::Ones(1))(0, 1) ==
        doctest::Approx(1.62011450695827752).epsilon(1e-14));

  CHECK_THROWS_AS(forward(zero, fam, Vector::Zero(3)), ContractViolation);
  CHECK_THROWS_AS(forward(zero, diff(1), Vector::Zero(1)), ContractViolation);
}

TEST_CASE("duplicating columns leaves the network unchanged") {
  std::mt19937_64 rng(2);
  const auto fam = diff(2);
  const ParamGrid grid = random_grid(4, 3, fam.k(), 1.0, rng);
  ParamGrid doubled(4, 6, fam.k());
  for (int l = 0; l < 4; ++l)
    for (int m = 0; m < 3; ++m) {
      doubled.theta(l, m) = grid.theta(l, m);
      doubled.theta(l, m + 3) = grid.theta(l, m);
    }
  const Vector x = random_vector(2, 1.0, rng);
  CHECK((forward(grid, fam, x) - forward(doubled, fam, x)).cwiseAbs().maxCoeff() < 1e-14);

  const auto g = random_g(2, rng);
  const auto data = random_dataset(5, 2, rng);
  const ParamGrid gd = grad(doubled, fam, g, data);
  for (int l = 0; l < 4; ++l)
    for (int m = 0; m < 3; ++m) CHECK(gd.theta(l, m) == gd.theta(l, m + 3));
}

TEST_CASE("overflow is reported with the layer index") {
  const auto fam = diff(1);
  ParamGrid grid(3, 1, fam.k());
  grid.theta(1, 0) << 1e308, 1e308, 0.0, 0.0;
  try {
    forward(grid, fam, Vector::Ones(1));
    FAIL("expected overflow");
  } catch (const NumericOverflow& e) {
    CHECK(e.index() == 2);
  }
}

TEST_CASE("loss examples") {
  const auto fam = diff(1);
  const ParamGrid zero(2, 2, fam.k());
  CHECK(loss(zero, fam, identity_g(), one_sample(1.0, 0.0)) == 0.5);

  Dataset two;
  two.inputs.resize(1, 2);
  two.inputs << 1.0, 2.0;
  two.labels = Vector::Zero(2);
  two.radius = 2.0;
  CHECK(loss(zero, fam, identity_g(), two) == 1.25);

  // Labels produced by the network itself interpolate exactly.
  std::mt19937_64 rng(4);
  const auto fam2 = diff(2);
  const ParamGrid teacher = random_grid(3, 2, fam2.k(), 1.0, rng);
  const auto g = random_g(2, rng);
  Dataset data = random_dataset(6, 2, rng);
  for (int i = 0; i < data.size(); ++i) data.labels[i] = eval_g<double>(g, forward(teacher, fam2, data.x(i)).col(3));
  CHECK(loss(teacher, fam2, g, data) == 0.0);
  CHECK(grad(teacher, fam2, g, data).values.isZero(0.0));
}

TEST_CASE("identity network reproduces the data-only baseline") {
  std::mt19937_64 rng(8);
  const auto fam = diff(3);
  const auto g = random_g(3, rng);
  const auto data = random_dataset(7, 3, rng);
  double baseline = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const double r = eval_g(g, Vector(data.x(i))) - data.y(i);
    baseline += 0.5 * r * r;
  }
  baseline /= data.size();
  CHECK(loss(ParamGrid(4, 3, fam.k()), fam, g, data) == doctest::Approx(baseline).epsilon(1e-15));
}

TEST_CASE("regularized loss") {
  const auto fam = diff(1);
  ParamGrid grid(1, 1, fam.k());
  CHECK(loss_regularized(grid, fam, identity_g(), one_sample(1.0, 0.0), 3.0) == 0.5);

  // Parameters that leave the map at zero (theta_1 = theta_3, theta_2 = theta_4) but |theta|^2 = 4.
  grid.theta(0, 0) << 1.0, 1.0, 1.0, 1.0;
  CHECK(loss(grid, fam, identity_g(), one_sample(1.0, 0.0)) == 0.5);
  CHECK(loss_regularized(grid, fam, identity_g(), one_sample(1.0, 0.0), 0.0) == 4.5);

  std::mt19937_64 rng(3);
  const ParamGrid r = random_grid(3, 2, fam.k(), 1.0, rng);
  const auto data = one_sample(0.5, 0.2);
  const double gap = loss_regularized(r, fam, identity_g(), data, 40.0) - loss(r, fam, identity_g(), data);
  CHECK(gap < 1e-16 * r.values.squaredNorm() / 6.0 + 1e-30);
  CHECK(gap >= 0.0);

  CHECK_THROWS_AS(loss_regularized(r, fam, identity_g(), data, -0.1), ContractViolation);
}

TEST_CASE("adjoint examples") {
  // Zero network: the adjoint is constant.
  std::mt19937_64 rng(5);
  const auto fam = diff(2);
  const auto g = random_g(2, rng);
  const Vector x = random_vector(2, 1.0, rng);
  const ParamGrid zero(4, 2, fam.k());
  const Matrix Z = forward(zero, fam, x);
  const Matrix P = adjoint_backward(zero, fam, g, Z, 0.3);
  const Vector expected = (g.w.dot(x) + g.c - 0.3) * g.w;
  for (int l = 0; l < 4; ++l) CHECK((P.col(l) - expected).norm() < 1e-15);

  // Exact fit: adjoint vanishes.
  const ParamGrid grid = random_grid(4, 2, fam.k(), 1.0, rng);
  const Matrix Zg = forward(grid, fam, x);
  CHECK(adjoint_backward(grid, fam, g, Zg, eval_g<double>(g, Zg.col(4))).isZero(0.0));
}

TEST_CASE("p(0) is the derivative of the loss with respect to Z(1)") {
  std::mt19937_64 rng(6);
  const auto fam = diff(2);
  const ParamGrid grid = random_grid(3, 2, fam.k(), 1.0, rng);
  const auto g = random_g(2, rng);
  const Vector x = random_vector(2, 1.0, rng);
  const double y = 0.4;
  const Matrix Z = forward(grid, fam, x);
  const Matrix P = adjoint_backward(grid, fam, g, Z, y);
  const Vector z1 = Z.col(1);
  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Vector up = z1, down = z1;
    up[c] += h;
    down[c] -= h;
    const double fd = (loss_from_layer1(grid, fam, g, up, y) - loss_from_layer1(grid, fam, g, down, y)) / (2 * h);
    CHECK(resnet_lab::testing::rel_err(P(c, 0), fd, 1e-8) < 1e-6);
  }
}

TEST_CASE("gradient matches central differences") {
  // Central differences evaluated in long double, so the oracle's rounding
  // error stays far below the tolerance.
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3, L = 1 + trial % 5, M = 1 + trial % 4, n = 1 + trial % 6;
    const ActivationFamily fam{trial % 2 ? FamilyKind::ConventionalForm : FamilyKind::DifferenceForm, d, 1.0};
    const ParamGrid grid = random_grid(L, M, fam.k(), 1.0, rng);
    const auto g = random_g(d, rng);
    const auto data = random_dataset(n, d, rng);
    const ParamGrid analytic = grad(grid, fam, g, data);

    auto probe = grid.cast<long double>();
    const long double h = 1e-5L;
    Matrix numeric(grid.values.rows(), grid.values.cols());
    for (Eigen::Index i = 0; i < probe.values.size(); ++i) {
      const long double orig = probe.values.data()[i];
      probe.values.data()[i] = orig + h;
      const long double up = loss(probe, fam, g, data);
      probe.values.data()[i] = orig - h;
      const long double down = loss(probe, fam, g, data);
      probe.values.data()[i] = orig;
      numeric.data()[i] = static_cast<double>((up - down) / (2 * h));
    }
    const double floor = 1e-3 * numeric.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < numeric.size(); ++i)
      worst = std::max(worst, resnet_lab::testing::rel_err(analytic.values.data()[i], numeric.data()[i], floor));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("permuting columns permutes the gradient") {
  std::mt19937_64 rng(9);
  const auto fam = diff(2);
  const ParamGrid grid = random_grid(3, 4, fam.k(), 1.0, rng);
  const auto g = random_g(2, rng);
  const auto data = random_dataset(4, 2, rng);
  std::vector<int> perm{2, 0, 3, 1};
  ParamGrid shuffled(3, 4, fam.k());
  for (int l = 0; l < 3; ++l)
    for (int m = 0; m < 4; ++m) shuffled.theta(l, m) = grid.theta(l, perm[m]);
  CHECK(loss(shuffled, fam, g, data) == doctest::Approx(loss(grid, fam, g, data)).epsilon(1e-14));
  const ParamGrid a = grad(grid, fam, g, data), b = grad(shuffled, fam, g, data);
  for (int l = 0; l < 3; ++l)
    for (int m = 0; m < 4; ++m) CHECK((b.theta(l, m) - a.theta(l, perm[m])).norm() < 1e-14);
}

TEST_CASE("output stays bounded and grows with the parameter budget") {
  std::mt19937_64 rng(10);
  const auto fam = diff(2);
  Vector x(2);
  x << 0.6, -0.6;
  double previous = 0.0;
  for (double B : {0.5, 2.0, 8.0, 32.0}) {
    // Sample grids on the sphere (1/(LM)) sum |theta|^2 = B and keep the largest |Z(L)|.
    double sup = 0.0;
    std::mt19937_64 local(11);
    for (int t = 0; t < 100; ++t) {
      ParamGrid grid = random_grid(4, 3, fam.k(), 1.0, local);
      grid.values *= std::sqrt(B / grid.second_moment());
      sup = std::max(sup, forward(grid, fam, x).col(4).norm());
    }
    CHECK(std::isfinite(sup));
    CHECK(sup >= previous);
    previous = sup;
  }
}
