#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "resnet_lab/measure.hpp"
#include "resnet_lab/stats.hpp"
#include "test_support.hpp"

using namespace resnet_lab;
using resnet_lab::testing::random_smooth_ensemble;
using resnet_lab::testing::random_vector;

namespace {

EmpiricalMeasure random_cloud(int k, int M, std::mt19937_64& rng) {
  Matrix p(k, M);
  for (int m = 0; m < M; ++m) p.col(m) = random_vector(k, 1.0, rng);
  return EmpiricalMeasure(p);
}

double brute_force_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  const int M = a.size();
  std::vector<int> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < M; ++i) c += (a.particles.col(i) - b.particles.col(perm[i])).squaredNorm();
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / M);
}

double sorted_w2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<double> x(a.particles.data(), a.particles.data() + a.size());
  std::vector<double> y(b.particles.data(), b.particles.data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc / x.size());
}

}  // namespace

TEST_CASE("w2 of identical and translated clouds") {
  std::mt19937_64 rng(1);
  const auto a = random_cloud(3, 7, rng);
  CHECK(w2_exact(a, a) == 0.0);
  CHECK(w2_sliced(a, a, 16, 5) == 0.0);
  const Vector v = random_vector(3, 2.0, rng);
  Matrix shifted = a.particles.colwise() + v;
  CHECK(w2_exact(a, EmpiricalMeasure(shifted)) == doctest::Approx(v.norm()).epsilon(1e-12));
}

TEST_CASE("w2 matches permutation brute force") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int M = 1 + trial % 6, k = 1 + trial % 3;
    const auto a = random_cloud(k, M, rng);
    const auto b = random_cloud(k, M, rng);
    CHECK(w2_exact(a, b) == doctest::Approx(brute_force_w2(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("assignment is a permutation") {
  std::mt19937_64 rng(3);
  const auto a = random_cloud(2, 40, rng);
  const auto b = random_cloud(2, 40, rng);
  auto cols = optimal_assignment(squared_distance_matrix(a, b));
  std::sort(cols.begin(), cols.end());
  for (int i = 0; i < 40; ++i) CHECK(cols[i] == i);
}

TEST_CASE("w2 metric axioms") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int M = 2 + trial % 12;
    const auto a = random_cloud(3, M, rng);
    const auto b = random_cloud(3, M, rng);
    const auto c = random_cloud(3, M, rng);
    const double ab = w2_exact(a, b), ba = w2_exact(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab > 0.0);
    CHECK(w2_exact(a, c) <= ab + w2_exact(b, c) + 1e-12);
  }
  // Same points in a different order are the same measure.
  const auto a = random_cloud(2, 5, rng);
  Matrix rev = a.particles.rowwise().reverse();
  CHECK(w2_exact(a, EmpiricalMeasure(rev)) < 1e-15);
}

TEST_CASE("w2 contract") {
  std::mt19937_64 rng(5);
  CHECK_THROWS_AS(w2_exact(random_cloud(2, 3, rng), random_cloud(2, 4, rng)), ContractViolation);
  CHECK_THROWS_AS(w2_exact(random_cloud(2, 3, rng), random_cloud(3, 3, rng)), ContractViolation);
  const auto big = random_cloud(1, kExactW2MaxParticles + 1, rng);
  CHECK_THROWS_AS(w2_exact(big, big), ContractViolation);
  CHECK(w2_sliced(big, big, 4, 1) == 0.0);
  CHECK_THROWS_AS(w2_sliced(big, big, 0, 1), ContractViolation);
}

TEST_CASE("sliced w2") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cloud(1, 9, rng);
    const auto b = random_cloud(1, 9, rng);
    const double ref = sorted_w2_1d(a, b);
    CHECK(w2_sliced(a, b, 1 + trial, trial) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(w2_exact(a, b) == doctest::Approx(ref).epsilon(1e-12));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cloud(2, 4, rng);
    const auto b = random_cloud(2, 4, rng);
    const double sliced = w2_sliced(a, b, 64, trial);
    CHECK(sliced >= 0.0);
    CHECK(sliced <= w2_exact(a, b) + 1e-12);
    CHECK(sliced == w2_sliced(a, b, 64, trial));
  }
}

TEST_CASE("d1 over depth nodes") {
  std::mt19937_64 rng(7);
  const auto A = random_smooth_ensemble(8, 5, 3, 1.0, rng);
  CHECK(d1(A, A) == 0.0);
  const Vector v = random_vector(3, 1.0, rng);
  ParamPathEnsemble B = A;
  B.values.colwise() += v;
  CHECK(d1(A, B) == doctest::Approx(v.norm()).epsilon(1e-12));

  // Only node 4 changes: swap two particles there and move one of them.
  ParamPathEnsemble C = A;
  C.theta(4, 0).swap(C.theta(4, 1));
  C.theta(4, 0) += v;
  const double node4 = w2_exact(EmpiricalMeasure(A.cloud(4)), EmpiricalMeasure(C.cloud(4)));
  CHECK(node4 > 0.0);
  CHECK(d1(A, C) == doctest::Approx(node4).epsilon(1e-14));
  CHECK_THROWS_AS(d1(A, random_smooth_ensemble(9, 5, 3, 1.0, rng)), ContractViolation);

  CHECK(d2({A, A}, {A, C}) == doctest::Approx(node4).epsilon(1e-14));
  CHECK(d2({A, C}, {B, C}) == doctest::Approx(v.norm()).epsilon(1e-12));
}

TEST_CASE("second moments") {
  std::mt19937_64 rng(8);
  CHECK(second_moment_integrated(ParamPathEnsemble(6, 3, 4)) == 0.0);
  ParamPathEnsemble unit(6, 3, 4);
  for (int j = 0; j <= 6; ++j)
    for (int m = 0; m < 3; ++m) {
      Vector u = random_vector(4, 1.0, rng);
      unit.theta(j, m) = u / u.norm();
    }
  CHECK(second_moment_at(unit, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(second_moment_integrated(unit) == doctest::Approx(1.0).epsilon(1e-15));

  const auto ens = random_smooth_ensemble(10, 4, 3, 1.0, rng);
  double integral = 0.0;
  for (int j = 0; j <= 10; ++j) {
    double node = 0.0;
    for (int m = 0; m < 4; ++m)
      for (int c = 0; c < 3; ++c) node += ens.values(c, j * 4 + m) * ens.values(c, j * 4 + m);
    node /= 4;
    CHECK(second_moment_at(ens, j) == doctest::Approx(node).epsilon(1e-14));
    integral += (j == 0 || j == 10 ? 0.5 : 1.0) * node / 10;
  }
  CHECK(second_moment_integrated(ens) == doctest::Approx(integral).epsilon(1e-14));
}

TEST_CASE("admissibility of constant and linear paths") {
  std::mt19937_64 rng(9);
  ParamPathEnsemble flat(16, 3, 2);
  for (int m = 0; m < 3; ++m) {
    const Vector c = random_vector(2, 1.0, rng);
    for (int j = 0; j <= 16; ++j) flat.theta(j, m) = c;
  }
  for (int L : {1, 3, 8, 40}) CHECK(admissibility_report(flat, L).path_increment == 0.0);

  ParamPathEnsemble lin(12, 2, 3);
  Matrix v(3, 2);
  v.col(0) = random_vector(3, 1.0, rng);
  v.col(1) = random_vector(3, 1.0, rng);
  for (int j = 0; j <= 12; ++j)
    for (int m = 0; m < 2; ++m) lin.theta(j, m) = v.col(m) * (j / 12.0);
  const double v2 = v.squaredNorm() / 2;
  for (int L : {1, 2, 5, 7, 12, 30}) {
    const auto rep = admissibility_report(lin, L);
    CHECK(rep.path_increment == doctest::Approx(v2 / (3.0 * L * L)).epsilon(1e-6));
    CHECK(rep.L_used == L);
    CHECK(rep.sub_node_resolution == (L >= 12));
    CHECK(rep.sup_second_moment == doctest::Approx(v2).epsilon(1e-14));
  }
}

TEST_CASE("admissibility increment scales as 1/L^2 for smooth paths") {
  std::mt19937_64 rng(10);
  const auto ens = random_smooth_ensemble(1024, 4, 3, 1.0, rng);
  std::vector<double> L, inc;
  for (int l : {4, 8, 16, 32, 64}) {
    L.push_back(l);
    inc.push_back(admissibility_report(ens, l).path_increment);
  }
  const auto fit = fit_loglog(L, inc);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(0.1));
  CHECK(inc[0] / inc[1] == doctest::Approx(4.0).epsilon(0.1));
}
