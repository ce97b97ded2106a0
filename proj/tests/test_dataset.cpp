#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/dataset.hpp"
#include "resnet_lab/init.hpp"
#include "test_support.hpp"

using namespace resnet_lab;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "resnet_lab_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}
}  // namespace

TEST_CASE("measuring function") {
  Vector w(2);
  w << 1.0, 0.0;
  const MeasuringFunction g(w, 0.0);
  Vector z(2);
  z << 3.0, 5.0;
  CHECK(eval_g(g, z) == 3.0);
  CHECK(grad_g(g) == w);

  Vector w2(2);
  w2 << 0.6, 0.8;
  Vector ones = Vector::Ones(2);
  CHECK(eval_g(MeasuringFunction(w2, 0.5), ones) == doctest::Approx(1.9).epsilon(1e-15));

  CHECK_THROWS_AS(MeasuringFunction(Vector::Zero(2), 1.0), ContractViolation);
  CHECK_THROWS_AS(eval_g(g, Vector::Zero(3)), ContractViolation);
}

TEST_CASE("eval_g is affine") {
  std::mt19937_64 rng(1);
  const auto g = resnet_lab::testing::random_g(3, rng);
  for (int t = 0; t < 100; ++t) {
    const Vector z1 = resnet_lab::testing::random_vector(3, 5.0, rng);
    const Vector z2 = resnet_lab::testing::random_vector(3, 5.0, rng);
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    const Vector mix = a * z1 + (1 - a) * z2;
    CHECK(eval_g(g, mix) == doctest::Approx(a * eval_g(g, z1) + (1 - a) * eval_g(g, z2)).epsilon(1e-13));
  }
}

TEST_CASE("generate") {
  LabelRule zero;
  const Dataset a = generate(42, 50, 3, 2.0, zero);
  CHECK(a.size() == 50);
  CHECK(a.labels.isZero(0.0));
  CHECK(generate(42, 50, 3, 2.0, zero) == a);
  CHECK_FALSE(generate(43, 50, 3, 2.0, zero) == a);

  CHECK_THROWS_AS(generate(1, 0, 2, 1.0, zero), ContractViolation);
  CHECK_THROWS_AS(generate(1, 5, 2, 0.0, zero), ContractViolation);
  CHECK_THROWS_AS(generate(1, 5, 2, -1.0, zero), ContractViolation);

  const Dataset big = generate(9, 10000, 2, 1.5, zero);
  double worst = 0.0;
  for (int i = 0; i < big.size(); ++i) worst = std::max(worst, big.x(i).norm());
  CHECK(worst <= 1.5);
  CHECK(worst > 1.4);  // the ball is filled, not just its centre

  LabelRule trig;
  trig.kind = LabelKind::Trig;
  trig.value = 2.0;
  const Dataset t = generate(3, 20, 2, 1.0, trig);
  for (int i = 0; i < t.size(); ++i)
    CHECK(t.y(i) == doctest::Approx(2.0 * std::sin(M_PI * t.x(i)[0]) * std::cos(M_PI * t.x(i)[1])));
}

TEST_CASE("teacher labels are recomputable") {
  LabelRule rule;
  rule.kind = LabelKind::TeacherNet;
  rule.family = {FamilyKind::DifferenceForm, 2, 1.0};
  Vector w(2);
  w << 0.3, -0.7;
  rule.g = MeasuringFunction(w, 0.1);
  rule.teacher_width = 5;
  rule.teacher_depth_steps = 20;
  const Dataset data = generate(11, 12, 2, 1.0, rule);

  const auto teacher = sample_t_constant(rule.family, 5, 20, rule.teacher_scale, rule.teacher_seed);
  for (int i = 0; i < data.size(); ++i) {
    const Matrix Z = forward_oie(teacher, rule.family, data.x(i), DepthGrid(20));
    CHECK(data.y(i) == eval_g(rule.g, Vector(Z.col(20))));
  }
}

TEST_CASE("csv round trip and errors") {
  LabelRule trig;
  trig.kind = LabelKind::Trig;
  trig.value = 1.0 / 3.0;
  const Dataset data = generate(5, 40, 3, 1.0, trig);
  const auto path = scratch("round.csv");
  save_csv(data, path);
  CHECK(load_csv(path) == data);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,x2,y");

  const auto bad = scratch("bad.csv");
  write_file(bad, "x0,x1,y\n0.1,0.2,1\n0.3,0.4\n");
  try {
    load_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  const auto empty = scratch("empty.csv");
  write_file(empty, "");
  try {
    load_csv(empty);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()) == "empty dataset");
  }

  write_file(empty, "x0,y\n");
  CHECK_THROWS_WITH_AS(load_csv(empty), "empty dataset", ParseError);

  write_file(bad, "x0,y\n0.5,abc\n");
  CHECK_THROWS_AS(load_csv(bad), ParseError);
}

TEST_CASE("checksum tracks content") {
  LabelRule zero;
  const Dataset a = generate(1, 5, 2, 1.0, zero);
  Dataset b = a;
  CHECK(checksum(a) == checksum(b));
  b.labels[0] = 1e-300;
  CHECK(checksum(a) != checksum(b));
}
