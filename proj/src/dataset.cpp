#include "resnet_lab/dataset.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/csv.hpp"
#include "resnet_lab/init.hpp"

namespace resnet_lab {

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::DifferenceForm ? "difference" : "conventional";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "difference" || name == "DifferenceForm") return FamilyKind::DifferenceForm;
  if (name == "conventional" || name == "ConventionalForm") return FamilyKind::ConventionalForm;
  throw ContractViolation("unknown activation family '" + name + "'");
}

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::Constant: return "constant";
    case LabelKind::Trig: return "trig";
    case LabelKind::TeacherNet: return "teacher-net";
  }
  return "constant";
}

LabelKind label_kind_from_string(const std::string& name) {
  if (name == "constant") return LabelKind::Constant;
  if (name == "trig") return LabelKind::Trig;
  if (name == "teacher-net") return LabelKind::TeacherNet;
  throw ContractViolation("unknown label rule '" + name + "'");
}

void Dataset::validate() const {
  require(size() >= 1, "dataset: empty dataset");
  require(dim() >= 1, "dataset: zero-dimensional inputs");
  require(labels.size() == inputs.cols(), "dataset: label count does not match sample count");
  require(radius > 0.0, "dataset: radius must be positive");
  require(inputs.allFinite() && labels.allFinite(), "dataset: non-finite entries");
  const double slack = radius * (1.0 + 1e-12);
  for (int i = 0; i < size(); ++i)
    require(inputs.col(i).norm() <= slack, "dataset: sample outside the support radius");
}

Dataset generate(std::uint64_t seed, int n, int d, double radius, const LabelRule& rule) {
  require(n >= 1, "generate: n must be at least 1");
  require(d >= 1, "generate: d must be at least 1");
  require(radius > 0.0, "generate: radius must be positive");

  Dataset data;
  data.radius = radius;
  data.inputs.resize(d, n);
  data.labels.resize(n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    Vector dir(d);
    double nrm = 0.0;
    do {
      for (int c = 0; c < d; ++c) dir[c] = normal(rng);
      nrm = dir.norm();
    } while (nrm == 0.0);
    const double r = radius * std::pow(uniform(rng), 1.0 / d);
    Vector x = dir * (r / nrm);
    // Rounding can push |x| a hair past r; pull it back inside the ball.
    if (x.norm() > radius) x *= radius / x.norm();
    data.inputs.col(i) = x;
  }

  switch (rule.kind) {
    case LabelKind::Constant:
      data.labels.setConstant(rule.value);
      break;
    case LabelKind::Trig: {
      const double w = std::numbers::pi * rule.frequency;
      for (int i = 0; i < n; ++i) {
        double y = rule.value * std::sin(w * data.inputs(0, i));
        if (d > 1) y *= std::cos(w * data.inputs(d - 1, i));
        data.labels[i] = y;
      }
      break;
    }
    case LabelKind::TeacherNet: {
      require(rule.family.d == d, "generate: teacher family dimension does not match d");
      rule.g.validate();
      require(rule.g.dim() == d, "generate: measuring function dimension does not match d");
      const auto teacher = sample_t_constant(rule.family, rule.teacher_width,
                                             rule.teacher_depth_steps, rule.teacher_scale,
                                             rule.teacher_seed);
      const DepthGrid grid(rule.teacher_depth_steps);
      for (int i = 0; i < n; ++i) {
        const Matrix Z = forward_oie(teacher, rule.family, Vector(data.inputs.col(i)), grid);
        data.labels[i] = eval_g(rule.g, Vector(Z.col(grid.N_t)));
      }
      break;
    }
  }
  return data;
}

namespace {
std::string serialize(const Dataset& data) {
  std::ostringstream out;
  for (int c = 0; c < data.dim(); ++c) out << 'x' << c << ',';
  out << "y\n";
  for (int i = 0; i < data.size(); ++i) {
    for (int c = 0; c < data.dim(); ++c) out << csv::format_double(data.inputs(c, i)) << ',';
    out << csv::format_double(data.labels[i]) << '\n';
  }
  return out.str();
}
}  // namespace

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  csv::write_text(path, serialize(data));
}

Dataset load_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError("empty dataset", 0);
  const auto header = csv::split(lines[0]);
  const int cols = static_cast<int>(header.size());
  if (cols < 2 || header.back() != "y") throw ParseError("header must be x0,...,x{d-1},y", 0);
  const int d = cols - 1;
  for (int c = 0; c < d; ++c)
    if (header[c] != "x" + std::to_string(c)) throw ParseError("header must be x0,...,x{d-1},y", 0);
  const int n = static_cast<int>(lines.size()) - 1;
  if (n < 1) throw ParseError("empty dataset", 0);

  Dataset data;
  data.inputs.resize(d, n);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const long row = i + 1;
    const auto fields = csv::split(lines[i + 1]);
    if (static_cast<int>(fields.size()) != cols)
      throw ParseError("expected " + std::to_string(cols) + " columns, found " +
                           std::to_string(fields.size()),
                       row);
    for (int c = 0; c < d; ++c) data.inputs(c, i) = csv::parse_double(fields[c], row);
    data.labels[i] = csv::parse_double(fields[d], row);
    if (!data.inputs.col(i).allFinite() || !std::isfinite(data.labels[i]))
      throw ParseError("non-finite value", row);
  }
  double r = 0.0;
  for (int i = 0; i < n; ++i) r = std::max(r, data.inputs.col(i).norm());
  data.radius = r > 0.0 ? r : 1.0;
  return data;
}

std::uint64_t checksum(const Dataset& data) { return csv::fnv1a(serialize(data)); }

}  // namespace resnet_lab
