#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "resnet_lab/activation.hpp"
#include "resnet_lab/errors.hpp"
#include "resnet_lab/types.hpp"

namespace resnet_lab {

/// Affine read-out g(z) = w . z + c with |w| > 0.
struct MeasuringFunction {
  Vector w;
  double c = 0.0;

  MeasuringFunction() = default;
  MeasuringFunction(Vector w_, double c_) : w(std::move(w_)), c(c_) { validate(); }

  void validate() const {
    require(w.size() >= 1, "measuring function: empty weight vector");
    require(w.allFinite() && std::isfinite(c), "measuring function: non-finite coefficients");
    require(w.norm() > 0.0, "measuring function: |w| must be strictly positive");
  }

  int dim() const { return static_cast<int>(w.size()); }
};

template <typename Scalar, typename ZVec>
Scalar eval_g(const MeasuringFunction& g, const ZVec& z) {
  require(z.size() == g.w.size(), "eval_g: dimension mismatch");
  Scalar acc(g.c);
  for (Eigen::Index i = 0; i < g.w.size(); ++i) acc += Scalar(g.w[i]) * z[i];
  return acc;
}

inline double eval_g(const MeasuringFunction& g, const Vector& z) { return eval_g<double>(g, z); }

/// The gradient of an affine g is its weight vector everywhere.
inline const Vector& grad_g(const MeasuringFunction& g) { return g.w; }

/// Supervised samples. Inputs are stored column-wise: x(i) is inputs.col(i).
struct Dataset {
  Matrix inputs;   // d x n
  Vector labels;   // n
  double radius = 1.0;

  int dim() const { return static_cast<int>(inputs.rows()); }
  int size() const { return static_cast<int>(inputs.cols()); }
  auto x(int i) const { return inputs.col(i); }
  double y(int i) const { return labels[i]; }

  void validate() const;

  bool operator==(const Dataset& other) const {
    return inputs.rows() == other.inputs.rows() && inputs.cols() == other.inputs.cols() &&
           inputs == other.inputs && labels == other.labels;
  }
};

enum class LabelKind { Constant, Trig, TeacherNet };

std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& name);

/// Label rule for generated data.
///  - Constant: y = value.
///  - Trig:     y = sin(pi * frequency * x0) * cos(pi * frequency * x_{d-1}) * value
///              (for d = 1 the cosine factor is dropped).
///  - TeacherNet: y = g(Z_teacher(1; x)) for a t-constant teacher ensemble of
///              `teacher_width` particles drawn with `teacher_scale` from
///              `teacher_seed`, integrated on `teacher_depth_steps` intervals.
struct LabelRule {
  LabelKind kind = LabelKind::Constant;
  double value = 0.0;
  double frequency = 1.0;
  int teacher_width = 8;
  double teacher_scale = 1.0;
  std::uint64_t teacher_seed = 7;
  int teacher_depth_steps = 64;
  ActivationFamily family;
  MeasuringFunction g;
};

Dataset generate(std::uint64_t seed, int n, int d, double radius, const LabelRule& rule);

void save_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

/// FNV-1a over the CSV serialization; stable across platforms.
std::uint64_t checksum(const Dataset& data);

}  // namespace resnet_lab
