#pragma once

#include <cstdint>
#include <vector>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/types.hpp"

namespace resnet_lab {

/// Equal-weight particle cloud; particle m is column m.
struct EmpiricalMeasure {
  Matrix particles;  // k x M

  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(Matrix p) : particles(std::move(p)) {
    require(particles.cols() >= 1, "EmpiricalMeasure: needs at least one particle");
    require(particles.allFinite(), "EmpiricalMeasure: non-finite coordinates");
  }

  int size() const { return static_cast<int>(particles.cols()); }
  int dim() const { return static_cast<int>(particles.rows()); }
};

/// Largest cloud accepted by w2_exact.
inline constexpr int kExactW2MaxParticles = 256;

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(M^3)). Returns col_of_row: row i is matched to column col_of_row[i].
std::vector<int> optimal_assignment(const Matrix& cost);

/// Squared-Euclidean cost matrix, C(i, j) = |a_i - b_j|^2.
Matrix squared_distance_matrix(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Exact W2 between equal-weight clouds of equal size, M <= 256.
double w2_exact(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// RMS over random unit directions of the 1-D W2 between projections.
/// Never exceeds w2_exact.
double w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_projections,
                 std::uint64_t seed);

/// sup over depth nodes of W2 between the node clouds.
double d1(const ParamPathEnsemble& a, const ParamPathEnsemble& b);

/// max over stored flow snapshots of d1; a diagnostic for finitely many snapshots.
double d2(const std::vector<ParamPathEnsemble>& a, const std::vector<ParamPathEnsemble>& b);

/// (1/M) sum_m |theta_m(t_j)|^2
double second_moment_at(const ParamPathEnsemble& ens, int node);

/// Trapezoid integral over [0, 1] of second_moment_at.
double second_moment_integrated(const ParamPathEnsemble& ens);

struct AdmissibilityReport {
  double sup_second_moment = 0.0;  // sup_t (1/M) sum_m |theta_m(t)|^2 over nodes
  double path_increment = 0.0;     // (1/M) sum_{l,m} int_{l/L}^{(l+1)/L} |theta_m(t) - theta_m(l/L)|^2 dt
  int L_used = 0;
  bool sub_node_resolution = false;  // L >= N_t: layer cells no wider than a grid interval
};

/// The increment integral is exact for the piecewise-linear paths stored in
/// the ensemble (Simpson on every sub-interval between grid nodes and layer
/// boundaries).
AdmissibilityReport admissibility_report(const ParamPathEnsemble& ens, int L);

}  // namespace resnet_lab
