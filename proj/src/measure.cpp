#include "resnet_lab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "resnet_lab/parallel.hpp"

namespace resnet_lab {

std::vector<int> optimal_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  require(n >= 1 && cost.cols() == n, "optimal_assignment: cost matrix must be square and nonempty");
  require(cost.allFinite(), "optimal_assignment: non-finite cost");
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Shortest augmenting paths with row/column potentials; 1-based with a
  // virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = row_of_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n);
  for (int j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

Matrix squared_distance_matrix(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.dim() == b.dim(), "squared_distance_matrix: particle dimensions differ");
  Matrix cost(a.size(), b.size());
  parallel_for(static_cast<std::size_t>(a.size()), [&](std::size_t i) {
    for (int j = 0; j < b.size(); ++j)
      cost(static_cast<Eigen::Index>(i), j) =
          (a.particles.col(static_cast<Eigen::Index>(i)) - b.particles.col(j)).squaredNorm();
  });
  return cost;
}

double w2_exact(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.size() == b.size(), "w2_exact: clouds must have equal particle counts");
  require(a.size() <= kExactW2MaxParticles,
          "w2_exact: more than 256 particles; use w2_sliced for large clouds");
  const Matrix cost = squared_distance_matrix(a, b);
  const auto match = optimal_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < a.size(); ++i) total += cost(i, match[i]);
  return std::sqrt(total / a.size());
}

double w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_projections,
                 std::uint64_t seed) {
  require(n_projections >= 1, "w2_sliced: n_projections must be positive");
  require(a.size() == b.size(), "w2_sliced: clouds must have equal particle counts");
  require(a.dim() == b.dim(), "w2_sliced: particle dimensions differ");
  const int k = a.dim();
  const int M = a.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> pa(M), pb(M);
  double acc = 0.0;
  for (int r = 0; r < n_projections; ++r) {
    Vector dir(k);
    double nrm = 0.0;
    do {
      for (int c = 0; c < k; ++c) dir[c] = normal(rng);
      nrm = dir.norm();
    } while (nrm == 0.0);
    dir /= nrm;
    for (int m = 0; m < M; ++m) {
      pa[m] = dir.dot(a.particles.col(m));
      pb[m] = dir.dot(b.particles.col(m));
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double w = 0.0;
    for (int m = 0; m < M; ++m) w += (pa[m] - pb[m]) * (pa[m] - pb[m]);
    acc += w / M;
  }
  return std::sqrt(acc / n_projections);
}

double d1(const ParamPathEnsemble& a, const ParamPathEnsemble& b) {
  require(a.N_t == b.N_t, "d1: ensembles live on different depth grids");
  require(a.M == b.M && a.k() == b.k(), "d1: ensembles have different shapes");
  double best = 0.0;
  for (int j = 0; j <= a.N_t; ++j)
    best = std::max(best, w2_exact(EmpiricalMeasure(a.cloud(j)), EmpiricalMeasure(b.cloud(j))));
  return best;
}

double d2(const std::vector<ParamPathEnsemble>& a, const std::vector<ParamPathEnsemble>& b) {
  require(a.size() == b.size() && !a.empty(), "d2: snapshot lists must be nonempty and aligned");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, d1(a[i], b[i]));
  return best;
}

double second_moment_at(const ParamPathEnsemble& ens, int node) {
  require(node >= 0 && node <= ens.N_t, "second_moment_at: node out of range");
  return ens.cloud(node).squaredNorm() / ens.M;
}

double second_moment_integrated(const ParamPathEnsemble& ens) {
  return integrated_second_moment(ens);
}

AdmissibilityReport admissibility_report(const ParamPathEnsemble& ens, int L) {
  require(L >= 1, "admissibility_report: L must be positive");
  require(ens.N_t >= 1 && ens.M >= 1, "admissibility_report: empty ensemble");
  AdmissibilityReport rep;
  rep.L_used = L;
  rep.sub_node_resolution = L >= ens.N_t;
  for (int j = 0; j <= ens.N_t; ++j) rep.sup_second_moment = std::max(rep.sup_second_moment, second_moment_at(ens, j));

  const int N = ens.N_t;
  double total = 0.0;
  for (int m = 0; m < ens.M; ++m) {
    for (int l = 0; l < L; ++l) {
      const double t0 = static_cast<double>(l) / L;
      const double t1 = static_cast<double>(l + 1) / L;
      const Vector anchor = ens.at(t0, m);
      auto sq = [&](double t) { return (ens.at(t, m) - anchor).squaredNorm(); };
      // Break points: layer boundaries plus every grid node strictly inside.
      std::vector<double> cuts{t0};
      const int j_first = static_cast<int>(std::floor(t0 * N)) + 1;
      for (int j = j_first; j < N && static_cast<double>(j) / N < t1; ++j) {
        const double tj = static_cast<double>(j) / N;
        if (tj > t0) cuts.push_back(tj);
      }
      cuts.push_back(t1);
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double a = cuts[c], b = cuts[c + 1];
        total += (b - a) / 6.0 * (sq(a) + 4.0 * sq(0.5 * (a + b)) + sq(b));
      }
    }
  }
  rep.path_increment = total / ens.M;
  return rep;
}

}  // namespace resnet_lab
