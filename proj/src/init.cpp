#include "resnet_lab/init.hpp"

#include <algorithm>

namespace resnet_lab {

Vector truncated_gaussian(int k, double scale, std::mt19937_64& rng) {
  require(k >= 1, "truncated_gaussian: k must be positive");
  require(scale >= 0.0, "truncated_gaussian: scale must be nonnegative");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(k);
  for (int c = 0; c < k; ++c) {
    double u = normal(rng);
    while (std::abs(u) > 3.0) u = normal(rng);
    v[c] = scale * u;
  }
  return v;
}

ParamPathEnsemble sample_t_constant(const ActivationFamily& fam, int M, int N_t, double scale,
                                    std::uint64_t seed) {
  fam.validate();
  ParamPathEnsemble ens(N_t, M, fam.k());
  std::mt19937_64 rng(seed);
  for (int m = 0; m < M; ++m) {
    const Vector theta = truncated_gaussian(fam.k(), scale, rng);
    for (int j = 0; j <= N_t; ++j) ens.theta(j, m) = theta;
  }
  return ens;
}

ParamGrid grid_from_ensemble(const ParamPathEnsemble& ens, int L) {
  require(L >= 1, "grid_from_ensemble: L must be positive");
  ParamGrid grid(L, ens.M, ens.k());
  for (int l = 0; l < L; ++l) {
    const double t = static_cast<double>(l) / L;
    for (int m = 0; m < ens.M; ++m) grid.theta(l, m) = ens.at(t, m);
  }
  return grid;
}

ParamPathEnsemble ensemble_from_grid(const ParamGrid& grid, int N_t) {
  ParamPathEnsemble ens(N_t, grid.M, grid.k());
  for (int j = 0; j <= N_t; ++j) {
    const int l = std::min(grid.L - 1, static_cast<int>((static_cast<long>(j) * grid.L) / N_t));
    for (int m = 0; m < grid.M; ++m) ens.theta(j, m) = grid.theta(l, m);
  }
  return ens;
}

}  // namespace resnet_lab
