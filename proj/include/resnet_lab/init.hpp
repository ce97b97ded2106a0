#pragma once

#include <cstdint>
#include <random>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/resnet_discrete.hpp"

namespace resnet_lab {

/// Centered Gaussian draw with every coordinate truncated to [-3, 3] standard
/// deviations (rejection per coordinate), then scaled.
Vector truncated_gaussian(int k, double scale, std::mt19937_64& rng);

/// t-constant ensemble: theta_m(t) = theta_m for all nodes, theta_m i.i.d.
/// truncated Gaussian. Draw order is m = 0..M-1, so the first M' particles of
/// a larger draw with the same seed coincide with a smaller draw.
ParamPathEnsemble sample_t_constant(const ActivationFamily& fam, int M, int N_t, double scale,
                                    std::uint64_t seed);

/// Restricts a t-constant (or any) ensemble to L layers: theta_{l,m} = theta_m(l/L).
ParamGrid grid_from_ensemble(const ParamPathEnsemble& ens, int L);

/// Piecewise-constant lift of a grid onto N_t intervals: node j takes layer
/// floor(j * L / N_t), clamped to L-1.
ParamPathEnsemble ensemble_from_grid(const ParamGrid& grid, int N_t);

}  // namespace resnet_lab
