#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "resnet_lab/continuum.hpp"
#include "resnet_lab/measure.hpp"
#include "resnet_lab/resnet_discrete.hpp"

namespace resnet_lab::io {

/// Sidecar path: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Recovers d from (family, k); throws ParseError if k is not attainable.
int dimension_from_k(FamilyKind kind, int k);

struct LoadedGrid {
  ParamGrid grid;
  ActivationFamily family;
};

struct LoadedEnsemble {
  ParamPathEnsemble ensemble;
  ActivationFamily family;
};

/// CSV header `l,m,c0..c{k-1}` (m is 1-based) plus sidecar {L,M,k,family,tau}.
void save_grid(const ParamGrid& grid, const ActivationFamily& fam, const std::filesystem::path& path);
LoadedGrid load_grid(const std::filesystem::path& path);

/// CSV header `j,m,c0..c{k-1}` (m is 1-based) plus sidecar {N_t,M,k,family,tau}.
void save_ensemble(const ParamPathEnsemble& ens, const ActivationFamily& fam,
                   const std::filesystem::path& path);
LoadedEnsemble load_ensemble(const std::filesystem::path& path);

/// Plain particle cloud, header `c0..c{k-1}`, one particle per row.
void save_cloud(const EmpiricalMeasure& cloud, const std::filesystem::path& path);
EmpiricalMeasure load_cloud(const std::filesystem::path& path);

/// Header of the first line of a CSV file (empty if the file is empty).
std::string first_column(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// Stable hash of a JSON document (keys sorted by the library's object order).
std::uint64_t json_hash(const nlohmann::json& doc);

}  // namespace resnet_lab::io
