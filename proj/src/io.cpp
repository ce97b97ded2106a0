#include "resnet_lab/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "resnet_lab/csv.hpp"

namespace resnet_lab::io {

using nlohmann::json;

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

int dimension_from_k(FamilyKind kind, int k) {
  if (kind == FamilyKind::ConventionalForm) {
    if (k >= 3 && (k - 1) % 2 == 0) return (k - 1) / 2;
  } else {
    for (int d = 1; 2 * d * d + 2 * d <= k; ++d)
      if (2 * d * d + 2 * d == k) return d;
  }
  throw ParseError("parameter length k=" + std::to_string(k) + " does not match family " +
                       to_string(kind),
                   0);
}

void write_json(const std::filesystem::path& path, const json& doc) {
  csv::write_text(path, doc.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

std::uint64_t json_hash(const json& doc) { return csv::fnv1a(doc.dump()); }

std::string first_column(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) return {};
  return std::string(csv::split(lines[0]).front());
}

namespace {

// Shared reader for the `<index>,m,c0..` tables.
struct IndexedTable {
  std::vector<long> outer;
  std::vector<long> m;
  Matrix values;  // k x rows
};

std::string table_header(const char* index, int k) {
  std::ostringstream out;
  out << index << ",m";
  for (int c = 0; c < k; ++c) out << ",c" << c;
  return out.str();
}

IndexedTable read_table(const std::filesystem::path& path, const char* index, int k) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError("empty parameter file", 0);
  if (lines[0] != table_header(index, k))
    throw ParseError("header must be " + table_header(index, k), 0);
  const long rows = static_cast<long>(lines.size()) - 1;
  IndexedTable t;
  t.values.resize(k, rows);
  for (long r = 0; r < rows; ++r) {
    const auto f = csv::split(lines[r + 1]);
    if (static_cast<int>(f.size()) != k + 2)
      throw ParseError("expected " + std::to_string(k + 2) + " columns, found " + std::to_string(f.size()),
                       r + 1);
    t.outer.push_back(csv::parse_long(f[0], r + 1));
    t.m.push_back(csv::parse_long(f[1], r + 1));
    for (int c = 0; c < k; ++c) t.values(c, r) = csv::parse_double(f[c + 2], r + 1);
    if (!t.values.col(r).allFinite()) throw ParseError("non-finite parameter", r + 1);
  }
  return t;
}

void write_table(const std::filesystem::path& path, const char* index, const Matrix& values, int M) {
  const int k = static_cast<int>(values.rows());
  std::ostringstream out;
  out << table_header(index, k) << '\n';
  for (Eigen::Index col = 0; col < values.cols(); ++col) {
    out << col / M << ',' << col % M + 1;
    for (int c = 0; c < k; ++c) out << ',' << csv::format_double(values(c, col));
    out << '\n';
  }
  csv::write_text(path, out.str());
}

ActivationFamily family_from_sidecar(const json& side, int k) {
  ActivationFamily fam;
  try {
    fam.kind = family_kind_from_string(side.at("family").get<std::string>());
    fam.tau = side.at("tau").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("sidecar: ") + e.what(), 0);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("sidecar: ") + e.what(), 0);
  }
  fam.d = dimension_from_k(fam.kind, k);
  return fam;
}

int sidecar_int(const json& side, const char* key) {
  try {
    return side.at(key).get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("sidecar: ") + e.what(), 0);
  }
}

}  // namespace

void save_grid(const ParamGrid& grid, const ActivationFamily& fam, const std::filesystem::path& path) {
  detail::check_grid(grid, fam);
  write_table(path, "l", grid.values, grid.M);
  write_json(sidecar_path(path), json{{"L", grid.L}, {"M", grid.M}, {"k", grid.k()},
                                      {"family", to_string(fam.kind)}, {"tau", fam.tau}});
}

LoadedGrid load_grid(const std::filesystem::path& path) {
  const json side = read_json(sidecar_path(path));
  const int L = sidecar_int(side, "L"), M = sidecar_int(side, "M"), k = sidecar_int(side, "k");
  if (L < 1 || M < 1 || k < 1) throw ParseError("sidecar: L, M, k must be positive", 0);
  LoadedGrid out{ParamGrid(L, M, k), family_from_sidecar(side, k)};
  const auto t = read_table(path, "l", k);
  if (t.values.cols() != static_cast<Eigen::Index>(L) * M)
    throw ParseError("expected " + std::to_string(L * M) + " rows, found " + std::to_string(t.values.cols()), 0);
  for (Eigen::Index r = 0; r < t.values.cols(); ++r) {
    const long l = t.outer[r], m = t.m[r];
    if (l < 0 || l >= L || m < 1 || m > M) throw ParseError("index (l, m) out of range", r + 1);
    out.grid.theta(static_cast<int>(l), static_cast<int>(m - 1)) = t.values.col(r);
  }
  return out;
}

void save_ensemble(const ParamPathEnsemble& ens, const ActivationFamily& fam,
                   const std::filesystem::path& path) {
  detail::check_ensemble(ens, fam, ens.grid());
  write_table(path, "j", ens.values, ens.M);
  write_json(sidecar_path(path), json{{"N_t", ens.N_t}, {"M", ens.M}, {"k", ens.k()},
                                      {"family", to_string(fam.kind)}, {"tau", fam.tau}});
}

LoadedEnsemble load_ensemble(const std::filesystem::path& path) {
  const json side = read_json(sidecar_path(path));
  const int N = sidecar_int(side, "N_t"), M = sidecar_int(side, "M"), k = sidecar_int(side, "k");
  if (N < 1 || M < 1 || k < 1) throw ParseError("sidecar: N_t, M, k must be positive", 0);
  LoadedEnsemble out{ParamPathEnsemble(N, M, k), family_from_sidecar(side, k)};
  const auto t = read_table(path, "j", k);
  if (t.values.cols() != static_cast<Eigen::Index>(N + 1) * M)
    throw ParseError("expected " + std::to_string((N + 1) * M) + " rows, found " +
                         std::to_string(t.values.cols()),
                     0);
  for (Eigen::Index r = 0; r < t.values.cols(); ++r) {
    const long j = t.outer[r], m = t.m[r];
    if (j < 0 || j > N || m < 1 || m > M) throw ParseError("index (j, m) out of range", r + 1);
    out.ensemble.theta(static_cast<int>(j), static_cast<int>(m - 1)) = t.values.col(r);
  }
  return out;
}

void save_cloud(const EmpiricalMeasure& cloud, const std::filesystem::path& path) {
  std::ostringstream out;
  for (int c = 0; c < cloud.dim(); ++c) out << (c ? "," : "") << 'c' << c;
  out << '\n';
  for (int m = 0; m < cloud.size(); ++m) {
    for (int c = 0; c < cloud.dim(); ++c) out << (c ? "," : "") << csv::format_double(cloud.particles(c, m));
    out << '\n';
  }
  csv::write_text(path, out.str());
}

EmpiricalMeasure load_cloud(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError("empty particle file", 0);
  const auto header = csv::split(lines[0]);
  const int k = static_cast<int>(header.size());
  for (int c = 0; c < k; ++c)
    if (header[c] != "c" + std::to_string(c)) throw ParseError("header must be c0,...,c{k-1}", 0);
  const long rows = static_cast<long>(lines.size()) - 1;
  if (rows < 1) throw ParseError("particle file has no rows", 0);
  Matrix p(k, rows);
  for (long r = 0; r < rows; ++r) {
    const auto f = csv::split(lines[r + 1]);
    if (static_cast<int>(f.size()) != k)
      throw ParseError("expected " + std::to_string(k) + " columns, found " + std::to_string(f.size()), r + 1);
    for (int c = 0; c < k; ++c) p(c, r) = csv::parse_double(f[c], r + 1);
    if (!p.col(r).allFinite()) throw ParseError("non-finite coordinate", r + 1);
  }
  return EmpiricalMeasure(std::move(p));
}

}  // namespace resnet_lab::io
