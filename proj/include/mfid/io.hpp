#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfid/config.hpp"
#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/pdhg.hpp"

namespace mfid {

// Snapshot CSVs are nx1 rows x nx2 columns at 17 significant digits;
// fields.bin is a flat little-endian dump headed by eight u64 values
// (magic, version, nx1, nx2, nt, three reserved) followed by the five field
// arrays u, m1x1, m1x2, m2, phi in [n][j][l] order.

inline constexpr std::uint64_t kFieldsMagic = 0x4D46494442494E31ull;  // "MFIDBIN1"
inline constexpr std::uint64_t kFieldsVersion = 1;

inline void write_csv_matrix(const std::string& path, const SpatialField& f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (int j = 0; j < f.grid.nx1; ++j) {
    for (int l = 0; l < f.grid.nx2; ++l) {
      if (l) out << ',';
      out << fmt_g17(f(j, l));
    }
    out << '\n';
  }
}

inline SpatialField read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2 || rows[0].size() < 2)
    throw ConfigError("csv matrix too small: " + path);
  SpatialField f(SpaceGrid(int(rows.size()), int(rows[0].size())));
  for (int j = 0; j < f.grid.nx1; ++j) {
    if (rows[j].size() != std::size_t(f.grid.nx2))
      throw ConfigError("ragged csv matrix: " + path);
    for (int l = 0; l < f.grid.nx2; ++l) f(j, l) = rows[j][l];
  }
  return f;
}

struct SavedFields {
  Field u;
  FluxField m1;
  Field m2;
  Field phi;
};

inline void write_fields_bin(const std::string& path, const FluxField& m1, const Field& m2,
                             const Field& u, const Field& phi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  const Grid& g = u.grid;
  const std::uint64_t header[8] = {kFieldsMagic,       kFieldsVersion, std::uint64_t(g.nx1),
                                   std::uint64_t(g.nx2), std::uint64_t(g.nt), 0, 0, 0};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  auto dump = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  };
  dump(u.v);
  dump(m1.x1);
  dump(m1.x2);
  dump(m2.v);
  dump(phi.v);
  if (!out) throw ConfigError("write failed: " + path);
}

inline SavedFields read_fields_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::uint64_t header[8];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kFieldsMagic) throw ConfigError("bad magic in " + path);
  if (header[1] != kFieldsVersion) throw ConfigError("unsupported version in " + path);
  const Grid g{int(header[2]), int(header[3]), int(header[4])};
  SavedFields s{Field(g), FluxField(g), Field(g), Field(g)};
  auto load = [&](std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  };
  load(s.u.v);
  load(s.m1.x1);
  load(s.m1.x2);
  load(s.m2.v);
  load(s.phi.v);
  if (!in) throw ConfigError("truncated fields file: " + path);
  return s;
}

/// One row per logged iteration: iter,energy,continuity_residual,optimality_max.
inline void write_energy_log(const std::string& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "iter,energy,continuity_residual,optimality_max\n";
  for (const LogRow& r : rows)
    out << r.iter << ',' << fmt_g17(r.energy) << ',' << fmt_g17(r.continuity) << ','
        << fmt_g17(r.optimality_max) << '\n';
}

inline std::vector<LogRow> read_energy_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<LogRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LogRow r;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    r.iter = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.energy = std::stod(cell);
    std::getline(ss, cell, ',');
    r.continuity = std::stod(cell);
    std::getline(ss, cell, ',');
    r.optimality_max = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

inline std::string snapshot_filename(int n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u_t%04d.csv", n);
  return buf;
}

}  // namespace mfid
