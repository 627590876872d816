#pragma once

// Flat binary layout for sparse voxel grids (see docs/FORMATS.md):
//   magic "VXGRID01" | float64 voxel_size | uint64 count | uint32 width |
//   uint8 curve kind | 3 zero bytes | int32 keys xyz ... | float64 features ...
// Keys and features are stored in serialized (curve) order. Import restores
// the grid in canonical key order with unit counts; point maps are not part
// of the format.

#include <cstring>
#include <string>

#include "voxrec/io_util.hpp"
#include "voxrec/voxel_grid.hpp"

namespace voxrec {

inline constexpr char kGridMagic[8] = {'V', 'X', 'G', 'R', 'I', 'D', '0', '1'};

inline void export_grid(const SparseVoxelGrid& grid, CurveKind kind, const std::string& path) {
  const std::vector<int> order = detail::curve_order(grid.keys, kind);
  std::ofstream os = open_output(path);
  os.write(kGridMagic, 8);
  write_pod(os, grid.voxel_size);
  write_pod(os, static_cast<uint64_t>(grid.size()));
  write_pod(os, static_cast<uint32_t>(grid.feature_width()));
  write_pod(os, static_cast<uint8_t>(kind));
  const char pad[3] = {0, 0, 0};
  os.write(pad, 3);
  for (int v : order) write_span<int32_t>(os, grid.keys[v]);
  std::vector<double> row(grid.feature_width());
  for (int v : order) {
    for (int c = 0; c < grid.feature_width(); ++c) row[c] = grid.features(v, c);
    write_span<double>(os, row);
  }
  if (!os) io_error("write failure", path);
}

inline SparseVoxelGrid import_grid(const std::string& path) {
  std::ifstream is = open_input(path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kGridMagic, 8) != 0) io_error("bad grid magic", path);

  SparseVoxelGrid grid;
  grid.voxel_size = read_pod<double>(is);
  const uint64_t count = read_pod<uint64_t>(is);
  const uint32_t width = read_pod<uint32_t>(is);
  const uint8_t kind = read_pod<uint8_t>(is);
  if (kind > 1) io_error("bad curve kind", path);
  char pad[3];
  is.read(pad, 3);

  std::vector<VoxelKey> keys(count);
  for (auto& k : keys) read_span<int32_t>(is, k);
  Eigen::MatrixXd feats(count, width);
  std::vector<double> row(width);
  for (uint64_t i = 0; i < count; ++i) {
    read_span<double>(is, row);
    for (uint32_t c = 0; c < width; ++c) feats(i, c) = row[c];
  }

  // canonical form: keys ascending, features following them
  std::vector<int> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  grid.keys.resize(count);
  grid.features.resize(count, width);
  for (uint64_t i = 0; i < count; ++i) {
    grid.keys[i] = keys[perm[i]];
    grid.features.row(i) = feats.row(perm[i]);
  }
  grid.counts.assign(count, 1);
  grid.key_index.reserve(count);
  for (uint64_t i = 0; i < count; ++i)
    grid.key_index.emplace(grid.keys[i], static_cast<int>(i));
  grid.order_kind = static_cast<CurveKind>(kind);
  grid.order = detail::curve_order(grid.keys, grid.order_kind);
  return grid;
}

}  // namespace voxrec
