#ifndef CUBATLAS_ORBITS_HPP_
#define CUBATLAS_ORBITS_HPP_

#include <algorithm>
#include <cstdint>
#include <vector>

#include "symgroup.hpp"
#include "voxel_grid.hpp"

namespace cubatlas {

// Partition of the n^3 voxels into orbits of a group. Labels are assigned
// in order of the smallest voxel index in each orbit.
struct OrbitPartition {
  int n = 0;
  std::vector<std::uint32_t> orbit_id;               // voxel -> label
  std::vector<std::vector<std::uint32_t>> members;   // label -> voxels, ascending

  std::size_t orbit_count() const { return members.size(); }
  std::size_t largest_orbit() const {
    std::size_t m = 0;
    for (const auto& o : members)
      m = std::max(m, o.size());
    return m;
  }
};

inline OrbitPartition orbits(int n, const SpaceGroup& g) {
  VoxelGrid shape(n);  // validates n
  std::vector<VoxelAction> acts;
  acts.reserve(g.ops.size());
  for (const SymOp& op : g.ops)
    acts.emplace_back(op, n);

  constexpr std::uint32_t unset = 0xffffffffu;
  OrbitPartition p;
  p.n = n;
  p.orbit_id.assign(shape.size(), unset);
  for (std::size_t v = 0; v != shape.size(); ++v) {
    if (p.orbit_id[v] != unset)
      continue;
    auto label = static_cast<std::uint32_t>(p.members.size());
    std::vector<std::uint32_t> orbit;
    Index3 c = shape.coords(v);
    for (const VoxelAction& a : acts) {
      Index3 m = a(c);
      std::size_t w = shape.index(m[0], m[1], m[2]);
      if (p.orbit_id[w] == unset) {
        p.orbit_id[w] = label;
        orbit.push_back(static_cast<std::uint32_t>(w));
      }
    }
    std::sort(orbit.begin(), orbit.end());
    p.members.push_back(std::move(orbit));
  }
  return p;
}

enum class SymmetrizeMode { Intersection, Union };

// Projects a grid onto the group-invariant grids: in intersection mode a
// voxel stays solid only if its whole orbit is solid, in union mode it is
// solid if any orbit member is.
inline VoxelGrid symmetrize(const VoxelGrid& grid, const OrbitPartition& part,
                            SymmetrizeMode mode) {
  if (part.n != grid.n())
    throw DomainError("symmetrize: orbit partition built for another resolution");
  VoxelGrid out(grid.n());
  for (const auto& orbit : part.members) {
    bool any = false, all = true;
    for (std::uint32_t v : orbit) {
      bool s = grid[v];
      any = any || s;
      all = all && s;
    }
    bool solid = mode == SymmetrizeMode::Union ? any : all;
    if (solid)
      for (std::uint32_t v : orbit)
        out.set(v, true);
  }
  return out;
}

inline VoxelGrid symmetrize(const VoxelGrid& grid, const SpaceGroup& g, SymmetrizeMode mode) {
  return symmetrize(grid, orbits(grid.n(), g), mode);
}

} // namespace cubatlas

#endif
