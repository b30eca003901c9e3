// Face-connected components of the solid phase on the 3-torus, with
// winding (percolation) detection.
//
// Each union-find node carries the lattice shift between its periodic
// image and the image of its parent. Closing a cycle whose accumulated
// shift is nonzero means the component wraps around the torus along the
// nonzero axes of that shift.

#ifndef CUBATLAS_CONNECTIVITY_HPP_
#define CUBATLAS_CONNECTIVITY_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "voxel_grid.hpp"

namespace cubatlas {

struct ConnectivityReport {
  int component_count = 0;
  double largest_component_fraction = 0.0;  // of solid voxels
  std::array<bool, 3> percolates = {false, false, false};

  bool percolates_all() const { return percolates[0] && percolates[1] && percolates[2]; }
  bool single_component() const { return component_count == 1; }
};

namespace impl {

class ShiftUnionFind {
public:
  explicit ShiftUnionFind(std::size_t size)
      : parent_(size), shift_(size, Index3{0, 0, 0}), rank_(size, 0), wind_(size, 0) {
    for (std::size_t i = 0; i != size; ++i)
      parent_[i] = static_cast<std::uint32_t>(i);
  }

  // Root of v and the shift L(v) - L(root), compressing the path.
  std::uint32_t find(std::uint32_t v, Index3& shift) {
    std::uint32_t root = v;
    Index3 acc{0, 0, 0};
    while (parent_[root] != root) {
      add(acc, shift_[root]);
      root = parent_[root];
    }
    shift = acc;
    // second pass: point every node on the path straight at the root
    Index3 rem = acc;
    while (parent_[v] != root && v != root) {
      std::uint32_t next = parent_[v];
      Index3 own = shift_[v];
      shift_[v] = rem;
      parent_[v] = root;
      sub(rem, own);
      v = next;
    }
    return root;
  }

  // Link v and w where the image of w adjacent to v sits at L(v) + step.
  void link(std::uint32_t v, std::uint32_t w, const Index3& step) {
    Index3 sv, sw;
    std::uint32_t rv = find(v, sv);
    std::uint32_t rw = find(w, sw);
    Index3 d = sv;  // L(rw) - L(rv) after aligning w's tree
    add(d, step);
    sub(d, sw);
    if (rv == rw) {
      for (int a = 0; a != 3; ++a)
        if (d[a] != 0)
          wind_[rv] |= static_cast<std::uint8_t>(1u << a);
      return;
    }
    if (rank_[rv] < rank_[rw]) {
      parent_[rv] = rw;
      shift_[rv] = {-d[0], -d[1], -d[2]};
      wind_[rw] |= wind_[rv];
    } else {
      parent_[rw] = rv;
      shift_[rw] = d;
      wind_[rv] |= wind_[rw];
      if (rank_[rv] == rank_[rw])
        ++rank_[rv];
    }
  }

  std::uint32_t root(std::uint32_t v) {
    Index3 s;
    return find(v, s);
  }
  std::uint8_t winding(std::uint32_t root) const { return wind_[root]; }

private:
  static void add(Index3& a, const Index3& b) {
    for (int i = 0; i != 3; ++i) a[i] += b[i];
  }
  static void sub(Index3& a, const Index3& b) {
    for (int i = 0; i != 3; ++i) a[i] -= b[i];
  }

  std::vector<std::uint32_t> parent_;
  std::vector<Index3> shift_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::uint8_t> wind_;
};

} // namespace impl

// 6-neighbour components of the solid voxels with periodic wrap.
inline ConnectivityReport periodic_components(const VoxelGrid& grid) {
  const int n = grid.n();
  ConnectivityReport rep;
  std::size_t solid = grid.count();
  if (solid == 0)
    return rep;

  impl::ShiftUnionFind uf(grid.size());
  for (int k = 0; k != n; ++k)
    for (int j = 0; j != n; ++j)
      for (int i = 0; i != n; ++i) {
        if (!grid(i, j, k))
          continue;
        auto v = static_cast<std::uint32_t>(grid.index(i, j, k));
        const Index3 c{i, j, k};
        for (int a = 0; a != 3; ++a) {
          Index3 nb = c;
          Index3 step{0, 0, 0};
          if (++nb[a] == n) {
            nb[a] = 0;
            step[a] = 1;
          }
          if (grid(nb[0], nb[1], nb[2]))
            uf.link(v, static_cast<std::uint32_t>(grid.index(nb[0], nb[1], nb[2])), step);
        }
      }

  std::vector<std::uint32_t> sizes(grid.size(), 0);
  std::uint32_t largest = 0;
  for (std::size_t v = 0; v != grid.size(); ++v) {
    if (!grid[v])
      continue;
    std::uint32_t r = uf.root(static_cast<std::uint32_t>(v));
    if (sizes[r]++ == 0) {
      ++rep.component_count;
      std::uint8_t w = uf.winding(r);
      for (int a = 0; a != 3; ++a)
        if (w & (1u << a))
          rep.percolates[a] = true;
    }
    largest = std::max(largest, sizes[r]);
  }
  rep.largest_component_fraction = static_cast<double>(largest) / static_cast<double>(solid);
  return rep;
}

} // namespace cubatlas

#endif
