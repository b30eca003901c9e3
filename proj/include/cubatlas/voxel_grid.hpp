// Periodic binary voxel grids on the unit cube and the action of space
// group operators on voxel indices.
//
// Voxel (i,j,k) has its centre at ((i+0.5)/n, (j+0.5)/n, (k+0.5)/n). With
// n divisible by 4, every cubic operator maps voxel centres exactly onto
// voxel centres.

#ifndef CUBATLAS_VOXEL_GRID_HPP_
#define CUBATLAS_VOXEL_GRID_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "symgroup.hpp"
#include "symop.hpp"

namespace cubatlas {

using Index3 = std::array<int, 3>;

class VoxelGrid {
public:
  VoxelGrid() = default;

  explicit VoxelGrid(int n, bool solid = false) : n_(n) {
    if (n < 4 || n % 4 != 0)
      throw DomainError("voxel grid edge must be a positive multiple of 4, got " +
                        std::to_string(n));
    cells_.assign(static_cast<std::size_t>(n) * n * n, solid ? 1 : 0);
  }

  static VoxelGrid full(int n) { return VoxelGrid(n, true); }
  static VoxelGrid empty(int n) { return VoxelGrid(n, false); }

  int n() const { return n_; }
  std::size_t size() const { return cells_.size(); }

  // x-fastest linear index
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n_) * (static_cast<std::size_t>(j) +
                                           static_cast<std::size_t>(n_) * k);
  }
  Index3 coords(std::size_t idx) const {
    auto nn = static_cast<std::size_t>(n_);
    return {static_cast<int>(idx % nn), static_cast<int>((idx / nn) % nn),
            static_cast<int>(idx / (nn * nn))};
  }

  bool operator()(int i, int j, int k) const { return cells_[index(i, j, k)] != 0; }
  bool operator[](std::size_t idx) const { return cells_[idx] != 0; }

  void set(int i, int j, int k, bool v) { cells_[index(i, j, k)] = v ? 1 : 0; }
  void set(std::size_t idx, bool v) { cells_[idx] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
  }

  const std::vector<std::uint8_t>& cells() const { return cells_; }

  bool operator==(const VoxelGrid&) const = default;

private:
  int n_ = 0;
  std::vector<std::uint8_t> cells_;  // 0 = void, 1 = solid
};

inline double density(const VoxelGrid& g) {
  if (g.size() == 0)
    return 0.0;
  return static_cast<double>(g.count()) / static_cast<double>(g.size());
}

// Index map of an operator on an n^3 voxel grid:
//   i'_r = s_r * i_{c_r} + corr_r + (n/4) t_r   (mod n)
// where (c_r, s_r) locate the nonzero of row r and corr_r = -1 for a
// negative entry, which keeps voxel centres on voxel centres.
class VoxelAction {
public:
  VoxelAction(const SymOp& op, int n) : n_(n) {
    for (int r = 0; r != 3; ++r) {
      col_[r] = op.column(r);
      sign_[r] = op.sign(r);
      offset_[r] = (sign_[r] < 0 ? -1 : 0) + (n / 4) * op.tran[r];
    }
  }

  Index3 operator()(const Index3& i) const {
    Index3 out;
    for (int r = 0; r != 3; ++r) {
      int v = (sign_[r] * i[col_[r]] + offset_[r]) % n_;
      out[r] = v < 0 ? v + n_ : v;
    }
    return out;
  }

private:
  int n_;
  std::array<int, 3> col_{}, sign_{}, offset_{};
};

// Push-forward: out[op(i)] = grid[i].
inline VoxelGrid apply_op(const VoxelGrid& grid, const SymOp& op) {
  int n = grid.n();
  if (n % 4 != 0)
    throw DomainError("apply_op requires n divisible by 4");
  VoxelAction act(op, n);
  VoxelGrid out(n);
  for (int k = 0; k != n; ++k)
    for (int j = 0; j != n; ++j)
      for (int i = 0; i != n; ++i)
        if (grid(i, j, k)) {
          Index3 m = act({i, j, k});
          out.set(m[0], m[1], m[2], true);
        }
  return out;
}

inline bool is_invariant(const VoxelGrid& grid, const SpaceGroup& g) {
  int n = grid.n();
  for (const SymOp& op : g.ops) {
    if (op.is_identity())
      continue;
    VoxelAction act(op, n);
    for (int k = 0; k != n; ++k)
      for (int j = 0; j != n; ++j)
        for (int i = 0; i != n; ++i) {
          Index3 m = act({i, j, k});
          if (grid(i, j, k) != grid(m[0], m[1], m[2]))
            return false;
        }
  }
  return true;
}

} // namespace cubatlas

#endif
