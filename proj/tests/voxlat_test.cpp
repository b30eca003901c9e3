#include <array>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cubatlas/connectivity.hpp"
#include "cubatlas/orbits.hpp"
#include "cubatlas/symgroup.hpp"
#include "cubatlas/voxel_grid.hpp"

using namespace cubatlas;

namespace {

// Voxel (i,j,k) has its centre at ((2i+1)/2n, ...). Apply the affine map in
// units of 1/(4n) and read back the voxel index.
Index3 map_centre(const SymOp& op, const Index3& v, int n) {
  std::array<long, 3> c{};
  for (int a = 0; a != 3; ++a)
    c[a] = 2L * (2 * v[a] + 1);  // centre * 4n
  Index3 out{};
  for (int r = 0; r != 3; ++r) {
    long x = 0;
    for (int a = 0; a != 3; ++a)
      x += op.rot[r][a] * c[a];
    x += static_cast<long>(op.tran[r]) * n;  // tran/4 * 4n
    const long m = 4L * n;
    x = ((x % m) + m) % m;
    EXPECT_EQ(x % 4, 2) << "centre did not map onto a centre";
    out[r] = static_cast<int>((x - 2) / 4);
  }
  return out;
}

VoxelGrid random_grid(int n, double p, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(p);
  VoxelGrid g(n);
  for (std::size_t v = 0; v != g.size(); ++v)
    g.set(v, coin(rng));
  return g;
}

// Flood fill on the torus, with each visited voxel storing its unwrapped
// position; a component wraps along axis a if two unwrapped positions of
// one voxel differ in that coordinate.
struct Flood {
  int components = 0;
  std::array<bool, 3> wraps{false, false, false};
};

Flood flood(const VoxelGrid& g) {
  const int n = g.n();
  Flood f;
  std::vector<char> seen(g.size(), 0);
  std::vector<std::array<long, 3>> pos(g.size());
  for (std::size_t s = 0; s != g.size(); ++s) {
    if (!g[s] || seen[s])
      continue;
    ++f.components;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    const Index3 c = g.coords(s);
    pos[s] = {c[0], c[1], c[2]};
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      for (int a = 0; a != 3; ++a)
        for (int d : {-1, 1}) {
          std::array<long, 3> p = pos[v];
          p[a] += d;
          Index3 w{};
          for (int b = 0; b != 3; ++b)
            w[b] = static_cast<int>(((p[b] % n) + n) % n);
          const std::size_t u = g.index(w[0], w[1], w[2]);
          if (!g[u])
            continue;
          if (!seen[u]) {
            seen[u] = 1;
            pos[u] = p;
            q.push(u);
          } else {
            for (int b = 0; b != 3; ++b)
              if (pos[u][b] != p[b])
                f.wraps[b] = true;
          }
        }
    }
  }
  return f;
}

} // namespace

TEST(VoxelAction, MatchesAffineMapOnCentres) {
  for (int n : {4, 8, 12}) {
    for (int g : {195, 203, 212, 227, 230}) {
      for (const SymOp& op : group(g).ops) {
        VoxelAction act(op, n);
        for (int k = 0; k != n; ++k)
          for (int j = 0; j != n; ++j)
            for (int i = 0; i != n; ++i)
              ASSERT_EQ(act({i, j, k}), map_centre(op, {i, j, k}, n))
                  << "group " << g << " op " << op.triplet() << " n " << n;
      }
    }
  }
}

TEST(VoxelAction, RequiresResolutionDivisibleByFour) {
  EXPECT_THROW(apply_op(VoxelGrid(6), group(221).ops[1]), DomainError);
}

TEST(VoxelGrid, IndexIsXFastest) {
  VoxelGrid g(4);
  EXPECT_EQ(g.index(1, 0, 0), 1u);
  EXPECT_EQ(g.index(0, 1, 0), 4u);
  EXPECT_EQ(g.index(0, 0, 1), 16u);
  EXPECT_EQ(g.coords(g.index(3, 2, 1)), (Index3{3, 2, 1}));
}

TEST(Orbits, CountMatchesBurnside) {
  // number of orbits = mean number of fixed voxels over the group
  for (int n : {4, 8}) {
    for (int g = first_cubic_group; g <= last_cubic_group; ++g) {
      const SpaceGroup& sg = group(g);
      long fixed = 0;
      for (const SymOp& op : sg.ops)
        for (int k = 0; k != n; ++k)
          for (int j = 0; j != n; ++j)
            for (int i = 0; i != n; ++i)
              fixed += map_centre(op, {i, j, k}, n) == Index3{i, j, k};
      ASSERT_EQ(fixed % sg.order(), 0);
      EXPECT_EQ(orbits(n, sg).orbit_count(), static_cast<std::size_t>(fixed / sg.order()))
          << "group " << g << " n " << n;
    }
  }
}

TEST(Orbits, PartitionIsInvariant) {
  const int n = 8;
  for (int g : {198, 206, 214, 225, 229}) {
    const SpaceGroup& sg = group(g);
    const OrbitPartition p = orbits(n, sg);
    std::size_t total = 0;
    for (std::size_t o = 0; o != p.orbit_count(); ++o) {
      const auto& m = p.members[o];
      total += m.size();
      EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
      EXPECT_EQ(sg.order() % static_cast<int>(m.size()), 0);  // orbit-stabilizer
      for (std::uint32_t v : m)
        EXPECT_EQ(p.orbit_id[v], o);
    }
    EXPECT_EQ(total, static_cast<std::size_t>(n * n * n));
    VoxelGrid probe(n);
    for (std::uint32_t v : p.members[p.orbit_count() / 2])
      probe.set(v, true);
    EXPECT_TRUE(is_invariant(probe, sg));
  }
}

TEST(Orbits, SymmetrizeProjectsOntoInvariantGrids) {
  const VoxelGrid raw = random_grid(8, 0.5, 11);
  for (int g : {195, 216, 230}) {
    const SpaceGroup& sg = group(g);
    const VoxelGrid lo = symmetrize(raw, sg, SymmetrizeMode::Intersection);
    const VoxelGrid hi = symmetrize(raw, sg, SymmetrizeMode::Union);
    EXPECT_TRUE(is_invariant(lo, sg));
    EXPECT_TRUE(is_invariant(hi, sg));
    for (std::size_t v = 0; v != raw.size(); ++v) {
      EXPECT_LE(lo[v], raw[v]);
      EXPECT_LE(raw[v], hi[v]);
    }
    EXPECT_EQ(symmetrize(lo, sg, SymmetrizeMode::Union), lo);
  }
}

TEST(Invariance, FullAndEmptyGridsAreInvariant) {
  for (int g = first_cubic_group; g <= last_cubic_group; ++g) {
    EXPECT_TRUE(is_invariant(VoxelGrid::full(8), group(g)));
    EXPECT_TRUE(is_invariant(VoxelGrid::empty(8), group(g)));
  }
}

TEST(Invariance, DetectsSingleVoxelBreak) {
  VoxelGrid g = VoxelGrid::full(8);
  g.set(1, 2, 3, false);
  EXPECT_FALSE(is_invariant(g, group(221)));
  EXPECT_TRUE(is_invariant(g, trivial_group()));
}

TEST(Connectivity, StraightRodPercolatesAlongItsAxis) {
  VoxelGrid g(8);
  for (int i = 0; i != 8; ++i)
    g.set(i, 2, 3, true);
  const auto r = periodic_components(g);
  EXPECT_EQ(r.component_count, 1);
  EXPECT_EQ(r.percolates, (std::array<bool, 3>{true, false, false}));
}

TEST(Connectivity, ClosedLoopDoesNotPercolate) {
  VoxelGrid g(8);
  for (int i = 1; i != 4; ++i) {
    g.set(i, 1, 0, true);
    g.set(i, 3, 0, true);
    g.set(1, i, 0, true);
    g.set(3, i, 0, true);
  }
  const auto r = periodic_components(g);
  EXPECT_EQ(r.component_count, 1);
  EXPECT_EQ(r.percolates, (std::array<bool, 3>{false, false, false}));
}

TEST(Connectivity, DiagonalStaircaseWindsInTwoAxes) {
  // (0,0)->(1,0)->(1,1)->(2,1)->... returns to the start after a shift
  // of (n, n) and never wraps along one axis alone
  const int n = 8;
  VoxelGrid g(n);
  for (int s = 0; s != n; ++s) {
    g.set(s, s, 0, true);
    g.set((s + 1) % n, s, 0, true);
  }
  const auto r = periodic_components(g);
  EXPECT_EQ(r.component_count, 1);
  EXPECT_EQ(r.percolates, (std::array<bool, 3>{true, true, false}));
}

TEST(Connectivity, SeparateSlabs) {
  VoxelGrid g(8);
  for (int j = 0; j != 8; ++j)
    for (int i = 0; i != 8; ++i) {
      g.set(i, j, 0, true);
      g.set(i, j, 3, true);
    }
  const auto r = periodic_components(g);
  EXPECT_EQ(r.component_count, 2);
  EXPECT_DOUBLE_EQ(r.largest_component_fraction, 0.5);
  EXPECT_EQ(r.percolates, (std::array<bool, 3>{true, true, false}));
  EXPECT_FALSE(r.single_component());
}

TEST(Connectivity, EmptyAndFull) {
  EXPECT_EQ(periodic_components(VoxelGrid::empty(4)).component_count, 0);
  const auto full = periodic_components(VoxelGrid::full(4));
  EXPECT_TRUE(full.single_component());
  EXPECT_TRUE(full.percolates_all());
}

TEST(Connectivity, AgreesWithFloodFillOnRandomGrids) {
  for (std::uint32_t seed = 1; seed != 200; ++seed) {
    const int n = 4 * (1 + static_cast<int>(seed % 3));
    const VoxelGrid g = random_grid(n, 0.2 + 0.3 * (seed % 5) / 4.0, seed);
    const Flood f = flood(g);
    const auto r = periodic_components(g);
    ASSERT_EQ(r.component_count, f.components) << "seed " << seed;
    ASSERT_EQ(r.percolates, f.wraps) << "seed " << seed;
  }
}
