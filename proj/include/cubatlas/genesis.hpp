// Seeded symmetric erosion: start from the fully solid cell and remove
// whole orbits of voxels, in a shuffled order, until the relative density
// reaches the target. Removing whole orbits keeps the grid invariant under
// every operator of the group at every step.

#ifndef CUBATLAS_GENESIS_HPP_
#define CUBATLAS_GENESIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "connectivity.hpp"
#include "errors.hpp"
#include "orbits.hpp"
#include "rng.hpp"
#include "symgroup.hpp"
#include "voxel_grid.hpp"

namespace cubatlas {

// Structures below this relative density are dropped from datasets.
inline constexpr double min_dataset_density = 0.05;

enum class ErosionMode {
  // erode blindly, then validate; retry with a new sub-seed on failure
  PostHoc,
  // skip any orbit whose removal would break single-component percolation
  Connected,
};

inline const char* to_string(ErosionMode m) {
  return m == ErosionMode::PostHoc ? "post-hoc" : "connected";
}

struct GenSpec {
  int group_number = 221;
  int n = 64;
  double target_density = 0.3;
  std::uint64_t seed = 0;
  bool require_percolation = true;
  int max_attempts = 20;
  bool allow_low_density = false;  // permit targets below 0.05
  ErosionMode mode = ErosionMode::Connected;
};

struct ValidityReport {
  bool symmetric = false;
  bool density_ok = false;
  bool single_component = false;
  std::array<bool, 3> percolates = {false, false, false};
  double density = 0.0;
  ConnectivityReport connectivity;
  bool valid = false;
};

struct ValidateOptions {
  bool require_percolation = true;
  double min_density = min_dataset_density;
};

inline ValidityReport validate(const VoxelGrid& grid, const SpaceGroup& g,
                               const ValidateOptions& opt = {}) {
  ValidityReport r;
  r.symmetric = is_invariant(grid, g);
  r.density = density(grid);
  r.density_ok = r.density >= opt.min_density;
  r.connectivity = periodic_components(grid);
  r.single_component = r.connectivity.single_component();
  r.percolates = r.connectivity.percolates;
  r.valid = r.symmetric && r.density_ok;
  if (opt.require_percolation)
    r.valid = r.valid && r.single_component && r.connectivity.percolates_all();
  return r;
}

struct GenResult {
  VoxelGrid grid;
  double achieved_density = 0.0;
  int attempts_used = 0;
  int orbit_removals = 0;
  std::uint64_t seed = 0;
  ValidityReport report;
  std::vector<std::string> warnings;
};

struct GenerationFailure : std::runtime_error {
  GenerationFailure(const std::string& msg, GenResult last)
      : std::runtime_error(msg), last_attempt(std::move(last)) {}
  GenResult last_attempt;
};

// Orbit partitions are reused across structures of the same (group, n).
inline std::shared_ptr<const OrbitPartition> cached_orbits(int n, const SpaceGroup& g) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const OrbitPartition>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{g.number, n}];
  if (!slot)
    slot = std::make_shared<const OrbitPartition>(orbits(n, g));
  return slot;
}

// Sub-seed for attempt a; attempt 0 uses the spec seed itself.
inline std::uint64_t attempt_seed(std::uint64_t seed, int attempt) {
  return attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
}

namespace impl {

// True when removing voxel v cannot change connectivity or winding: its
// solid face neighbours stay face-connected inside the block of radius r
// around v (smaller than the period), so any path through v can be rerouted
// without changing its displacement. When this holds, a full backbone
// prune would remove nothing, so skipping it does not change the result.
inline bool locally_removable(const VoxelGrid& g, std::size_t v, int r) {
  const int n = g.n();
  r = std::min(r, (n - 2) / 2);
  const int w = 2 * r + 1;
  const Index3 c = g.coords(v);
  std::vector<std::int8_t> state(static_cast<std::size_t>(w * w * w), -1);  // -1 unread, 0 void, 1 solid, 2 seen
  auto at = [&](int x, int y, int z) -> std::int8_t& {
    auto& s = state[static_cast<std::size_t>(x + w * (y + w * z))];
    if (s < 0)
      s = g((c[0] + x - r + n) % n, (c[1] + y - r + n) % n, (c[2] + z - r + n) % n) ? 1 : 0;
    return s;
  };
  at(r, r, r) = 0;
  static constexpr int dirs[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  int targets = 0;
  std::array<int, 3> start{-1, -1, -1};
  for (const auto& d : dirs)
    if (at(r + d[0], r + d[1], r + d[2]) == 1) {
      ++targets;
      start = {r + d[0], r + d[1], r + d[2]};
    }
  if (targets == 0)
    return false;  // v is an isolated voxel
  auto is_face = [r](int x, int y, int z) {
    return std::abs(x - r) + std::abs(y - r) + std::abs(z - r) == 1;
  };
  std::vector<std::array<int, 3>> stack{start};
  at(start[0], start[1], start[2]) = 2;
  int found = 1;
  while (!stack.empty() && found < targets) {
    const auto q = stack.back();
    stack.pop_back();
    for (const auto& d : dirs) {
      const int x = q[0] + d[0], y = q[1] + d[1], z = q[2] + d[2];
      if (x < 0 || x >= w || y < 0 || y >= w || z < 0 || z >= w)
        continue;
      auto& s = at(x, y, z);
      if (s != 1)
        continue;
      s = 2;
      found += is_face(x, y, z);
      stack.push_back({x, y, z});
    }
  }
  return found == targets;
}

// Removes every solid component that does not wind around all three axes.
// Such components form a group-invariant set. Returns voxels removed, or
// -1 if the percolating part is not exactly one component.
inline long prune_to_backbone(VoxelGrid& g) {
  const std::size_t size = g.size();
  ShiftUnionFind uf(size);
  const int n = g.n();
  for (int k = 0; k != n; ++k)
    for (int j = 0; j != n; ++j)
      for (int i = 0; i != n; ++i) {
        if (!g(i, j, k))
          continue;
        const auto v = static_cast<std::uint32_t>(g.index(i, j, k));
        const Index3 c{i, j, k};
        for (int a = 0; a != 3; ++a) {
          Index3 nb = c;
          Index3 step{0, 0, 0};
          if (++nb[a] == n) {
            nb[a] = 0;
            step[a] = 1;
          }
          if (g(nb[0], nb[1], nb[2]))
            uf.link(v, static_cast<std::uint32_t>(g.index(nb[0], nb[1], nb[2])), step);
        }
      }
  constexpr std::uint32_t none = 0xffffffffu;
  std::uint32_t backbone = none;
  std::vector<std::uint32_t> roots(size, none);
  for (std::size_t v = 0; v != size; ++v) {
    if (!g[v])
      continue;
    const std::uint32_t r = uf.root(static_cast<std::uint32_t>(v));
    roots[v] = r;
    if (uf.winding(r) == 7) {
      if (backbone == none)
        backbone = r;
      else if (backbone != r)
        return -1;
    }
  }
  if (backbone == none)
    return -1;
  long removed = 0;
  for (std::size_t v = 0; v != size; ++v)
    if (roots[v] != none && roots[v] != backbone) {
      g.set(v, false);
      ++removed;
    }
  return removed;
}

inline GenResult erode_once(const GenSpec& spec, const SpaceGroup& g,
                            const OrbitPartition& part, std::uint64_t seed) {
  GenResult res;
  res.grid = VoxelGrid::full(spec.n);
  const double total = static_cast<double>(res.grid.size());
  long remaining = static_cast<long>(res.grid.size());
  // fewest voxels that keep the density strictly within one orbit of the target
  const long floor_count = static_cast<long>(std::floor(
      spec.target_density * total - static_cast<double>(part.largest_orbit()))) + 1;
  auto above_target = [&] { return static_cast<double>(remaining) / total > spec.target_density; };
  // the guarded sweep also refuses to cross the dataset density filter,
  // so a target just above it is met by a smaller orbit instead
  const long lower_count =
      spec.allow_low_density
          ? floor_count
          : std::max(floor_count,
                     static_cast<long>(std::ceil(min_dataset_density * total - 1e-9)));

  std::vector<std::uint32_t> order(part.orbit_count());
  std::iota(order.begin(), order.end(), 0u);
  SplitMix64 rng(seed);
  rng.shuffle(std::span<std::uint32_t>(order));

  const bool guarded = spec.mode == ErosionMode::Connected && spec.require_percolation;
  if (!guarded) {
    for (std::uint32_t label : order) {
      if (!above_target())
        break;
      for (std::uint32_t v : part.members[label])
        res.grid.set(v, false);
      remaining -= static_cast<long>(part.members[label].size());
      ++res.orbit_removals;
    }
  } else {
    // Sweep the shuffled list repeatedly; an orbit that was load-bearing in
    // one sweep may become removable once its dependants are gone.
    std::vector<std::uint32_t> pending = order, skipped;
    bool progress = true;
    while (above_target() && progress && !pending.empty()) {
      progress = false;
      skipped.clear();
      for (std::uint32_t label : pending) {
        if (!above_target()) {
          skipped.push_back(label);
          continue;
        }
        const auto& members = part.members[label];
        if (!res.grid[members.front()])
          continue;  // already pruned
        if (remaining - static_cast<long>(members.size()) < lower_count) {
          skipped.push_back(label);
          continue;
        }
        bool local = true;
        for (std::uint32_t v : members) {
          if (local && !locally_removable(res.grid, v, 1) &&
              !locally_removable(res.grid, v, 3))
            local = false;
          res.grid.set(v, false);
        }
        long dropped = static_cast<long>(members.size());
        if (!local) {
          VoxelGrid trial = res.grid;
          const long pruned = prune_to_backbone(trial);
          if (pruned < 0 || remaining - dropped - pruned < lower_count) {
            for (std::uint32_t v : members)
              res.grid.set(v, true);
            skipped.push_back(label);
            continue;
          }
          dropped += pruned;
          res.grid = std::move(trial);
        }
        remaining -= dropped;
        ++res.orbit_removals;
        progress = true;
      }
      pending.swap(skipped);
    }
  }
  res.achieved_density = static_cast<double>(remaining) / total;
  ValidateOptions vo;
  vo.require_percolation = spec.require_percolation;
  vo.min_density = spec.allow_low_density ? 0.0 : min_dataset_density;
  res.report = validate(res.grid, g, vo);
  // a guarded run that got stuck above the target is a failed attempt
  if (res.achieved_density > spec.target_density)
    res.report.valid = false;
  return res;
}

} // namespace impl

inline void check_spec(const GenSpec& spec) {
  check_group_number(spec.group_number);
  if (spec.n < 4 || spec.n % 4 != 0)
    throw DomainError("resolution must be a positive multiple of 4");
  if (!(spec.target_density > 0.0 && spec.target_density <= 1.0))
    throw DomainError("target density must lie in (0, 1]");
  if (spec.target_density < min_dataset_density && !spec.allow_low_density)
    throw DomainError("target density below 0.05 requires the low-density override");
  if (spec.max_attempts < 1)
    throw DomainError("max_attempts must be at least 1");
}

// Deterministic: the same spec always yields the same result.
inline GenResult generate(const GenSpec& spec) {
  check_spec(spec);
  const SpaceGroup& g = group(spec.group_number);
  auto part = cached_orbits(spec.n, g);
  GenResult last;
  for (int a = 0; a != spec.max_attempts; ++a) {
    last = impl::erode_once(spec, g, *part, attempt_seed(spec.seed, a));
    last.attempts_used = a + 1;
    last.seed = spec.seed;
    if (spec.target_density < min_dataset_density)
      last.warnings.push_back("target density below the 0.05 dataset filter");
    if (last.report.valid)
      return last;
  }
  throw GenerationFailure("generation failed for group " + std::to_string(spec.group_number) +
                              " after " + std::to_string(spec.max_attempts) + " attempts",
                          std::move(last));
}

} // namespace cubatlas

#endif
