// The 36 cubic space groups (195-230).
//
// Each group is stored as a short list of generators transcribed from the
// International Tables (Hall-symbol generators, origin choice 2 for the
// groups that have two origins). The full operator list, including the
// centering translations, is obtained by closure and checked against the
// order table when the group is first requested.

#ifndef CUBATLAS_SYMGROUP_HPP_
#define CUBATLAS_SYMGROUP_HPP_

#include <algorithm>
#include <array>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "symop.hpp"

namespace cubatlas {

enum class Bravais { P, I, F };
enum class PointGroup { T, Th, O, Td, Oh };  // 23, m-3, 432, -43m, m-3m

inline const char* to_string(Bravais b) {
  switch (b) {
    case Bravais::P: return "P";
    case Bravais::I: return "I";
    case Bravais::F: return "F";
  }
  return "?";
}

inline const char* to_string(PointGroup p) {
  switch (p) {
    case PointGroup::T: return "23";
    case PointGroup::Th: return "m-3";
    case PointGroup::O: return "432";
    case PointGroup::Td: return "-43m";
    case PointGroup::Oh: return "m-3m";
  }
  return "?";
}

// Crystal class names used when reporting statistics.
inline const char* class_name(PointGroup p) {
  switch (p) {
    case PointGroup::T: return "tetartoidal";
    case PointGroup::Th: return "diploidal";
    case PointGroup::O: return "gyroidal";
    case PointGroup::Td: return "hextetrahedral";
    case PointGroup::Oh: return "hexoctahedral";
  }
  return "?";
}

inline constexpr int point_group_order(PointGroup p) {
  switch (p) {
    case PointGroup::T: return 12;
    case PointGroup::Oh: return 48;
    default: return 24;
  }
}

inline constexpr int centering_multiplicity(Bravais b) {
  return b == Bravais::P ? 1 : b == Bravais::I ? 2 : 4;
}

inline constexpr int first_cubic_group = 195;
inline constexpr int last_cubic_group = 230;
inline constexpr int max_cubic_order = 192;

inline void check_group_number(int number) {
  if (number < first_cubic_group || number > last_cubic_group)
    throw DomainError("space group " + std::to_string(number) +
                      " is not cubic (expected 195..230)");
}

inline PointGroup point_group_of(int number) {
  check_group_number(number);
  if (number <= 199) return PointGroup::T;
  if (number <= 206) return PointGroup::Th;
  if (number <= 214) return PointGroup::O;
  if (number <= 220) return PointGroup::Td;
  return PointGroup::Oh;
}

inline Bravais bravais_of(int number) {
  check_group_number(number);
  // centering letter of groups 195..230
  static constexpr std::string_view centering = "PFIPIPPFFIPIPPFFIPPIPFIPFIPPPPFFFFII";
  char c = centering[static_cast<std::size_t>(number - first_cubic_group)];
  return c == 'P' ? Bravais::P : c == 'I' ? Bravais::I : Bravais::F;
}

struct SpaceGroup {
  int number = 0;
  std::string hm_symbol;
  Bravais bravais = Bravais::P;
  PointGroup point_group = PointGroup::T;
  std::vector<SymOp> ops;  // ops[0] is the identity
  // Setting used for groups with two origin choices (201, 203, 222, 224,
  // 227, 228): origin choice 2, at an inversion centre.
  int origin_choice = 1;

  int order() const { return static_cast<int>(ops.size()); }
};

namespace impl {

struct GroupData {
  int number;
  const char* hm;
  int origin_choice;
  std::array<const char*, 4> generators;  // nullptr-terminated
};

// Non-identity generators; centering is added from the Bravais letter.
inline constexpr GroupData group_table[36] = {
  {195, "P 2 3",     1, {"-x,-y,z", "x,-y,-z", "z,x,y", nullptr}},
  {196, "F 2 3",     1, {"-x,-y,z", "x,-y,-z", "z,x,y", nullptr}},
  {197, "I 2 3",     1, {"-x,-y,z", "x,-y,-z", "z,x,y", nullptr}},
  {198, "P 21 3",    1, {"-x+1/2,-y,z+1/2", "x+1/2,-y+1/2,-z", "z,x,y", nullptr}},
  {199, "I 21 3",    1, {"-x,-y+1/2,z", "x,-y,-z+1/2", "z,x,y", nullptr}},
  {200, "P m -3",    1, {"-x,-y,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {201, "P n -3",    2, {"-x+1/2,-y+1/2,z", "x,-y+1/2,-z+1/2", "z,x,y", "-x,-y,-z"}},
  {202, "F m -3",    1, {"-x,-y,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {203, "F d -3",    2, {"-x+1/4,-y+1/4,z", "x,-y+1/4,-z+1/4", "z,x,y", "-x,-y,-z"}},
  {204, "I m -3",    1, {"-x,-y,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {205, "P a -3",    1, {"-x+1/2,-y,z+1/2", "x+1/2,-y+1/2,-z", "z,x,y", "-x,-y,-z"}},
  {206, "I a -3",    1, {"-x,-y+1/2,z", "x,-y,-z+1/2", "z,x,y", "-x,-y,-z"}},
  {207, "P 4 3 2",   1, {"-y,x,z", "x,-y,-z", "z,x,y", nullptr}},
  {208, "P 42 3 2",  1, {"-y+1/2,x+1/2,z+1/2", "x,-y,-z", "z,x,y", nullptr}},
  {209, "F 4 3 2",   1, {"-y,x,z", "x,-y,-z", "z,x,y", nullptr}},
  {210, "F 41 3 2",  1, {"-y+1/4,x+1/4,z+1/4", "x,-y,-z", "z,x,y", nullptr}},
  {211, "I 4 3 2",   1, {"-y,x,z", "x,-y,-z", "z,x,y", nullptr}},
  {212, "P 43 3 2",  1, {"-y+3/4,x+1/4,z+3/4", "x+1/2,-y+1/2,-z", "z,x,y", nullptr}},
  {213, "P 41 3 2",  1, {"-y+1/4,x+3/4,z+1/4", "x+1/2,-y+1/2,-z", "z,x,y", nullptr}},
  {214, "I 41 3 2",  1, {"-y+1/4,x+3/4,z+1/4", "x,-y,-z+1/2", "z,x,y", nullptr}},
  {215, "P -4 3 m",  1, {"y,-x,-z", "x,-y,-z", "z,x,y", nullptr}},
  {216, "F -4 3 m",  1, {"y,-x,-z", "x,-y,-z", "z,x,y", nullptr}},
  {217, "I -4 3 m",  1, {"y,-x,-z", "x,-y,-z", "z,x,y", nullptr}},
  {218, "P -4 3 n",  1, {"y+1/2,-x+1/2,-z+1/2", "x,-y,-z", "z,x,y", nullptr}},
  {219, "F -4 3 c",  1, {"y+1/2,-x,-z", "x,-y,-z", "z,x,y", nullptr}},
  {220, "I -4 3 d",  1, {"y+1/4,-x+3/4,-z+1/4", "x,-y,-z+1/2", "z,x,y", nullptr}},
  {221, "P m -3 m",  1, {"-y,x,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {222, "P n -3 n",  2, {"-y+1/2,x,z", "x,-y+1/2,-z+1/2", "z,x,y", "-x,-y,-z"}},
  {223, "P m -3 n",  1, {"-y+1/2,x+1/2,z+1/2", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {224, "P n -3 m",  2, {"-y,x+1/2,z+1/2", "x,-y+1/2,-z+1/2", "z,x,y", "-x,-y,-z"}},
  {225, "F m -3 m",  1, {"-y,x,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {226, "F m -3 c",  1, {"-y+1/2,x,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {227, "F d -3 m",  2, {"-y,x+1/4,z+1/4", "x,-y+1/4,-z+1/4", "z,x,y", "-x,-y,-z"}},
  {228, "F d -3 c",  2, {"-y+1/2,x+1/4,z+1/4", "x,-y+1/4,-z+1/4", "z,x,y", "-x,-y,-z"}},
  {229, "I m -3 m",  1, {"-y,x,z", "x,-y,-z", "z,x,y", "-x,-y,-z"}},
  {230, "I a -3 d",  1, {"-y+1/4,x+3/4,z+1/4", "x,-y,-z+1/2", "z,x,y", "-x,-y,-z"}},
};

inline std::vector<SymOp> centering_ops(Bravais b) {
  std::vector<SymOp> v;
  auto pure = [](int a, int b_, int c) {
    SymOp op;
    op.tran = {a, b_, c};
    return op;
  };
  if (b == Bravais::I) {
    v.push_back(pure(2, 2, 2));
  } else if (b == Bravais::F) {
    v.push_back(pure(0, 2, 2));
    v.push_back(pure(2, 0, 2));
    v.push_back(pure(2, 2, 0));
  }
  return v;
}

} // namespace impl

// Smallest composition-closed set containing the identity and generators.
// Result is sorted with the identity first.
inline std::vector<SymOp> closure(std::span<const SymOp> generators) {
  std::vector<SymOp> ops{SymOp::identity()};
  std::unordered_set<std::uint32_t> seen{SymOp::identity().code()};
  for (const SymOp& g : generators) {
    if (!g.is_valid())
      throw DomainError("closure: invalid generator " + g.triplet());
    if (seen.insert(g.code()).second)
      ops.push_back(g);
  }
  // every product a*b with both factors in ops gets visited once
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      for (const SymOp& p : {ops[i] * ops[j], ops[j] * ops[i]}) {
        if (seen.insert(p.code()).second) {
          ops.push_back(p);
          if (ops.size() > static_cast<std::size_t>(max_cubic_order))
            throw DataCorruptionError("closure exceeded 192 operators");
        }
      }
    }
  }
  std::sort(ops.begin() + 1, ops.end());
  return ops;
}

namespace impl {

inline SpaceGroup build_group(int number) {
  const GroupData& d = group_table[number - first_cubic_group];
  if (d.number != number)
    throw DataCorruptionError("space group table out of order");
  SpaceGroup g;
  g.number = number;
  g.hm_symbol = d.hm;
  g.origin_choice = d.origin_choice;
  g.bravais = bravais_of(number);
  g.point_group = point_group_of(number);
  if (g.hm_symbol.front() != to_string(g.bravais)[0])
    throw DataCorruptionError("centering mismatch for group " + std::to_string(number));
  std::vector<SymOp> gens;
  for (const char* t : d.generators)
    if (t)
      gens.push_back(parse_triplet(t));
  for (const SymOp& c : centering_ops(g.bravais))
    gens.push_back(c);
  g.ops = closure(gens);
  int expected = point_group_order(g.point_group) * centering_multiplicity(g.bravais);
  if (g.order() != expected)
    throw DataCorruptionError("group " + std::to_string(number) + " has " +
                              std::to_string(g.order()) + " operators, expected " +
                              std::to_string(expected));
  return g;
}

} // namespace impl

// Fully expanded space group; built once, immutable, safe to share.
inline const SpaceGroup& group(int number) {
  check_group_number(number);
  static std::array<std::unique_ptr<const SpaceGroup>, 36> cache;
  static std::array<std::once_flag, 36> flags;
  auto idx = static_cast<std::size_t>(number - first_cubic_group);
  std::call_once(flags[idx], [&] {
    cache[idx] = std::make_unique<const SpaceGroup>(impl::build_group(number));
  });
  return *cache[idx];
}

// A trivial "group" {identity}, handy for tests and for unconstrained grids.
inline const SpaceGroup& trivial_group() {
  static const SpaceGroup g = [] {
    SpaceGroup t;
    t.number = 1;
    t.hm_symbol = "P 1";
    t.ops = {SymOp::identity()};
    return t;
  }();
  return g;
}

} // namespace cubatlas

#endif
