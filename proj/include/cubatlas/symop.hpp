// Symmetry operators of the cubic space groups in exact integer form.
//
// A SymOp maps fractional coordinates x -> W x + t/4, where W is a signed
// permutation matrix and t holds quarter-cell translations reduced mod 4.
// No cubic space group needs a finer translation than 1/4.

#ifndef CUBATLAS_SYMOP_HPP_
#define CUBATLAS_SYMOP_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cubatlas {

struct SymOp {
  using Rot = std::array<std::array<int, 3>, 3>;
  using Tran = std::array<int, 3>;
  static constexpr int DEN = 4;

  Rot rot = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Tran tran = {0, 0, 0};

  static SymOp identity() { return SymOp{}; }

  auto operator<=>(const SymOp&) const = default;

  // (*this * other)(x) = this(other(x))
  SymOp operator*(const SymOp& other) const {
    SymOp r;
    for (int i = 0; i != 3; ++i) {
      int t = tran[i];
      for (int j = 0; j != 3; ++j) {
        int s = 0;
        for (int k = 0; k != 3; ++k)
          s += rot[i][k] * other.rot[k][j];
        r.rot[i][j] = s;
        t += rot[i][j] * other.tran[j];
      }
      r.tran[i] = wrap(t);
    }
    return r;
  }

  SymOp inverse() const {
    SymOp r;
    for (int i = 0; i != 3; ++i)
      for (int j = 0; j != 3; ++j)
        r.rot[i][j] = rot[j][i];
    for (int i = 0; i != 3; ++i) {
      int t = 0;
      for (int j = 0; j != 3; ++j)
        t -= r.rot[i][j] * tran[j];
      r.tran[i] = wrap(t);
    }
    return r;
  }

  int det() const {
    return rot[0][0] * (rot[1][1] * rot[2][2] - rot[1][2] * rot[2][1])
         - rot[0][1] * (rot[1][0] * rot[2][2] - rot[1][2] * rot[2][0])
         + rot[0][2] * (rot[1][0] * rot[2][1] - rot[1][1] * rot[2][0]);
  }

  bool is_identity() const { return *this == SymOp{}; }

  // Column index and sign of the single nonzero entry in row r.
  int column(int r) const {
    for (int c = 0; c != 3; ++c)
      if (rot[r][c] != 0)
        return c;
    return -1;
  }
  int sign(int r) const { return rot[r][column(r)]; }

  // Each row and column has exactly one nonzero entry equal to +-1 and
  // translations are reduced mod 4.
  bool is_valid() const {
    for (int i = 0; i != 3; ++i) {
      int row_nz = 0, col_nz = 0;
      for (int j = 0; j != 3; ++j) {
        if (rot[i][j] != 0) {
          if (rot[i][j] != 1 && rot[i][j] != -1)
            return false;
          ++row_nz;
        }
        if (rot[j][i] != 0)
          ++col_nz;
      }
      if (row_nz != 1 || col_nz != 1 || tran[i] < 0 || tran[i] >= DEN)
        return false;
    }
    return true;
  }

  std::string triplet() const;

  // Compact integer key, unique for valid ops (used for hashing/sorting).
  std::uint32_t code() const {
    std::uint32_t c = 0;
    for (int r = 0; r != 3; ++r) {
      c = c * 6 + static_cast<std::uint32_t>(column(r) * 2 + (sign(r) < 0 ? 1 : 0));
      c = c * 4 + static_cast<std::uint32_t>(tran[r]);
    }
    return c;
  }

  static int wrap(int t) { return ((t % DEN) + DEN) % DEN; }
};

inline std::string SymOp::triplet() const {
  static const char* const quarter[] = {"", "+1/4", "+1/2", "+3/4"};
  std::string s;
  for (int i = 0; i != 3; ++i) {
    if (i != 0)
      s += ',';
    bool first = true;
    for (int j = 0; j != 3; ++j) {
      if (rot[i][j] == 0)
        continue;
      if (rot[i][j] < 0)
        s += '-';
      else if (!first)
        s += '+';
      s += static_cast<char>('x' + j);
      first = false;
    }
    s += quarter[tran[i]];
  }
  return s;
}

// Parses "x,y,z"-style triplets with translations in multiples of 1/4,
// e.g. "-y+1/4,x+3/4,z+1/4".
inline SymOp parse_triplet(std::string_view text) {
  auto fail = [&](const char* what) -> SymOp {
    throw std::invalid_argument("bad triplet '" + std::string(text) + "': " + what);
  };
  SymOp op;
  op.rot = {};
  int row = 0;
  std::size_t pos = 0;
  while (row < 3) {
    int num = 0;
    int sgn = 1;
    bool have_sign = false;
    while (pos < text.size() && text[pos] != ',') {
      char c = text[pos];
      if (c == ' ') {
        ++pos;
      } else if (c == '+' || c == '-') {
        sgn = c == '-' ? -1 : 1;
        have_sign = true;
        ++pos;
      } else if (c >= 'x' && c <= 'z') {
        op.rot[row][c - 'x'] += sgn;
        sgn = 1;
        have_sign = false;
        ++pos;
      } else if (c >= '0' && c <= '9') {
        int a = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9')
          a = a * 10 + (text[pos++] - '0');
        int b = 1;
        if (pos < text.size() && text[pos] == '/') {
          ++pos;
          b = 0;
          while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9')
            b = b * 10 + (text[pos++] - '0');
        }
        if (b == 0 || (a * SymOp::DEN) % b != 0)
          return fail("translation is not a multiple of 1/4");
        num += sgn * a * SymOp::DEN / b;
        sgn = 1;
        have_sign = false;
      } else {
        return fail("unexpected character");
      }
    }
    if (have_sign)
      return fail("dangling sign");
    op.tran[row] = SymOp::wrap(num);
    ++row;
    if (row < 3) {
      if (pos >= text.size())
        return fail("expected three components");
      ++pos;  // ','
    }
  }
  if (pos != text.size())
    return fail("trailing characters");
  if (!op.is_valid())
    return fail("not a signed permutation");
  return op;
}

} // namespace cubatlas

#endif
