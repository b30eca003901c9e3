// Trilinear 8-node hexahedron for isotropic linear elasticity.
//
// Local node l = ax + 2*ay + 4*az sits at corner (ax, ay, az) * h.
// Degrees of freedom are ordered (node, component): dof = 3*l + c.
// Strains use Voigt order (11, 22, 33, 23, 13, 12) with engineering shears.

#ifndef CUBATLAS_ELEMENT_HPP_
#define CUBATLAS_ELEMENT_HPP_

#include <array>
#include <cmath>

#include "errors.hpp"

namespace cubatlas {

using Voigt = std::array<double, 6>;
using Matrix6 = std::array<std::array<double, 6>, 6>;
using ElementMatrix = std::array<std::array<double, 24>, 24>;
using ElementVector = std::array<double, 24>;

inline void check_poisson(double nu) {
  if (!(nu > -1.0 && nu < 0.5))
    throw DomainError("Poisson ratio must lie in (-1, 0.5)");
}

// Isotropic stiffness in Voigt form.
inline Matrix6 isotropic_stiffness(double E, double nu) {
  check_poisson(nu);
  double lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  double mu = E / (2 * (1 + nu));
  Matrix6 D{};
  for (int i = 0; i != 3; ++i) {
    for (int j = 0; j != 3; ++j)
      D[i][j] = lambda;
    D[i][i] = lambda + 2 * mu;
    D[i + 3][i + 3] = mu;
  }
  return D;
}

// 2x2x2 Gauss quadrature, exact for this element on a cube.
inline ElementMatrix element_stiffness(double E, double nu, double h) {
  if (!(E > 0) || !(h > 0))
    throw DomainError("element_stiffness: modulus and edge must be positive");
  const Matrix6 D = isotropic_stiffness(E, nu);
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  ElementMatrix K{};
  for (double x1 : pts)
    for (double x2 : pts)
      for (double x3 : pts) {
        const double xi[3] = {x1, x2, x3};
        // derivatives of the shape functions on the unit reference cube
        double dN[8][3];
        for (int l = 0; l != 8; ++l) {
          const int a[3] = {l & 1, (l >> 1) & 1, (l >> 2) & 1};
          double f[3], df[3];
          for (int d = 0; d != 3; ++d) {
            f[d] = a[d] ? xi[d] : 1 - xi[d];
            df[d] = a[d] ? 1.0 : -1.0;
          }
          dN[l][0] = df[0] * f[1] * f[2] / h;
          dN[l][1] = f[0] * df[1] * f[2] / h;
          dN[l][2] = f[0] * f[1] * df[2] / h;
        }
        double B[6][24] = {};
        for (int l = 0; l != 8; ++l) {
          const int c = 3 * l;
          B[0][c] = dN[l][0];
          B[1][c + 1] = dN[l][1];
          B[2][c + 2] = dN[l][2];
          B[3][c + 1] = dN[l][2];
          B[3][c + 2] = dN[l][1];
          B[4][c] = dN[l][2];
          B[4][c + 2] = dN[l][0];
          B[5][c] = dN[l][1];
          B[5][c + 1] = dN[l][0];
        }
        const double w = h * h * h / 8.0;
        double DB[6][24];
        for (int i = 0; i != 6; ++i)
          for (int k = 0; k != 24; ++k) {
            double s = 0;
            for (int j = 0; j != 6; ++j)
              s += D[i][j] * B[j][k];
            DB[i][k] = s;
          }
        for (int r = 0; r != 24; ++r)
          for (int c = 0; c != 24; ++c) {
            double s = 0;
            for (int i = 0; i != 6; ++i)
              s += B[i][r] * DB[i][c];
            K[r][c] += w * s;
          }
      }
  // symmetric by construction up to rounding; make it exact
  for (int r = 0; r != 24; ++r)
    for (int c = r + 1; c != 24; ++c)
      K[r][c] = K[c][r] = 0.5 * (K[r][c] + K[c][r]);
  return K;
}

// Nodal displacements of the affine field u = eps * x on an element of edge
// h with its first corner at the origin. eps is in Voigt form.
inline ElementVector affine_displacement(const Voigt& eps, double h) {
  // symmetric displacement gradient from engineering strains
  const double G[3][3] = {{eps[0], eps[5] / 2, eps[4] / 2},
                          {eps[5] / 2, eps[1], eps[3] / 2},
                          {eps[4] / 2, eps[3] / 2, eps[2]}};
  ElementVector u{};
  for (int l = 0; l != 8; ++l) {
    const double x[3] = {(l & 1) * h, ((l >> 1) & 1) * h, ((l >> 2) & 1) * h};
    for (int c = 0; c != 3; ++c)
      u[3 * l + c] = G[c][0] * x[0] + G[c][1] * x[1] + G[c][2] * x[2];
  }
  return u;
}

inline ElementVector multiply(const ElementMatrix& K, const ElementVector& u) {
  ElementVector y{};
  for (int r = 0; r != 24; ++r) {
    double s = 0;
    for (int c = 0; c != 24; ++c)
      s += K[r][c] * u[c];
    y[r] = s;
  }
  return y;
}

inline double dot(const ElementVector& a, const ElementVector& b) {
  double s = 0;
  for (int i = 0; i != 24; ++i)
    s += a[i] * b[i];
  return s;
}

} // namespace cubatlas

#endif
