// Scalar descriptors of cubic elastic constants, Hashin-Shtrikman upper
// bounds and the extreme-family classification.

#ifndef CUBATLAS_ELASTICA_HPP_
#define CUBATLAS_ELASTICA_HPP_

#include <algorithm>
#include <array>
#include <cmath>

#include "element.hpp"
#include "errors.hpp"
#include "fem_operator.hpp"

namespace cubatlas {

struct CubicElastic {
  double C11 = 0, C12 = 0, C44 = 0;  // MPa

  // The three Voigt eigenvalue families.
  double bulk_eig() const { return C11 + 2 * C12; }
  double tetragonal_eig() const { return C11 - C12; }
  double shear_eig() const { return C44; }

  // Families below 1e-9 * C11 count as zero.
  double stability_floor() const { return 1e-9 * std::abs(C11); }
  bool stable() const {
    const double f = stability_floor();
    return shear_eig() > f && tetragonal_eig() > f && bulk_eig() > f;
  }

  Matrix6 voigt() const {
    Matrix6 C{};
    for (int i = 0; i != 3; ++i) {
      for (int j = 0; j != 3; ++j)
        C[i][j] = C12;
      C[i][i] = C11;
      C[i + 3][i + 3] = C44;
    }
    return C;
  }

  CubicElastic scaled(double s) const { return {s * C11, s * C12, s * C44}; }
};

inline CubicElastic isotropic_cubic(double E, double nu) {
  const Matrix6 D = isotropic_stiffness(E, nu);
  return {D[0][0], D[0][1], D[3][3]};
}

struct CubicCompliance {
  double S11 = 0, S12 = 0, S44 = 0;  // 1/MPa
};

inline CubicCompliance compliance(const CubicElastic& C) {
  const double a = C.tetragonal_eig(), b = C.bulk_eig();
  if (a == 0 || b == 0 || C.C44 == 0)
    throw DegenerateError("singular cubic stiffness");
  const double d = a * b;
  return {(C.C11 + C.C12) / d, -C.C12 / d, 1.0 / C.C44};
}

// The same closed form, since S has the cubic pattern too.
inline CubicElastic stiffness(const CubicCompliance& S) {
  const double a = S.S11 - S.S12, b = S.S11 + 2 * S.S12;
  if (a == 0 || b == 0 || S.S44 == 0)
    throw DegenerateError("singular cubic compliance");
  const double d = a * b;
  return {(S.S11 + S.S12) / d, -S.S12 / d, 1.0 / S.S44};
}

// Young's modulus along d (normalized internally).
inline double directional_E(const CubicElastic& C, std::array<double, 3> d) {
  const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  if (!(len > 0) || !std::isfinite(len))
    throw DomainError("direction must be a non-zero finite vector");
  for (double& x : d)
    x /= len;
  const CubicCompliance S = compliance(C);
  const double J = d[0] * d[0] * d[1] * d[1] + d[1] * d[1] * d[2] * d[2] +
                   d[2] * d[2] * d[0] * d[0];
  return 1.0 / (S.S11 - 2 * (S.S11 - S.S12 - S.S44 / 2) * J);
}

struct BoundValues {
  double K = 0, G = 0, E = 0;  // MPa
};

// Two-phase solid/void upper bounds at volume fraction rho.
inline BoundValues hs_upper(const Material& mat, double rho) {
  mat.check();
  if (!(rho > 0 && rho <= 1))
    throw DomainError("relative density must lie in (0, 1]");
  const double Ks = mat.bulk_modulus(), Gs = mat.shear_modulus();
  BoundValues b;
  b.K = 4 * rho * Ks * Gs / (4 * Gs + 3 * (1 - rho) * Ks);
  b.G = Gs + (1 - rho) / (-1 / Gs + 6 * rho * (Ks + 2 * Gs) / (5 * Gs * (3 * Ks + 4 * Gs)));
  b.E = 9 * b.K * b.G / (3 * b.K + b.G);
  return b;
}

struct ClassFlags {
  bool isotropic = false;
  bool auxetic = false;
  bool optimal = false;
  bool highly_anisotropic = false;
  bool pentamode = false;

  bool operator==(const ClassFlags&) const = default;
};

struct PropertyRecord {
  double rho = 0;
  double E100 = 0, E111 = 0, Emax = 0, Emin = 0, Emean = 0, dE = 0, Omega = 0;
  double K = 0, G_c44 = 0, G_prime = 0, G_hill = 0;
  double nu100 = 0, Z = 0;
  std::array<double, 6> eigs{};  // ascending
  double E_norm = 0, G_norm = 0, K_norm = 0;
  double K_HSU = 0, G_HSU = 0, E_HSU = 0;
  // cosine between the top Voigt eigenvector and (1,1,1,0,0,0)/sqrt(3)
  double dominant_hydrostatic_cos = 0;
  bool degenerate = false;
  ClassFlags flags;
};

struct Thresholds {
  double isotropic_omega = 0.05;   // Omega <= this
  double auxetic_nu = 0.0;         // nu <= this
  double optimal_fraction = 0.9;   // Emean / E_HSU >= this
  double anisotropic_z_high = 20;  // Z >= this
  double anisotropic_z_low = 0.05; // or Z <= this
  double pentamode_ratio = 100;    // top eigenvalue / second >= this
  double pentamode_cos = 0.999;

  void check() const {
    if (!(isotropic_omega >= 0) || !(optimal_fraction > 0) || !(anisotropic_z_low >= 0) ||
        !(anisotropic_z_high > anisotropic_z_low) || !(pentamode_ratio > 1) ||
        !(pentamode_cos > 0 && pentamode_cos <= 1) || !std::isfinite(auxetic_nu))
      throw ConfigError("invalid classification thresholds");
  }
};

inline ClassFlags classify(const PropertyRecord& r, const Thresholds& t = {}) {
  ClassFlags f;
  if (r.degenerate) {
    // only the eigenvalue-based test is meaningful near the stability boundary
    const double second = r.eigs[4];
    f.pentamode = r.eigs[5] > 0 && (second <= 0 || r.eigs[5] >= t.pentamode_ratio * second) &&
                  r.dominant_hydrostatic_cos >= t.pentamode_cos;
    return f;
  }
  f.isotropic = r.Omega <= t.isotropic_omega;
  f.auxetic = r.nu100 <= t.auxetic_nu;
  f.optimal = r.E_HSU > 0 && r.Emean / r.E_HSU >= t.optimal_fraction;
  f.highly_anisotropic = r.Z >= t.anisotropic_z_high || r.Z <= t.anisotropic_z_low;
  f.pentamode = r.eigs[5] >= t.pentamode_ratio * r.eigs[4] &&
                r.dominant_hydrostatic_cos >= t.pentamode_cos;
  return f;
}

inline double hill_shear(const CubicElastic& C) {
  const double a = C.tetragonal_eig();
  const double Gv = (a + 3 * C.C44) / 5;
  const double Gr = 5 * a * C.C44 / (4 * C.C44 + 3 * a);
  return (Gv + Gr) / 2;
}

// K over the Hill shear modulus.
inline double bulk_shear_ratio(const CubicElastic& C) {
  return C.bulk_eig() / 3 / hill_shear(C);
}

inline PropertyRecord summarize(const CubicElastic& C, double rho, const Material& mat,
                                const Thresholds& t = {}) {
  if (!(rho > 0 && rho <= 1))
    throw DomainError("relative density must lie in (0, 1] for normalization");
  PropertyRecord r;
  r.rho = rho;
  r.degenerate = !C.stable();

  r.eigs = {C.bulk_eig(), C.tetragonal_eig(), C.tetragonal_eig(),
            C.C44,        C.C44,            C.C44};
  std::sort(r.eigs.begin(), r.eigs.end());
  // the bulk family owns the hydrostatic eigenvector; the other two are
  // orthogonal to it
  const double top = r.eigs[5];
  r.dominant_hydrostatic_cos =
      (C.bulk_eig() == top && C.tetragonal_eig() < top && C.C44 < top) ? 1.0 : 0.0;

  r.K = C.bulk_eig() / 3;
  r.G_c44 = C.C44;
  r.G_prime = C.tetragonal_eig() / 2;
  r.nu100 = C.C12 / (C.C11 + C.C12);
  r.Z = C.tetragonal_eig() != 0 ? 2 * C.C44 / C.tetragonal_eig() : HUGE_VAL;

  const BoundValues hs = hs_upper(mat, rho);
  r.K_HSU = hs.K;
  r.G_HSU = hs.G;
  r.E_HSU = hs.E;
  r.K_norm = r.K / (mat.bulk_modulus() * rho);

  if (!r.degenerate) {
    const CubicCompliance S = compliance(C);
    r.E100 = 1 / S.S11;
    r.E111 = 3 / (S.S11 + 2 * S.S12 + S.S44);
    r.Emax = std::max(r.E100, r.E111);
    r.Emin = std::min(r.E100, r.E111);
    r.Emean = (r.Emax + r.Emin) / 2;
    r.dE = (r.Emax - r.Emin) / 2;
    r.Omega = r.dE / r.Emean;
    r.G_hill = hill_shear(C);
    r.E_norm = r.E100 / (mat.E_s * rho);
    r.G_norm = r.G_hill / (mat.shear_modulus() * rho);
  }
  r.flags = classify(r, t);
  return r;
}

} // namespace cubatlas

#endif
