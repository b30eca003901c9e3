// Matrix-free stiffness operator of a voxel grid on the periodic node torus.
//
// Node (i,j,k) sits at corner (i,j,k)/n and carries 3 dofs (node-major).
// Element (i,j,k) is voxel (i,j,k); its corner l = ax + 2*ay + 4*az is node
// (i+ax, j+ay, k+az) mod n.

#ifndef CUBATLAS_FEM_OPERATOR_HPP_
#define CUBATLAS_FEM_OPERATOR_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "element.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "voxel_grid.hpp"

namespace cubatlas {

struct Material {
  double E_s = 205000.0;  // MPa
  double nu_s = 0.29;
  double void_contrast = 1e-9;

  void check() const {
    if (!(E_s > 0))
      throw DomainError("material: E_s must be positive");
    check_poisson(nu_s);
    if (!(void_contrast > 0 && void_contrast < 1e-3))
      throw DomainError("material: void_contrast must be small and positive");
  }

  double shear_modulus() const { return E_s / (2 * (1 + nu_s)); }
  double bulk_modulus() const { return E_s / (3 * (1 - 2 * nu_s)); }
};

namespace impl {

class TorusGrid {
public:
  explicit TorusGrid(int n) : n_(n) {}

  int n() const { return n_; }
  std::size_t nodes() const { return static_cast<std::size_t>(n_) * n_ * n_; }
  std::size_t dofs() const { return 3 * nodes(); }

  std::size_t element_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n_) * (static_cast<std::size_t>(j) +
                                           static_cast<std::size_t>(n_) * k);
  }

  std::array<std::size_t, 8> element_nodes(int i, int j, int k) const {
    const int i1 = (i + 1) % n_, j1 = (j + 1) % n_, k1 = (k + 1) % n_;
    return {element_index(i, j, k),  element_index(i1, j, k),  element_index(i, j1, k),
            element_index(i1, j1, k), element_index(i, j, k1), element_index(i1, j, k1),
            element_index(i, j1, k1), element_index(i1, j1, k1)};
  }

  // y = sum_e scale(e) P_e^T K P_e u. Elements are visited in 8 parity
  // colours; within a colour no two elements share a node, so every node
  // accumulates in the same order for any thread count. Each row of a
  // colour is one small matrix product.
  template <class ScaleFn>
  void colored_apply(const std::vector<double>& u, std::vector<double>& y, int threads,
                     const Eigen::Matrix<double, 24, 24>& K, ScaleFn&& scale) const {
    y.assign(dofs(), 0.0);
    const int row = (n_ + 1) / 2;
    for (int color = 0; color != 8; ++color) {
      const int ci = color & 1, cj = (color >> 1) & 1, ck = (color >> 2) & 1;
      const int planes = (n_ - ck + 1) / 2;
      // with odd n the last plane of a colour touches the first one
      const int workers = n_ % 2 ? 1 : threads;
      parallel_for(static_cast<std::size_t>(planes), workers, [&](std::size_t b, std::size_t e) {
        Eigen::Matrix<double, 24, Eigen::Dynamic> U(24, row), Y(24, row);
        std::vector<std::array<std::size_t, 8>> nodes(static_cast<std::size_t>(row));
        for (std::size_t p = b; p != e; ++p) {
          const int k = ck + 2 * static_cast<int>(p);
          for (int j = cj; j < n_; j += 2) {
            int m = 0;
            for (int i = ci; i < n_; i += 2, ++m) {
              auto& nd = nodes[static_cast<std::size_t>(m)];
              nd = element_nodes(i, j, k);
              for (int l = 0; l != 8; ++l)
                for (int c = 0; c != 3; ++c)
                  U(3 * l + c, m) = u[3 * nd[l] + c];
            }
            Y.leftCols(m).noalias() = K * U.leftCols(m);
            m = 0;
            for (int i = ci; i < n_; i += 2, ++m) {
              const auto& nd = nodes[static_cast<std::size_t>(m)];
              const double s = scale(element_index(i, j, k));
              for (int l = 0; l != 8; ++l)
                for (int c = 0; c != 3; ++c)
                  y[3 * nd[l] + c] += s * Y(3 * l + c, m);
            }
          }
        }
      });
    }
  }

private:
  int n_;
};

} // namespace impl

// Matrix-free stiffness operator of a voxel grid on the periodic node torus.
class VoxelOperator {
public:
  VoxelOperator(const VoxelGrid& grid, const Material& mat, int threads = 1)
      : n_(grid.n()), grid_(grid.n()), threads_(std::max(1, threads)), material_(mat) {
    mat.check();
    ke_ = element_stiffness(1.0, mat.nu_s, 1.0 / n_);
    for (int a = 0; a != 24; ++a)
      for (int b = 0; b != 24; ++b)
        kmat_(a, b) = ke_[a][b];
    scale_.resize(grid.size());
    for (std::size_t e = 0; e != grid.size(); ++e)
      scale_[e] = grid[e] ? mat.E_s : mat.E_s * mat.void_contrast;
  }

  int n() const { return n_; }
  std::size_t nodes() const { return scale_.size(); }
  std::size_t dofs() const { return 3 * scale_.size(); }
  const ElementMatrix& unit_element() const { return ke_; }  // for E = 1
  double element_scale(std::size_t e) const { return scale_[e]; }
  bool solid(std::size_t e) const { return scale_[e] == material_.E_s; }
  const Material& material() const { return material_; }

  std::array<std::size_t, 8> element_nodes(int i, int j, int k) const {
    return grid_.element_nodes(i, j, k);
  }
  std::size_t element_index(int i, int j, int k) const { return grid_.element_index(i, j, k); }

  // y = K u
  void apply(const std::vector<double>& u, std::vector<double>& y) const {
    grid_.colored_apply(u, y, threads_, kmat_, [this](std::size_t e) { return scale_[e]; });
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(dofs(), 0.0);
    for (int k = 0; k != n_; ++k)
      for (int j = 0; j != n_; ++j)
        for (int i = 0; i != n_; ++i) {
          const auto nodes = element_nodes(i, j, k);
          const double s = scale_[element_index(i, j, k)];
          for (int l = 0; l != 8; ++l)
            for (int c = 0; c != 3; ++c)
              d[3 * nodes[l] + c] += s * ke_[3 * l + c][3 * l + c];
        }
    return d;
  }

  // Right-hand side -sum_e P_e^T k_e u_affine(eps).
  std::vector<double> rhs(const Voigt& eps, double* magnitude = nullptr) const {
    const ElementVector f0 = multiply(ke_, affine_displacement(eps, 1.0 / n_));
    std::vector<double> b(dofs(), 0.0);
    double mag = 0;
    for (int k = 0; k != n_; ++k)
      for (int j = 0; j != n_; ++j)
        for (int i = 0; i != n_; ++i) {
          const auto nodes = element_nodes(i, j, k);
          const double s = scale_[element_index(i, j, k)];
          for (int l = 0; l != 8; ++l)
            for (int c = 0; c != 3; ++c) {
              b[3 * nodes[l] + c] -= s * f0[3 * l + c];
              mag += s * s * f0[3 * l + c] * f0[3 * l + c];
            }
        }
    if (magnitude)
      *magnitude = std::sqrt(mag);
    return b;
  }

  // Mutual energy sum_e (ua + ut_e)^T k_e (wa + wt_e) over the unit cell
  // (|V| = 1). With a == b this is twice the strain energy density.
  double bilinear(const Voigt& eps_a, const std::vector<double>& fluct_a,
                  const Voigt& eps_b, const std::vector<double>& fluct_b) const {
    const double h = 1.0 / n_;
    const ElementVector ua0 = affine_displacement(eps_a, h);
    const ElementVector ub0 = affine_displacement(eps_b, h);
    double total = 0;
    for (int k = 0; k != n_; ++k) {
      double plane = 0;
      for (int j = 0; j != n_; ++j)
        for (int i = 0; i != n_; ++i) {
          const auto nodes = element_nodes(i, j, k);
          ElementVector ua = ua0, ub = ub0;
          for (int l = 0; l != 8; ++l)
            for (int c = 0; c != 3; ++c) {
              if (!fluct_a.empty())
                ua[3 * l + c] += fluct_a[3 * nodes[l] + c];
              if (!fluct_b.empty())
                ub[3 * l + c] += fluct_b[3 * nodes[l] + c];
            }
          plane += scale_[element_index(i, j, k)] * dot(ua, multiply(ke_, ub));
        }
      total += plane;
    }
    return total;
  }

  double energy(const Voigt& eps, const std::vector<double>& fluct) const {
    return 0.5 * bilinear(eps, fluct, eps, fluct);
  }

private:
  int n_;
  impl::TorusGrid grid_;
  int threads_;
  Material material_;
  ElementMatrix ke_;
  Eigen::Matrix<double, 24, 24> kmat_;
  std::vector<double> scale_;
};

} // namespace cubatlas

#endif
