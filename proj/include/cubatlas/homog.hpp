// Periodic homogenization on voxel grids.
//
// Every voxel is one trilinear hexahedron. The displacement is split as
// u = eps_bar * x + u_tilde with u_tilde periodic on the n^3 node torus
// (node (i,j,k) at corner (i,j,k)/n, 3 dofs per node). Void voxels are a
// soft phase with stiffness void_contrast * E_s, so the operator has the
// same stencil everywhere and is applied matrix-free. The fluctuation
// solves K u_tilde = -f(eps_bar) by preconditioned conjugate gradients; the
// rigid translations are removed by keeping every search direction at zero
// mean.
//
// Preconditioners: Jacobi, or a sparse Cholesky factor of the block of
// nodes touched by solid voxels (CHOLMOD) with Jacobi on the void-only
// nodes. Auto starts with Jacobi on dense grids (where it is cheap and
// converges) and switches to the factor when Jacobi runs out of iterations.
// At n = 32 Jacobi often needs 300-800 iterations (more than the 10 n
// default) while the factor's setup grows from 1 s at 12% solid to over
// 10 s at 30%; the crossover sits near 16% solid, and Auto's Jacobi stage
// gets a larger budget of its own.

#ifndef CUBATLAS_HOMOG_HPP_
#define CUBATLAS_HOMOG_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>

#include "connectivity.hpp"
#include "element.hpp"
#include "fem_operator.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "voxel_grid.hpp"

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace cubatlas {

struct LoadCase {
  Voigt macro_strain{};  // (e11, e22, e33, g23, g13, g12)

  static LoadCase uniaxial(double e0 = 1.0) { return {{e0, 0, 0, 0, 0, 0}}; }
  static LoadCase shear(double g0 = 1.0) { return {{0, 0, 0, 0, 0, g0}}; }
  static LoadCase hydrostatic(double e0 = 1.0) { return {{e0, e0, e0, 0, 0, 0}}; }
  static LoadCase unit(int i) {
    LoadCase c;
    c.macro_strain[static_cast<std::size_t>(i)] = 1.0;
    return c;
  }
};

enum class Preconditioner { Jacobi, SolidCholesky, Auto };

inline const char* to_string(Preconditioner p) {
  switch (p) {
  case Preconditioner::Jacobi:
    return "jacobi";
  case Preconditioner::SolidCholesky:
    return "cholesky";
  case Preconditioner::Auto:
    return "auto";
  }
  return "?";
}

inline Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "jacobi")
    return Preconditioner::Jacobi;
  if (s == "cholesky")
    return Preconditioner::SolidCholesky;
  if (s == "auto")
    return Preconditioner::Auto;
  throw ConfigError("unknown preconditioner '" + s + "' (jacobi, cholesky, auto)");
}

struct SolverOptions {
  double tol = 1e-6;  // relative residual, both preconditioned and plain
  int max_iter = 0;   // 0 -> 10 * n
  int threads = 1;
  Preconditioner preconditioner = Preconditioner::Auto;
  double jacobi_density = 0.16;  // Auto: try Jacobi first at or above this solid fraction
  int jacobi_max_iter = 0;       // Auto's Jacobi stage; 0 -> max(40 n, max_iter)
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct CaseSolution {
  std::vector<double> fluctuation;  // 3 * n^3, node-major
  double energy = 0.0;              // strain energy density, MPa
  int iterations = 0;
  double residual = 0.0;            // final relative residual (larger of the two norms)
  std::vector<double> residual_history;
  Preconditioner preconditioner = Preconditioner::Jacobi;  // the one actually used
};

struct HomogResult {
  double U_a = 0, U_s = 0, U_d = 0;    // MPa, unit uniaxial/shear/hydrostatic
  double C11 = 0, C12 = 0, C44 = 0;    // MPa
  std::array<int, 3> iterations{};
  std::array<double, 3> residuals{};
  Preconditioner preconditioner = Preconditioner::Jacobi;
  std::vector<std::string> warnings;
};

namespace impl {

// Fixed-order blocked reduction: the result does not depend on threads.
inline double blocked_dot(const std::vector<double>& a, const std::vector<double>& b,
                          int threads) {
  constexpr std::size_t block = 4096;
  const std::size_t nb = (a.size() + block - 1) / block;
  std::vector<double> partial(nb, 0.0);
  parallel_for(nb, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q != hi; ++q) {
      double s = 0;
      const std::size_t end = std::min(a.size(), (q + 1) * block);
      for (std::size_t i = q * block; i != end; ++i)
        s += a[i] * b[i];
      partial[q] = s;
    }
  });
  double s = 0;
  for (double p : partial)
    s += p;
  return s;
}

inline void remove_mean(std::vector<double>& v) {
  const std::size_t nodes = v.size() / 3;
  for (int c = 0; c != 3; ++c) {
    double s = 0;
    for (std::size_t i = 0; i != nodes; ++i)
      s += v[3 * i + c];
    const double m = s / static_cast<double>(nodes);
    for (std::size_t i = 0; i != nodes; ++i)
      v[3 * i + c] -= m;
  }
}



using SparseMatrix = Eigen::SparseMatrix<double>;
using Cholmod = Eigen::CholmodDecomposition<SparseMatrix, Eigen::Lower>;

inline void quiet(Cholmod& f) {
  f.cholmod().print = 0;
  f.cholmod().error_handler = nullptr;
}

// The default analysis may try METIS, whose random state is global: two
// orderings computed at once perturb each other and the factor is no longer
// reproducible. Pinning AMD instead costs about 60% more factor time here.
inline void analyze(Cholmod& f, const SparseMatrix& a) {
  static std::mutex m;
  const std::lock_guard<std::mutex> lock(m);
  f.analyzePattern(a);
}

// Some optimized BLAS builds return garbage in the dense kernels of the
// supernodal factorization; probe once with a small dense SPD matrix. A
// threaded OpenBLAS is also pinned to one thread here: callers parallelize
// over structures, and a fixed thread count keeps results reproducible.
inline bool supernodal_usable() {
  static const bool ok = [] {
    if (openblas_set_num_threads)
      openblas_set_num_threads(1);
    constexpr int m = 128;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i != m; ++i)
      for (int j = 0; j <= i; ++j)
        t.emplace_back(i, j, i == j ? m + 1.0 : 1.0 / (1 + i + j));
    SparseMatrix A(m, m);
    A.setFromTriplets(t.begin(), t.end());
    Cholmod f;
    quiet(f);
    f.setMode(Eigen::CholmodSupernodalLLt);
    analyze(f, A);
    f.factorize(A);
    if (f.info() != Eigen::Success)
      return false;
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(m);
    const Eigen::VectorXd x = f.solve(b);
    const SparseMatrix full = A.selfadjointView<Eigen::Lower>();
    return x.allFinite() && (full * x - b).norm() <= 1e-10 * b.norm();
  }();
  return ok;
}

// Exact factor of the stiffness restricted to nodes of solid voxels. One
// node per solid component gets its diagonal doubled, which removes the
// rigid translations of that component.
class SolidBlockFactor {
public:
  explicit SolidBlockFactor(const VoxelOperator& op) {
    const int n = op.n();
    const std::size_t nodes = op.nodes();
    index_.assign(nodes, -1);
    std::vector<std::size_t> parent(nodes);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (parent[v] != v)
        v = parent[v] = parent[parent[v]];
      return v;
    };
    std::vector<char> active(nodes, 0);
    for (int k = 0; k != n; ++k)
      for (int j = 0; j != n; ++j)
        for (int i = 0; i != n; ++i) {
          if (!op.solid(op.element_index(i, j, k)))
            continue;
          const auto nd = op.element_nodes(i, j, k);
          for (std::size_t v : nd)
            active[v] = 1;
          for (int l = 1; l != 8; ++l)
            parent[find(nd[static_cast<std::size_t>(l)])] = find(nd[0]);
        }
    for (std::size_t v = 0; v != nodes; ++v)
      if (active[v])
        index_[v] = static_cast<std::ptrdiff_t>(count_++);
    if (count_ == 0)
      throw DegenerateError("no solid voxels to factor");

    const ElementMatrix& ke = op.unit_element();
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k != n; ++k)
      for (int j = 0; j != n; ++j)
        for (int i = 0; i != n; ++i) {
          const auto nd = op.element_nodes(i, j, k);
          bool any = false;
          for (std::size_t v : nd)
            any = any || active[v];
          if (!any)
            continue;
          const double s = op.element_scale(op.element_index(i, j, k));
          for (int a = 0; a != 24; ++a) {
            const std::ptrdiff_t ra = index_[nd[static_cast<std::size_t>(a / 3)]];
            if (ra < 0)
              continue;
            for (int b = 0; b != 24; ++b) {
              const std::ptrdiff_t cb = index_[nd[static_cast<std::size_t>(b / 3)]];
              if (cb < 0)
                continue;
              const std::ptrdiff_t r = 3 * ra + a % 3, c = 3 * cb + b % 3;
              if (r >= c)
                t.emplace_back(static_cast<int>(r), static_cast<int>(c), s * ke[a][b]);
            }
          }
        }
    const auto dim = static_cast<Eigen::Index>(3 * count_);
    matrix_.resize(dim, dim);
    matrix_.setFromTriplets(t.begin(), t.end());
    t.clear();
    t.shrink_to_fit();
    std::vector<char> pinned(nodes, 0);
    for (std::size_t v = 0; v != nodes; ++v) {
      if (!active[v] || pinned[find(v)])
        continue;
      pinned[find(v)] = 1;
      for (int c = 0; c != 3; ++c) {
        const auto d = static_cast<Eigen::Index>(3 * index_[v] + c);
        matrix_.coeffRef(d, d) *= 2;
      }
    }
    matrix_.makeCompressed();

    quiet(factor_);
    supernodal_ = supernodal_usable();
    factor_.setMode(supernodal_ ? Eigen::CholmodSupernodalLLt : Eigen::CholmodSimplicialLLt);
    analyze(factor_, matrix_);
    if (factor_.info() != Eigen::Success)
      throw SolverError("sparse Cholesky analysis failed", {});
  }

  bool supernodal() const { return supernodal_; }

  void factorize() {
    factor_.factorize(matrix_);
    if (factor_.info() != Eigen::Success)
      throw SolverError("sparse Cholesky factorization failed", {});
    matrix_ = SparseMatrix();
  }

  // z = M^{-1} r with Jacobi on the nodes outside the block.
  void apply(const std::vector<double>& r, const std::vector<double>& dinv,
             std::vector<double>& z) const {
    z.resize(r.size());
    Eigen::VectorXd ra(static_cast<Eigen::Index>(3 * count_));
    for (std::size_t v = 0; v != index_.size(); ++v) {
      const std::ptrdiff_t a = index_[v];
      for (std::size_t c = 0; c != 3; ++c) {
        if (a < 0)
          z[3 * v + c] = dinv[3 * v + c] * r[3 * v + c];
        else
          ra[3 * a + static_cast<std::ptrdiff_t>(c)] = r[3 * v + c];
      }
    }
    const Eigen::VectorXd za = factor_.solve(ra);
    for (std::size_t v = 0; v != index_.size(); ++v) {
      const std::ptrdiff_t a = index_[v];
      if (a >= 0)
        for (std::size_t c = 0; c != 3; ++c)
          z[3 * v + c] = za[3 * a + static_cast<std::ptrdiff_t>(c)];
    }
  }

private:
  std::vector<std::ptrdiff_t> index_;  // node -> block node, -1 outside
  std::size_t count_ = 0;
  SparseMatrix matrix_;
  Cholmod factor_;
  bool supernodal_ = true;
};

} // namespace impl

// Preconditioned CG for one operator; the preconditioner is built once and
// reused over load cases.
class CaseSolver {
public:
  CaseSolver(const VoxelOperator& op, const SolverOptions& opt)
      : op_(op), opt_(opt), threads_(std::max(1, opt.threads)) {
    if (!(opt.tol > 0) || opt.max_iter < 0 || opt.jacobi_max_iter < 0)
      throw ConfigError("solver options: need tol > 0 and max_iter, jacobi_max_iter >= 0");
    dinv_ = op.diagonal();
    for (double& d : dinv_)
      d = 1.0 / d;
    if (opt.preconditioner == Preconditioner::Jacobi)
      return;
    std::size_t solid = 0;
    for (std::size_t e = 0; e != op.nodes(); ++e)  // one element per node
      solid += op.solid(e);
    if (solid == 0)
      return;
    if (opt.preconditioner == Preconditioner::Auto &&
        static_cast<double>(solid) >= opt.jacobi_density * static_cast<double>(op.nodes())) {
      fallback_ = true;
      return;
    }
    build_factor();
  }

  Preconditioner active() const {
    return factor_ ? Preconditioner::SolidCholesky : Preconditioner::Jacobi;
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Auto retries with the factor when Jacobi does not converge.
  CaseSolution solve(const LoadCase& load) {
    try {
      return run(load);
    } catch (const SolverError&) {
      if (!fallback_ || factor_)
        throw;
      warnings_.push_back("Jacobi did not converge; retried with the Cholesky preconditioner");
      build_factor();
      return run(load);
    }
  }

private:
  void build_factor() {
    auto f = std::make_unique<impl::SolidBlockFactor>(op_);
    if (!f->supernodal())
      warnings_.push_back("supernodal Cholesky unusable with this BLAS; using the simplicial one");
    f->factorize();
    factor_ = std::move(f);
  }

  CaseSolution run(const LoadCase& load) const {
    for (double e : load.macro_strain)
      if (!std::isfinite(e))
        throw DomainError("load case has non-finite strain");
    int max_iter = opt_.max_iter > 0 ? opt_.max_iter : 10 * op_.n();
    if (fallback_ && !factor_)
      max_iter = opt_.jacobi_max_iter > 0 ? opt_.jacobi_max_iter : std::max(40 * op_.n(), max_iter);

    CaseSolution sol;
    sol.preconditioner = active();
    sol.fluctuation.assign(op_.dofs(), 0.0);
    double bmag = 0;
    std::vector<double> r = op_.rhs(load.macro_strain, &bmag);
    impl::remove_mean(r);
    const double rnorm = std::sqrt(impl::blocked_dot(r, r, threads_));
    // homogeneous media give b = 0 up to cancellation error
    if (rnorm <= 1e-13 * bmag || bmag == 0) {
      sol.energy = op_.energy(load.macro_strain, sol.fluctuation);
      return sol;
    }

    std::vector<double> z, p, q;
    precondition(r, z);
    p = z;
    double rz = impl::blocked_dot(r, z, threads_);
    const double rz0 = rz;
    const double rr0 = rnorm * rnorm;
    std::vector<double>& x = sol.fluctuation;
    sol.residual = 1.0;
    sol.residual_history.push_back(1.0);

    for (int it = 1; it <= max_iter; ++it) {
      op_.apply(p, q);
      const double pq = impl::blocked_dot(p, q, threads_);
      if (!std::isfinite(pq) || pq <= 0)
        throw SolverError(std::isfinite(pq) ? "conjugate gradients broke down (p.Kp <= 0)"
                                            : "NaN in conjugate gradients",
                          sol.residual_history);
      const double alpha = rz / pq;
      for (std::size_t i = 0; i != x.size(); ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      precondition(r, z);
      const double rz_new = impl::blocked_dot(r, z, threads_);
      if (!std::isfinite(rz_new))
        throw SolverError("NaN in conjugate gradients", sol.residual_history);
      sol.iterations = it;
      // the preconditioned norm alone can collapse once the soft void
      // modes are resolved, so the plain residual must also be small
      const double rr = impl::blocked_dot(r, r, threads_);
      sol.residual = std::sqrt(std::max(std::max(rz_new, 0.0) / rz0, rr / rr0));
      sol.residual_history.push_back(sol.residual);
      if (sol.residual <= opt_.tol)
        break;
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i != p.size(); ++i)
        p[i] = z[i] + beta * p[i];
    }
    if (sol.residual > opt_.tol)
      throw SolverError("conjugate gradients did not converge in " + std::to_string(max_iter) +
                            " iterations (residual " + std::to_string(sol.residual) + ")",
                        sol.residual_history);
    impl::remove_mean(x);
    sol.energy = op_.energy(load.macro_strain, x);
    return sol;
  }

  void precondition(const std::vector<double>& r, std::vector<double>& z) const {
    if (factor_) {
      factor_->apply(r, dinv_, z);
    } else {
      z.resize(r.size());
      for (std::size_t i = 0; i != r.size(); ++i)
        z[i] = dinv_[i] * r[i];
    }
    impl::remove_mean(z);
  }

  const VoxelOperator& op_;
  SolverOptions opt_;
  int threads_;
  std::vector<double> dinv_;
  std::unique_ptr<impl::SolidBlockFactor> factor_;
  bool fallback_ = false;
  std::vector<std::string> warnings_;
};

inline CaseSolution solve_case(const VoxelOperator& op, const LoadCase& load,
                               const SolverOptions& opt = {}) {
  CaseSolver solver(op, opt);
  return solver.solve(load);
}

inline CaseSolution solve_case(const VoxelGrid& grid, const Material& mat, const LoadCase& load,
                               const SolverOptions& opt = {}) {
  return solve_case(VoxelOperator(grid, mat, opt.threads), load, opt);
}

// Three canonical loads with unit magnitude; for a cubic medium
//   U_a = C11/2, U_s = C44/2, U_d = (3 C11 + 6 C12)/2.
inline HomogResult homogenize(const VoxelGrid& grid, const Material& mat,
                              const SolverOptions& opt = {}) {
  HomogResult res;
  if (!periodic_components(grid).percolates_all())
    res.warnings.push_back("grid does not percolate in all three axes");
  const VoxelOperator op(grid, mat, opt.threads);
  CaseSolver solver(op, opt);
  const LoadCase cases[3] = {LoadCase::uniaxial(), LoadCase::shear(), LoadCase::hydrostatic()};
  double U[3];
  for (int c = 0; c != 3; ++c) {
    CaseSolution s = solver.solve(cases[c]);
    U[c] = s.energy;
    res.iterations[static_cast<std::size_t>(c)] = s.iterations;
    res.residuals[static_cast<std::size_t>(c)] = s.residual;
  }
  res.preconditioner = solver.active();
  res.warnings.insert(res.warnings.end(), solver.warnings().begin(), solver.warnings().end());
  res.U_a = U[0];
  res.U_s = U[1];
  res.U_d = U[2];
  const double e0 = 1.0, g0 = 1.0;
  res.C11 = 2 * res.U_a / (e0 * e0);
  res.C44 = 2 * res.U_s / (g0 * g0);
  res.C12 = (2 * res.U_d / (e0 * e0) - 3 * res.C11) / 6;
  return res;
}

// Full 6x6 effective stiffness from six unit strains, C_ij = a(u_i, u_j).
inline Matrix6 full_tensor(const VoxelGrid& grid, const Material& mat,
                           const SolverOptions& opt = {}) {
  const VoxelOperator op(grid, mat, opt.threads);
  CaseSolver solver(op, opt);
  std::array<CaseSolution, 6> sols;
  for (int i = 0; i != 6; ++i)
    sols[static_cast<std::size_t>(i)] = solver.solve(LoadCase::unit(i));
  Matrix6 C{};
  for (int i = 0; i != 6; ++i)
    for (int j = i; j != 6; ++j) {
      const auto& a = sols[static_cast<std::size_t>(i)];
      const auto& b = sols[static_cast<std::size_t>(j)];
      C[i][j] = C[j][i] = op.bilinear(LoadCase::unit(i).macro_strain, a.fluctuation,
                                      LoadCase::unit(j).macro_strain, b.fluctuation);
    }
  return C;
}

// Largest deviation of a 6x6 tensor from the cubic pattern: entries that
// must vanish, plus the spread within the C11, C12 and C44 triples.
inline double cubic_deviation(const Matrix6& C) {
  double dev = 0;
  for (int i = 0; i != 6; ++i)
    for (int j = 0; j != 6; ++j) {
      const bool normal = i < 3 && j < 3;
      const bool shear_diag = i >= 3 && i == j;
      if (!normal && !shear_diag)
        dev = std::max(dev, std::abs(C[i][j]));
    }
  auto spread = [](double a, double b, double c) {
    return std::max({a, b, c}) - std::min({a, b, c});
  };
  dev = std::max(dev, spread(C[0][0], C[1][1], C[2][2]));
  dev = std::max(dev, spread(C[0][1], C[0][2], C[1][2]));
  dev = std::max(dev, spread(C[3][3], C[4][4], C[5][5]));
  return dev;
}

} // namespace cubatlas

#endif
