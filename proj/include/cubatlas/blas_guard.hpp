// Process-level workaround for OpenBLAS builds whose auto-detected kernels
// break the supernodal Cholesky (seen with the Cooperlake kernels of
// OpenBLAS 0.3.20). OpenBLAS reads OPENBLAS_CORETYPE only at load time, so
// the fix is to restart the process with it set.

#ifndef CUBATLAS_BLAS_GUARD_HPP_
#define CUBATLAS_BLAS_GUARD_HPP_

#include <cstdlib>

#include <unistd.h>

#include "homog.hpp"

namespace cubatlas {

// Call first thing in main(). Returns only if no restart was needed or the
// restart failed; in the latter case the solver uses the simplicial factor.
inline void ensure_usable_blas(char** argv) {
  if (impl::supernodal_usable() || std::getenv("OPENBLAS_CORETYPE"))
    return;
  __builtin_cpu_init();
  setenv("OPENBLAS_CORETYPE", __builtin_cpu_supports("avx2") ? "Haswell" : "Prescott", 1);
  execv("/proc/self/exe", argv);
}

} // namespace cubatlas

#endif
