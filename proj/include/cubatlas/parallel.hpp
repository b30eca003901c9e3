#ifndef CUBATLAS_PARALLEL_HPP_
#define CUBATLAS_PARALLEL_HPP_

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace cubatlas {

// Thread count from CUBATLAS_THREADS, else the hardware concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("CUBATLAS_THREADS")) {
    int t = std::atoi(env);
    if (t > 0)
      return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(begin, end) over [0, count) split into contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    fn(std::size_t{0}, count);
    return;
  }
  auto nt = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(threads), count));
  std::vector<std::jthread> pool;
  pool.reserve(nt - 1);
  std::size_t chunk = (count + nt - 1) / nt;
  for (std::size_t t = 1; t < nt; ++t) {
    std::size_t b = t * chunk, e = std::min(count, b + chunk);
    if (b < e)
      pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(count, chunk));
}

} // namespace cubatlas

#endif
