#include "kamlab/util.hpp"

#include <algorithm>

namespace kamlab {

int& worker_count() {
  static int n = 1;
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int workers = std::max(1, worker_count());
  if (workers == 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace kamlab
