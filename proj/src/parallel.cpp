#include "pcflow/parallel.hpp"

#include <omp.h>

#include <atomic>

namespace pcflow {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
  const int cap = g_max_threads.load();
  const int hw = omp_get_max_threads();
  if (cap <= 0) return hw;
  return cap < hw ? cap : hw;
}

}  // namespace pcflow
