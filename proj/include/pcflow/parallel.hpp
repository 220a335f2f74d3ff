#pragma once

#include <cstdint>

namespace pcflow {

// Global worker cap, set once from the CLI --threads flag (0 = all cores).
// Every OpenMP kernel in the project reads this instead of the OMP default,
// and every kernel is written so its output is bit-identical for any thread
// count: parallel loops only ever compute independent output elements, and
// reductions are chunked with a fixed grain before a serial combine.
void set_max_threads(int n);
int max_threads();

namespace kernels {

// Deterministic chunking used by reductions: chunk boundaries depend only on
// n and grain, never on the number of threads.
inline int chunk_count(std::int64_t n, std::int64_t grain) {
  if (n <= 0) return 0;
  return int((n + grain - 1) / grain);
}

}  // namespace kernels

}  // namespace pcflow
