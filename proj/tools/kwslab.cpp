#include <malloc.h>

#include <iostream>

#include "kwslab/cli.hpp"

int main(int argc, char** argv) {
  // Per-window tapes allocate and release the same large buffers constantly;
  // keep them in the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return kws::run_cli(argc, argv, std::cout, std::cerr);
}
