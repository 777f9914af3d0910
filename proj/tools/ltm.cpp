#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "ltmcli/cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Activation buffers are freed and reallocated every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  return ltm::cli::run_cli(argc, argv, std::cout, std::cerr);
}
