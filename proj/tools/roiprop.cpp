#include "roiprop/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Full-HD frames are tens of MB each; keep them on the heap instead of
  // paying an mmap and fresh page faults per allocation.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return roiprop::run_cli(argc, argv);
}
