#include "amc/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ on glibc

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace amc {

void retain_freed_memory() {
#if defined(__GLIBC__)
  // The mmap threshold is capped at 32 MiB, below the largest activations, so
  // turn mmap allocation off entirely and never trim the heap top.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
}

}  // namespace amc
