#pragma once

// OpenBLAS 0.3.20 selects a Cooperlake dgemm kernel on some AVX-512 hosts
// that returns wrong products for moderately sized matrices. The core type
// is fixed when the library loads, so the process re-executes itself with
// the SkylakeX kernels, which are correct on the same hardware.

#include <cblas.h>
#include <unistd.h>

#include <cstdlib>
#include <strings.h>
#include <iostream>

namespace testing_support {

inline void avoid_faulty_blas_kernels(char** argv) {
  const char* core = openblas_get_corename();
  if (!core || strcasecmp(core, "cooperlake") != 0 || std::getenv("OPENBLAS_CORETYPE")) return;
  setenv("OPENBLAS_CORETYPE", "SkylakeX", 1);
  execv("/proc/self/exe", argv);
  std::cerr << "warning: could not re-execute with OPENBLAS_CORETYPE=SkylakeX\n";
}

}  // namespace testing_support
