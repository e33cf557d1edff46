#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "blas_guard.hpp"

int main(int argc, char** argv) {
  testing_support::avoid_faulty_blas_kernels(argv);
  doctest::Context context(argc, argv);
  return context.run();
}
