#include "svytrans/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svytrans {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace svytrans
