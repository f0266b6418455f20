#include "ctgeo/parallel.hpp"

#include <omp.h>

#include "ctgeo/errors.hpp"

namespace ctgeo {

void set_num_threads(int n) {
    if (n < 1) {
        throw InvalidParameter("thread count must be >= 1");
    }
    omp_set_num_threads(n);
}

int num_threads() { return omp_get_max_threads(); }

} // namespace ctgeo
