#include "flexcap/parallel.hpp"

#ifdef FLEXCAP_HAVE_OPENMP
#include <omp.h>
#endif

namespace flexcap {

namespace {
int g_default_threads = 0;
}

void set_max_threads(int n) {
#ifdef FLEXCAP_HAVE_OPENMP
    if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
    omp_set_num_threads(n > 0 ? n : g_default_threads);
#else
    (void)n;
    (void)g_default_threads;
#endif
}

int max_threads() {
#ifdef FLEXCAP_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool openmp_enabled() {
#ifdef FLEXCAP_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

}  // namespace flexcap
