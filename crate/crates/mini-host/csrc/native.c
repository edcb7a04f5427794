/* Host-native demo functions, written directly against the host API. */
#include "hostbridge.h"

/* sqrt(sum(x^2)) over a real vector; jumps if x is not real. */
MhCell hb_native_euclid_norm(MhCell x) {
    int64_t n = mh_length(x);
    const double *y = mh_raw_view(x, MH_REAL);
    double ss = 0.0;
    for (int64_t i = 0; i < n; i++)
        ss += y[i] * y[i];
    return mh_scalar_real(__builtin_sqrt(ss));
}

/* x^2 - 4, the objective used by the zero-finding example. */
MhCell hb_native_square_minus_4(MhCell x) {
    double v = mh_as_real(x);
    return mh_scalar_real(v * v - 4.0);
}
