#include "mogen/kernels.hpp"

// AVX2+FMA backend. Compiled with -mavx2 -mfma on x86-64 only; the dispatch
// layer verifies CPU support before handing this table out.
#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>
#include <cmath>

#include "exp_poly.hpp"

namespace mogen::kern {
namespace {

using detail::kExpC1;
using detail::kExpC2;
using detail::kExpHi;
using detail::kExpLo;
using detail::kExpP0;
using detail::kExpP1;
using detail::kExpP2;
using detail::kExpQ0;
using detail::kExpQ1;
using detail::kExpQ2;
using detail::kExpQ3;
using detail::kGeluA;
using detail::kGeluC;
using detail::kLog2E;

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// ---------------------------------------------------------------------------
// matmul kernels: 4-row x 8-column register tile, k broadcast from A
// ---------------------------------------------------------------------------

template <bool Acc>
void matmul_nn_t(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + (i + 0) * k;
        const double* a1 = a + (i + 1) * k;
        const double* a2 = a + (i + 2) * k;
        const double* a3 = a + (i + 3) * k;
        size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d c00, c01, c10, c11, c20, c21, c30, c31;
            if constexpr (Acc) {
                c00 = _mm256_loadu_pd(c + (i + 0) * n + j);
                c01 = _mm256_loadu_pd(c + (i + 0) * n + j + 4);
                c10 = _mm256_loadu_pd(c + (i + 1) * n + j);
                c11 = _mm256_loadu_pd(c + (i + 1) * n + j + 4);
                c20 = _mm256_loadu_pd(c + (i + 2) * n + j);
                c21 = _mm256_loadu_pd(c + (i + 2) * n + j + 4);
                c30 = _mm256_loadu_pd(c + (i + 3) * n + j);
                c31 = _mm256_loadu_pd(c + (i + 3) * n + j + 4);
            } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
            }
            for (size_t p = 0; p < k; ++p) {
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d av = _mm256_set1_pd(a0[p]);
                c00 = _mm256_fmadd_pd(av, b0, c00);
                c01 = _mm256_fmadd_pd(av, b1, c01);
                av = _mm256_set1_pd(a1[p]);
                c10 = _mm256_fmadd_pd(av, b0, c10);
                c11 = _mm256_fmadd_pd(av, b1, c11);
                av = _mm256_set1_pd(a2[p]);
                c20 = _mm256_fmadd_pd(av, b0, c20);
                c21 = _mm256_fmadd_pd(av, b1, c21);
                av = _mm256_set1_pd(a3[p]);
                c30 = _mm256_fmadd_pd(av, b0, c30);
                c31 = _mm256_fmadd_pd(av, b1, c31);
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, c00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        for (; j < n; ++j) {
            for (size_t r = 0; r < 4; ++r) {
                const double* ar = a + (i + r) * k;
                double acc = Acc ? c[(i + r) * n + j] : 0.0;
                for (size_t p = 0; p < k; ++p) acc += ar[p] * b[p * n + j];
                c[(i + r) * n + j] = acc;
            }
        }
    }
    for (; i < m; ++i) {
        const double* ai = a + i * k;
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = Acc ? _mm256_loadu_pd(c + i * n + j) : _mm256_setzero_pd();
            for (size_t p = 0; p < k; ++p)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(ai[p]), _mm256_loadu_pd(b + p * n + j), acc);
            _mm256_storeu_pd(c + i * n + j, acc);
        }
        for (; j < n; ++j) {
            double acc = Acc ? c[i * n + j] : 0.0;
            for (size_t p = 0; p < k; ++p) acc += ai[p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <bool Acc>
void matmul_nt_t(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d s0 = _mm256_setzero_pd();
            __m256d s1 = _mm256_setzero_pd();
            __m256d s2 = _mm256_setzero_pd();
            __m256d s3 = _mm256_setzero_pd();
            const double* b0 = b + (j + 0) * k;
            const double* b1 = b + (j + 1) * k;
            const double* b2 = b + (j + 2) * k;
            const double* b3 = b + (j + 3) * k;
            size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const __m256d av = _mm256_loadu_pd(ai + p);
                s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
                s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
                s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
                s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
            }
            double d0 = hsum(s0), d1 = hsum(s1), d2 = hsum(s2), d3 = hsum(s3);
            for (; p < k; ++p) {
                d0 += ai[p] * b0[p];
                d1 += ai[p] * b1[p];
                d2 += ai[p] * b2[p];
                d3 += ai[p] * b3[p];
            }
            if constexpr (Acc) {
                ci[j + 0] += d0; ci[j + 1] += d1; ci[j + 2] += d2; ci[j + 3] += d3;
            } else {
                ci[j + 0] = d0; ci[j + 1] = d1; ci[j + 2] = d2; ci[j + 3] = d3;
            }
        }
        for (; j < n; ++j) {
            const double* bj = b + j * k;
            __m256d s = _mm256_setzero_pd();
            size_t p = 0;
            for (; p + 4 <= k; p += 4)
                s = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), s);
            double d = hsum(s);
            for (; p < k; ++p) d += ai[p] * bj[p];
            if constexpr (Acc) ci[j] += d; else ci[j] = d;
        }
    }
}

template <bool Acc>
void matmul_tn_t(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d c00, c01, c10, c11, c20, c21, c30, c31;
            if constexpr (Acc) {
                c00 = _mm256_loadu_pd(c + (i + 0) * n + j);
                c01 = _mm256_loadu_pd(c + (i + 0) * n + j + 4);
                c10 = _mm256_loadu_pd(c + (i + 1) * n + j);
                c11 = _mm256_loadu_pd(c + (i + 1) * n + j + 4);
                c20 = _mm256_loadu_pd(c + (i + 2) * n + j);
                c21 = _mm256_loadu_pd(c + (i + 2) * n + j + 4);
                c30 = _mm256_loadu_pd(c + (i + 3) * n + j);
                c31 = _mm256_loadu_pd(c + (i + 3) * n + j + 4);
            } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
            }
            for (size_t p = 0; p < k; ++p) {
                const double* ap = a + p * m + i;
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d av = _mm256_set1_pd(ap[0]);
                c00 = _mm256_fmadd_pd(av, b0, c00);
                c01 = _mm256_fmadd_pd(av, b1, c01);
                av = _mm256_set1_pd(ap[1]);
                c10 = _mm256_fmadd_pd(av, b0, c10);
                c11 = _mm256_fmadd_pd(av, b1, c11);
                av = _mm256_set1_pd(ap[2]);
                c20 = _mm256_fmadd_pd(av, b0, c20);
                c21 = _mm256_fmadd_pd(av, b1, c21);
                av = _mm256_set1_pd(ap[3]);
                c30 = _mm256_fmadd_pd(av, b0, c30);
                c31 = _mm256_fmadd_pd(av, b1, c31);
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, c00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        for (; j < n; ++j) {
            for (size_t r = 0; r < 4; ++r) {
                double acc = Acc ? c[(i + r) * n + j] : 0.0;
                for (size_t p = 0; p < k; ++p) acc += a[p * m + i + r] * b[p * n + j];
                c[(i + r) * n + j] = acc;
            }
        }
    }
    for (; i < m; ++i) {
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = Acc ? _mm256_loadu_pd(c + i * n + j) : _mm256_setzero_pd();
            for (size_t p = 0; p < k; ++p)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(a[p * m + i]), _mm256_loadu_pd(b + p * n + j), acc);
            _mm256_storeu_pd(c + i * n + j, acc);
        }
        for (; j < n; ++j) {
            double acc = Acc ? c[i * n + j] : 0.0;
            for (size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// exp / tanh / gelu
// ---------------------------------------------------------------------------

inline __m256d exp4(__m256d x) {
    const __m256d hi = _mm256_set1_pd(kExpHi);
    const __m256d lo = _mm256_set1_pd(kExpLo);
    const __m256d mask_hi = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
    const __m256d mask_lo = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    const __m256d mask_nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);

    __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
    const __m256d pxf =
        _mm256_floor_pd(_mm256_fmadd_pd(_mm256_set1_pd(kLog2E), xc, _mm256_set1_pd(0.5)));
    const __m256i n64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(pxf));
    xc = _mm256_fnmadd_pd(pxf, _mm256_set1_pd(kExpC1), xc);
    xc = _mm256_fnmadd_pd(pxf, _mm256_set1_pd(kExpC2), xc);

    const __m256d xx = _mm256_mul_pd(xc, xc);
    __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(kExpP0), xx, _mm256_set1_pd(kExpP1));
    p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(kExpP2));
    p = _mm256_mul_pd(p, xc);
    __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(kExpQ0), xx, _mm256_set1_pd(kExpQ1));
    q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(kExpQ2));
    q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(kExpQ3));

    const __m256d two_p = _mm256_add_pd(p, p);
    __m256d r = _mm256_add_pd(_mm256_set1_pd(1.0),
                              _mm256_div_pd(two_p, _mm256_sub_pd(q, p)));
    const __m256i ebits =
        _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    r = _mm256_mul_pd(r, _mm256_castsi256_pd(ebits));

    r = _mm256_blendv_pd(r, _mm256_setzero_pd(), mask_lo);
    r = _mm256_blendv_pd(r, _mm256_set1_pd(HUGE_VAL), mask_hi);
    r = _mm256_blendv_pd(r, x, mask_nan);
    return r;
}

inline __m256d tanh4(__m256d x) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d sign = _mm256_and_pd(x, sign_mask);
    const __m256d ax = _mm256_andnot_pd(sign_mask, x);
    const __m256d e = exp4(_mm256_mul_pd(_mm256_set1_pd(-2.0), ax));
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d t = _mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e));
    return _mm256_or_pd(t, sign);
}

void vexp_(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = detail::exp_scalar(x[i]);
}

void vtanh_(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, tanh4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = detail::tanh_scalar(x[i]);
}

void gelu_fwd_(const double* x, double* y, double* t, size_t n) {
    const __m256d c = _mm256_set1_pd(kGeluC);
    const __m256d a = _mm256_set1_pd(kGeluA);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d one = _mm256_set1_pd(1.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d x2 = _mm256_mul_pd(xv, xv);
        const __m256d u = _mm256_mul_pd(c, _mm256_fmadd_pd(_mm256_mul_pd(a, x2), xv, xv));
        const __m256d tv = tanh4(u);
        _mm256_storeu_pd(t + i, tv);
        const __m256d yv = _mm256_mul_pd(_mm256_mul_pd(half, xv), _mm256_add_pd(one, tv));
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) {
        const double ti = detail::tanh_scalar(detail::gelu_u(x[i]));
        t[i] = ti;
        y[i] = detail::gelu_value(x[i], ti);
    }
}

void gelu_bwd_(const double* x, const double* t, const double* dy, double* dx, size_t n) {
    const __m256d c = _mm256_set1_pd(kGeluC);
    const __m256d a3 = _mm256_set1_pd(3.0 * kGeluA);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d one = _mm256_set1_pd(1.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d tv = _mm256_loadu_pd(t + i);
        const __m256d x2 = _mm256_mul_pd(xv, xv);
        const __m256d du = _mm256_mul_pd(c, _mm256_fmadd_pd(a3, x2, one));
        const __m256d omt2 = _mm256_fnmadd_pd(tv, tv, one);
        __m256d g = _mm256_mul_pd(half, _mm256_add_pd(one, tv));
        g = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_mul_pd(half, xv), omt2), du, g);
        const __m256d acc =
            _mm256_fmadd_pd(_mm256_loadu_pd(dy + i), g, _mm256_loadu_pd(dx + i));
        _mm256_storeu_pd(dx + i, acc);
    }
    for (; i < n; ++i) dx[i] += dy[i] * detail::gelu_deriv(x[i], t[i]);
}

void softmax_rows_(const double* x, double* y, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* yr = y + r * cols;
        size_t j = 0;
        double mx;
        if (cols >= 4) {
            __m256d mv = _mm256_loadu_pd(xr);
            for (j = 4; j + 4 <= cols; j += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(xr + j));
            __m128d m2 = _mm_max_pd(_mm256_castpd256_pd128(mv), _mm256_extractf128_pd(mv, 1));
            mx = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
        } else {
            mx = xr[0];
            j = 1;
        }
        for (; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;

        const __m256d mxv = _mm256_set1_pd(mx);
        __m256d sv = _mm256_setzero_pd();
        size_t i = 0;
        for (; i + 4 <= cols; i += 4) {
            const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(xr + i), mxv));
            _mm256_storeu_pd(yr + i, e);
            sv = _mm256_add_pd(sv, e);
        }
        double sum = hsum(sv);
        for (; i < cols; ++i) {
            yr[i] = detail::exp_scalar(xr[i] - mx);
            sum += yr[i];
        }
        const double inv = 1.0 / sum;
        const __m256d iv = _mm256_set1_pd(inv);
        i = 0;
        for (; i + 4 <= cols; i += 4)
            _mm256_storeu_pd(yr + i, _mm256_mul_pd(_mm256_loadu_pd(yr + i), iv));
        for (; i < cols; ++i) yr[i] *= inv;
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

void add_(const double* a, const double* b, double* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_(const double* a, const double* b, double* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_(const double* a, const double* b, double* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_(const double* x, double alpha, double* y, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = alpha * x[i];
}

void axpy_(double alpha, const double* x, double* y, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

bool all_finite_(const double* x, size_t n) {
    // finite(x) <=> x - x == 0 (NaN and Inf both fail)
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d d = _mm256_sub_pd(v, v);
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(d, zero, _CMP_EQ_OQ));
        if (mask != 0xF) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels k = {
        "avx2",
        matmul_nn_t<false>, matmul_nn_t<true>,
        matmul_nt_t<false>, matmul_nt_t<true>,
        matmul_tn_t<false>, matmul_tn_t<true>,
        vexp_, vtanh_,
        add_, sub_, mul_, scale_, axpy_,
        gelu_fwd_, gelu_bwd_,
        softmax_rows_,
        all_finite_,
    };
    return &k;
}

}  // namespace mogen::kern

#else

namespace mogen::kern {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace mogen::kern

#endif
