#include "mdiq/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <limits>

namespace mdiq::kernels {

namespace {

// 2^e for integral-valued e in [-1022, 1023], per lane.
inline __m256d pow2_pd(__m256d e) {
    __m128i e32 = _mm256_cvtpd_epi32(e);
    __m256i e64 = _mm256_cvtepi32_epi64(e32);
    e64 = _mm256_add_epi64(e64, _mm256_set1_epi64x(1023));
    e64 = _mm256_slli_epi64(e64, 52);
    return _mm256_castsi256_pd(e64);
}

// Cephes-style exp: exp(x) = 2^k * (1 + 2 P(r)/(Q(r) - P(r))), r = x - k ln2.
// The 2^k scaling is split in two so results down in the denormal range
// still come out right. Finite inputs only.
inline __m256d exp_pd(__m256d x) {
    const __m256d overflow_edge  = _mm256_set1_pd(709.782712893383996732);
    const __m256d underflow_edge = _mm256_set1_pd(-745.133219101941108420);

    __m256d xc = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-746.0)),
                               _mm256_set1_pd(710.0));

    const __m256d log2e  = _mm256_set1_pd(1.44269504088896340736);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256d k = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, ln2_hi, xc);
    r = _mm256_fnmadd_pd(k, ln2_lo, r);
    __m256d r2 = _mm256_mul_pd(r, r);

    __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(3.02994407707441961300e-2));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(9.99999999999999999910e-1));
    p = _mm256_mul_pd(p, r);

    __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.52448340349684104192e-3));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.27265548208155028766e-1));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.00000000000000000005e0));

    __m256d t = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    __m256d y = _mm256_fmadd_pd(_mm256_set1_pd(2.0), t, _mm256_set1_pd(1.0));

    __m256d kh = _mm256_round_pd(_mm256_mul_pd(k, _mm256_set1_pd(0.5)),
                                 _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d kl = _mm256_sub_pd(k, kh);
    y = _mm256_mul_pd(y, pow2_pd(kh));
    y = _mm256_mul_pd(y, pow2_pd(kl));

    y = _mm256_blendv_pd(
        y, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
        _mm256_cmp_pd(x, overflow_edge, _CMP_GT_OQ));
    y = _mm256_blendv_pd(y, _mm256_setzero_pd(),
                         _mm256_cmp_pd(x, underflow_edge, _CMP_LT_OQ));
    return y;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    double acc = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void exp_avx2(const double* in, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(in + i)));
    if (i < n) {
        double buf_in[4] = {0, 0, 0, 0};
        double buf_out[4];
        for (std::size_t j = i; j < n; ++j) buf_in[j - i] = in[j];
        _mm256_storeu_pd(buf_out, exp_pd(_mm256_loadu_pd(buf_in)));
        for (std::size_t j = i; j < n; ++j) out[j] = buf_out[j - i];
    }
}

void sigmoid_avx2(const double* in, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d z = _mm256_loadu_pd(in + i);
        __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), z));
        _mm256_storeu_pd(out + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
    }
    if (i < n) {
        double buf_in[4] = {0, 0, 0, 0};
        double buf_out[4];
        for (std::size_t j = i; j < n; ++j) buf_in[j - i] = in[j];
        __m256d z = _mm256_loadu_pd(buf_in);
        __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), z));
        _mm256_storeu_pd(buf_out, _mm256_div_pd(one, _mm256_add_pd(one, e)));
        for (std::size_t j = i; j < n; ++j) out[j] = buf_out[j - i];
    }
}

} // namespace

const KernelTable* avx2_table_impl() {
    static const KernelTable t{"avx2", dot_avx2, axpy_avx2, exp_avx2,
                               sigmoid_avx2};
    return &t;
}

} // namespace mdiq::kernels

#endif // x86_64
