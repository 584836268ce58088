// AVX2/FMA variants of the numeric kernels. This translation unit is the only
// one compiled with -mavx2 -mfma; callers reach it through the dispatch table.
#include "tea/vecops.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace tea::vecops::detail {

bool avx2_supported() noexcept {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

inline double hsum(__m256d v) noexcept {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) noexcept {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_avx2(const double* a, std::size_t n) noexcept {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) noexcept {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) noexcept {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot_gather_avx2(const double* w, const std::int32_t* idx, const double* val,
                       std::size_t m) noexcept {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= m; k += 4) {
        const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k));
        const __m256d vw = _mm256_i32gather_pd(w, vi, 8);
        acc = _mm256_fmadd_pd(vw, _mm256_loadu_pd(val + k), acc);
    }
    double s = hsum(acc);
    for (; k < m; ++k) s += w[idx[k]] * val[k];
    return s;
}

void axpy_scatter_avx2(double alpha, const std::int32_t* idx, const double* val,
                       std::size_t m, double* w) noexcept {
    // No scatter instruction below AVX-512; vectorize the multiply, store by index.
    const __m256d va = _mm256_set1_pd(alpha);
    alignas(32) double tmp[4];
    std::size_t k = 0;
    for (; k + 4 <= m; k += 4) {
        _mm256_store_pd(tmp, _mm256_mul_pd(va, _mm256_loadu_pd(val + k)));
        w[idx[k + 0]] += tmp[0];
        w[idx[k + 1]] += tmp[1];
        w[idx[k + 2]] += tmp[2];
        w[idx[k + 3]] += tmp[3];
    }
    for (; k < m; ++k) w[idx[k]] += alpha * val[k];
}

}  // namespace tea::vecops::detail

#endif
