#pragma once

// Dense and index-sparse vector kernels used by the solver, kernel, and
// neighbor code paths. Each operation has a scalar reference implementation;
// on x86-64 an AVX2/FMA variant is selected at runtime when the CPU supports
// it. Set TEA_SIMD=scalar in the environment to force the reference path.

#include <cstddef>
#include <cstdint>

namespace tea::vecops {

// dot(a, b) over n doubles
double dot(const double* a, const double* b, std::size_t n) noexcept;

// sum of squares of a
double nrm2_sq(const double* a, std::size_t n) noexcept;

// plain sum
double sum(const double* a, std::size_t n) noexcept;

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;

// squared Euclidean distance
double sqdist(const double* a, const double* b, std::size_t n) noexcept;

// sum_k w[idx[k]] * val[k]  (sparse map against a dense weight vector)
double dot_gather(const double* w, const std::int32_t* idx, const double* val,
                  std::size_t m) noexcept;

// w[idx[k]] += alpha * val[k]; indices must be distinct within one call
void axpy_scatter(double alpha, const std::int32_t* idx, const double* val,
                  std::size_t m, double* w) noexcept;

// "avx2" or "scalar", resolved once on first use
const char* active_isa() noexcept;

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept;
double sum_scalar(const double* a, std::size_t n) noexcept;
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept;
double sqdist_scalar(const double* a, const double* b, std::size_t n) noexcept;
double dot_gather_scalar(const double* w, const std::int32_t* idx, const double* val,
                         std::size_t m) noexcept;
void axpy_scatter_scalar(double alpha, const std::int32_t* idx, const double* val,
                         std::size_t m, double* w) noexcept;

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_supported() noexcept;
double dot_avx2(const double* a, const double* b, std::size_t n) noexcept;
double sum_avx2(const double* a, std::size_t n) noexcept;
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) noexcept;
double sqdist_avx2(const double* a, const double* b, std::size_t n) noexcept;
double dot_gather_avx2(const double* w, const std::int32_t* idx, const double* val,
                       std::size_t m) noexcept;
void axpy_scatter_avx2(double alpha, const std::int32_t* idx, const double* val,
                       std::size_t m, double* w) noexcept;
#endif

}  // namespace detail

}  // namespace tea::vecops
