#include "tea/vecops.hpp"

#include <cstdlib>
#include <cstring>

namespace tea::vecops {

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_scalar(const double* a, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot_gather_scalar(const double* w, const std::int32_t* idx, const double* val,
                         std::size_t m) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += w[idx[k]] * val[k];
    return s;
}

void axpy_scatter_scalar(double alpha, const std::int32_t* idx, const double* val,
                         std::size_t m, double* w) noexcept {
    for (std::size_t k = 0; k < m; ++k) w[idx[k]] += alpha * val[k];
}

}  // namespace detail

namespace {

struct Table {
    double (*dot)(const double*, const double*, std::size_t) noexcept;
    double (*sum)(const double*, std::size_t) noexcept;
    void (*axpy)(double, const double*, double*, std::size_t) noexcept;
    double (*sqdist)(const double*, const double*, std::size_t) noexcept;
    double (*dot_gather)(const double*, const std::int32_t*, const double*, std::size_t) noexcept;
    void (*axpy_scatter)(double, const std::int32_t*, const double*, std::size_t, double*) noexcept;
    const char* isa;
};

Table make_table() {
    Table t{detail::dot_scalar,       detail::sum_scalar,
            detail::axpy_scalar,      detail::sqdist_scalar,
            detail::dot_gather_scalar, detail::axpy_scatter_scalar,
            "scalar"};
    const char* force = std::getenv("TEA_SIMD");
    if (force != nullptr && std::strcmp(force, "scalar") == 0) return t;
#if defined(__x86_64__) || defined(_M_X64)
    if (detail::avx2_supported()) {
        t.dot = detail::dot_avx2;
        t.sum = detail::sum_avx2;
        t.axpy = detail::axpy_avx2;
        t.sqdist = detail::sqdist_avx2;
        t.dot_gather = detail::dot_gather_avx2;
        t.axpy_scatter = detail::axpy_scatter_avx2;
        t.isa = "avx2";
    }
#endif
    return t;
}

const Table& table() {
    static const Table t = make_table();
    return t;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
    return table().dot(a, b, n);
}

double nrm2_sq(const double* a, std::size_t n) noexcept {
    return table().dot(a, a, n);
}

double sum(const double* a, std::size_t n) noexcept {
    return table().sum(a, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
    table().axpy(alpha, x, y, n);
}

double sqdist(const double* a, const double* b, std::size_t n) noexcept {
    return table().sqdist(a, b, n);
}

double dot_gather(const double* w, const std::int32_t* idx, const double* val,
                  std::size_t m) noexcept {
    return table().dot_gather(w, idx, val, m);
}

void axpy_scatter(double alpha, const std::int32_t* idx, const double* val,
                  std::size_t m, double* w) noexcept {
    table().axpy_scatter(alpha, idx, val, m, w);
}

const char* active_isa() noexcept { return table().isa; }

}  // namespace tea::vecops
