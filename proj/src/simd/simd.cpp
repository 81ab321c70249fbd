#include "ktc/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "kernels.hpp"

namespace ktc::simd {

namespace {

struct KernelTable {
    double (*dot)(const double*, const double*, size_t);
    double (*l2sq)(const double*, const double*, size_t);
    void (*axpy)(double, const double*, double*, size_t);
    void (*lerp_toward)(double*, const double*, double, size_t);
    void (*dot_norm)(const double*, const double*, size_t, double&, double&);
};

constexpr KernelTable kScalarTable = {
    detail::dot_scalar, detail::l2sq_scalar, detail::axpy_scalar,
    detail::lerp_toward_scalar, detail::dot_norm_scalar,
};

#if defined(KTC_HAVE_AVX2)
constexpr KernelTable kAvx2Table = {
    detail::dot_avx2, detail::l2sq_avx2, detail::axpy_avx2,
    detail::lerp_toward_avx2, detail::dot_norm_avx2,
};
#endif

#if defined(KTC_HAVE_NEON)
constexpr KernelTable kNeonTable = {
    detail::dot_neon, detail::l2sq_neon, detail::axpy_neon,
    detail::lerp_toward_neon, detail::dot_norm_neon,
};
#endif

const KernelTable* table_for(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return &kScalarTable;
#if defined(KTC_HAVE_AVX2)
    case Backend::Avx2:
        return &kAvx2Table;
#endif
#if defined(KTC_HAVE_NEON)
    case Backend::Neon:
        return &kNeonTable;
#endif
    default:
        return nullptr;
    }
}

Backend pick_backend() {
#if defined(KTC_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#endif
#if defined(KTC_HAVE_NEON)
    return Backend::Neon;
#endif
    return Backend::Scalar;
}

Backend parse_env(const char* v, Backend fallback) {
    if (std::strcmp(v, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(v, "avx2") == 0) return Backend::Avx2;
    if (std::strcmp(v, "neon") == 0) return Backend::Neon;
    return fallback;
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};
std::once_flag g_init_once;

void init_dispatch() {
    Backend b = pick_backend();
    if (const char* env = std::getenv("KTC_SIMD"))
        b = parse_env(env, b);
    if (!backend_available(b)) b = Backend::Scalar;
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(table_for(b), std::memory_order_release);
}

inline const KernelTable& table() {
    const KernelTable* t = g_table.load(std::memory_order_acquire);
    if (!t) {
        std::call_once(g_init_once, init_dispatch);
        t = g_table.load(std::memory_order_acquire);
    }
    return *t;
}

} // namespace

bool backend_available(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return true;
    case Backend::Avx2:
#if defined(KTC_HAVE_AVX2)
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Backend::Neon:
#if defined(KTC_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Backend active_backend() {
    table();
    return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return "scalar";
    case Backend::Avx2:
        return "avx2";
    case Backend::Neon:
        return "neon";
    }
    return "?";
}

void force_backend(Backend b) {
    if (!backend_available(b))
        throw std::runtime_error(std::string("simd backend not available: ") + backend_name(b));
    std::call_once(g_init_once, init_dispatch);
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(table_for(b), std::memory_order_release);
}

double dot(const double* x, const double* y, size_t n) { return table().dot(x, y, n); }

double l2sq(const double* x, const double* y, size_t n) { return table().l2sq(x, y, n); }

void axpy(double a, const double* x, double* y, size_t n) { table().axpy(a, x, y, n); }

void lerp_toward(double* w, const double* x, double c, size_t n) {
    table().lerp_toward(w, x, c, n);
}

void dot_norm(const double* x, const double* w, size_t n, double& xw, double& ww) {
    table().dot_norm(x, w, n, xw, ww);
}

} // namespace ktc::simd
