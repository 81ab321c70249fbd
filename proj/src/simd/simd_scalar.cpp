#include "kernels.hpp"

namespace ktc::simd::detail {

double dot_scalar(const double* x, const double* y, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double l2sq_scalar(const double* x, const double* y, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void axpy_scalar(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void lerp_toward_scalar(double* w, const double* x, double c, size_t n) {
    for (size_t i = 0; i < n; ++i) w[i] += c * (x[i] - w[i]);
}

void dot_norm_scalar(const double* x, const double* w, size_t n, double& xw, double& ww) {
    double s0 = 0.0, s1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        s0 += x[i] * w[i];
        s1 += w[i] * w[i];
    }
    xw = s0;
    ww = s1;
}

} // namespace ktc::simd::detail
