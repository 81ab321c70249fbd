#include "kernels.hpp"

#if defined(KTC_HAVE_NEON)

#include <arm_neon.h>

namespace ktc::simd::detail {

double dot_neon(const double* x, const double* y, size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    for (; i + 2 <= n; i += 2)
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double l2sq_neon(const double* x, const double* y, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void axpy_neon(double a, const double* x, double* y, size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void lerp_toward_neon(double* w, const double* x, double c, size_t n) {
    const float64x2_t vc = vdupq_n_f64(c);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vw = vld1q_f64(w + i);
        float64x2_t d = vsubq_f64(vld1q_f64(x + i), vw);
        vst1q_f64(w + i, vfmaq_f64(vw, vc, d));
    }
    for (; i < n; ++i) w[i] += c * (x[i] - w[i]);
}

void dot_norm_neon(const double* x, const double* w, size_t n, double& xw, double& ww) {
    float64x2_t accx = vdupq_n_f64(0.0);
    float64x2_t accw = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vw = vld1q_f64(w + i);
        accx = vfmaq_f64(accx, vld1q_f64(x + i), vw);
        accw = vfmaq_f64(accw, vw, vw);
    }
    double sx = vaddvq_f64(accx), sw = vaddvq_f64(accw);
    for (; i < n; ++i) {
        sx += x[i] * w[i];
        sw += w[i] * w[i];
    }
    xw = sx;
    ww = sw;
}

} // namespace ktc::simd::detail

#endif // KTC_HAVE_NEON
