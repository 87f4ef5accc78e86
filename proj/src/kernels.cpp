#include "cglp/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace cglp::kernels {

namespace scalar {

float dot(const float* a, const float* b, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
double dot(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
void axpy(float alpha, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void axpy(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void scale(float alpha, float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}
void scale(double alpha, double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}
void add(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void add(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void mul(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void mul(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
float sum(const float* x, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}
double sum(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}
float sum_sq(const float* x, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}
double sum_sq(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}
float max(const float* x, size_t n) {
    float m = x[0];
    for (size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}
double max(const double* x, size_t n) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}
float exp_shift_sum(float* x, size_t n, float shift) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - shift);
        acc += x[i];
    }
    return acc;
}
double exp_shift_sum(double* x, size_t n, double shift) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - shift);
        acc += x[i];
    }
    return acc;
}

}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
bool supported();
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void scale(float alpha, float* x, size_t n);
void scale(double alpha, double* x, size_t n);
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
float sum(const float* x, size_t n);
double sum(const double* x, size_t n);
float sum_sq(const float* x, size_t n);
double sum_sq(const double* x, size_t n);
}  // namespace avx2
#endif

static Backend pick_backend() {
    const char* env = std::getenv("CGLP_KERNEL");
    if (env && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
#if defined(__x86_64__)
    if (env && std::strcmp(env, "avx2") == 0) return Backend::Avx2;
    if (avx2::supported()) return Backend::Avx2;
#endif
    return Backend::Scalar;
}

Backend active_backend() {
    static const Backend b = pick_backend();
    return b;
}

std::string backend_name() {
    return active_backend() == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__)
#define CGLP_DISPATCH(call) \
    return active_backend() == Backend::Avx2 ? avx2::call : scalar::call
#else
#define CGLP_DISPATCH(call) return scalar::call
#endif

float dot(const float* a, const float* b, size_t n) { CGLP_DISPATCH(dot(a, b, n)); }
double dot(const double* a, const double* b, size_t n) { CGLP_DISPATCH(dot(a, b, n)); }
void axpy(float alpha, const float* x, float* y, size_t n) { CGLP_DISPATCH(axpy(alpha, x, y, n)); }
void axpy(double alpha, const double* x, double* y, size_t n) { CGLP_DISPATCH(axpy(alpha, x, y, n)); }
void scale(float alpha, float* x, size_t n) { CGLP_DISPATCH(scale(alpha, x, n)); }
void scale(double alpha, double* x, size_t n) { CGLP_DISPATCH(scale(alpha, x, n)); }
void add(const float* a, const float* b, float* out, size_t n) { CGLP_DISPATCH(add(a, b, out, n)); }
void add(const double* a, const double* b, double* out, size_t n) { CGLP_DISPATCH(add(a, b, out, n)); }
void mul(const float* a, const float* b, float* out, size_t n) { CGLP_DISPATCH(mul(a, b, out, n)); }
void mul(const double* a, const double* b, double* out, size_t n) { CGLP_DISPATCH(mul(a, b, out, n)); }
float sum(const float* x, size_t n) { CGLP_DISPATCH(sum(x, n)); }
double sum(const double* x, size_t n) { CGLP_DISPATCH(sum(x, n)); }
float sum_sq(const float* x, size_t n) { CGLP_DISPATCH(sum_sq(x, n)); }
double sum_sq(const double* x, size_t n) { CGLP_DISPATCH(sum_sq(x, n)); }
float max(const float* x, size_t n) { return scalar::max(x, n); }
double max(const double* x, size_t n) { return scalar::max(x, n); }
// exp has no vectorized variant; the shift/sum structure still matters for
// the softmax contract.
float exp_shift_sum(float* x, size_t n, float shift) { return scalar::exp_shift_sum(x, n, shift); }
double exp_shift_sum(double* x, size_t n, double shift) { return scalar::exp_shift_sum(x, n, shift); }

#undef CGLP_DISPATCH

}  // namespace cglp::kernels
