#ifdef STEADAPT_HAVE_AVX2_BUILD

#include <immintrin.h>

#include "kernels/kernels.hpp"

namespace steadapt::kernels::avx2 {

namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// ---------------------------------------------------------------- float gemm

// C rows i0..i0+rows, columns j..j+16. rows <= 4.
inline void f32_nn_block16(const float* a, const float* b, float* c, int k, int n, int i0, int j,
                           int rows, bool acc, bool a_transposed, int m) {
    __m256 r0[4], r1[4];
    for (int r = 0; r < rows; ++r) {
        float* ci = c + static_cast<std::size_t>(i0 + r) * n + j;
        r0[r] = acc ? _mm256_loadu_ps(ci) : _mm256_setzero_ps();
        r1[r] = acc ? _mm256_loadu_ps(ci + 8) : _mm256_setzero_ps();
    }
    for (int kk = 0; kk < k; ++kk) {
        const float* bk = b + static_cast<std::size_t>(kk) * n + j;
        const __m256 b0 = _mm256_loadu_ps(bk);
        const __m256 b1 = _mm256_loadu_ps(bk + 8);
        for (int r = 0; r < rows; ++r) {
            const float av = a_transposed ? a[static_cast<std::size_t>(kk) * m + (i0 + r)]
                                          : a[static_cast<std::size_t>(i0 + r) * k + kk];
            const __m256 aw = _mm256_set1_ps(av);
            r0[r] = _mm256_fmadd_ps(aw, b0, r0[r]);
            r1[r] = _mm256_fmadd_ps(aw, b1, r1[r]);
        }
    }
    for (int r = 0; r < rows; ++r) {
        float* ci = c + static_cast<std::size_t>(i0 + r) * n + j;
        _mm256_storeu_ps(ci, r0[r]);
        _mm256_storeu_ps(ci + 8, r1[r]);
    }
}

inline void f32_nn_block8(const float* a, const float* b, float* c, int k, int n, int i0, int j,
                          int rows, bool acc, bool a_transposed, int m) {
    __m256 r0[4];
    for (int r = 0; r < rows; ++r) {
        float* ci = c + static_cast<std::size_t>(i0 + r) * n + j;
        r0[r] = acc ? _mm256_loadu_ps(ci) : _mm256_setzero_ps();
    }
    for (int kk = 0; kk < k; ++kk) {
        const __m256 b0 = _mm256_loadu_ps(b + static_cast<std::size_t>(kk) * n + j);
        for (int r = 0; r < rows; ++r) {
            const float av = a_transposed ? a[static_cast<std::size_t>(kk) * m + (i0 + r)]
                                          : a[static_cast<std::size_t>(i0 + r) * k + kk];
            r0[r] = _mm256_fmadd_ps(_mm256_set1_ps(av), b0, r0[r]);
        }
    }
    for (int r = 0; r < rows; ++r)
        _mm256_storeu_ps(c + static_cast<std::size_t>(i0 + r) * n + j, r0[r]);
}

inline void f32_nn_tail(const float* a, const float* b, float* c, int k, int n, int i0, int j0,
                        int rows, bool acc, bool a_transposed, int m) {
    for (int r = 0; r < rows; ++r) {
        float* ci = c + static_cast<std::size_t>(i0 + r) * n;
        for (int j = j0; j < n; ++j) {
            float s = acc ? ci[j] : 0.0f;
            for (int kk = 0; kk < k; ++kk) {
                const float av = a_transposed ? a[static_cast<std::size_t>(kk) * m + (i0 + r)]
                                              : a[static_cast<std::size_t>(i0 + r) * k + kk];
                s += av * b[static_cast<std::size_t>(kk) * n + j];
            }
            ci[j] = s;
        }
    }
}

inline void f32_gemm_nn_impl(const float* a, const float* b, float* c, int m, int k, int n,
                             bool acc, bool a_transposed) {
    for (int i0 = 0; i0 < m; i0 += 4) {
        const int rows = (m - i0) < 4 ? (m - i0) : 4;
        int j = 0;
        for (; j + 16 <= n; j += 16) f32_nn_block16(a, b, c, k, n, i0, j, rows, acc, a_transposed, m);
        for (; j + 8 <= n; j += 8) f32_nn_block8(a, b, c, k, n, i0, j, rows, acc, a_transposed, m);
        if (j < n) f32_nn_tail(a, b, c, k, n, i0, j, rows, acc, a_transposed, m);
    }
}

void f32_gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    f32_gemm_nn_impl(a, b, c, m, k, n, acc, false);
}

void f32_gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    f32_gemm_nn_impl(a, b, c, m, k, n, acc, true);
}

void f32_gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const float* ai = a + static_cast<std::size_t>(i) * k;
        float* ci = c + static_cast<std::size_t>(i) * n;
        int j0 = 0;
        for (; j0 + 4 <= n; j0 += 4) {
            __m256 accv[4] = {_mm256_setzero_ps(), _mm256_setzero_ps(), _mm256_setzero_ps(),
                              _mm256_setzero_ps()};
            int kk = 0;
            for (; kk + 8 <= k; kk += 8) {
                const __m256 av = _mm256_loadu_ps(ai + kk);
                for (int jj = 0; jj < 4; ++jj)
                    accv[jj] = _mm256_fmadd_ps(
                        av, _mm256_loadu_ps(b + static_cast<std::size_t>(j0 + jj) * k + kk),
                        accv[jj]);
            }
            for (int jj = 0; jj < 4; ++jj) {
                float s = hsum(accv[jj]);
                const float* bj = b + static_cast<std::size_t>(j0 + jj) * k;
                for (int kt = kk; kt < k; ++kt) s += ai[kt] * bj[kt];
                ci[j0 + jj] = acc ? ci[j0 + jj] + s : s;
            }
        }
        for (; j0 < n; ++j0) {
            const float* bj = b + static_cast<std::size_t>(j0) * k;
            __m256 accv = _mm256_setzero_ps();
            int kk = 0;
            for (; kk + 8 <= k; kk += 8)
                accv = _mm256_fmadd_ps(_mm256_loadu_ps(ai + kk), _mm256_loadu_ps(bj + kk), accv);
            float s = hsum(accv);
            for (; kk < k; ++kk) s += ai[kk] * bj[kk];
            ci[j0] = acc ? ci[j0] + s : s;
        }
    }
}

// --------------------------------------------------------------- double gemm

inline void f64_nn_block8(const double* a, const double* b, double* c, int k, int n, int i0, int j,
                          int rows, bool acc, bool a_transposed, int m) {
    __m256d r0[4], r1[4];
    for (int r = 0; r < rows; ++r) {
        double* ci = c + static_cast<std::size_t>(i0 + r) * n + j;
        r0[r] = acc ? _mm256_loadu_pd(ci) : _mm256_setzero_pd();
        r1[r] = acc ? _mm256_loadu_pd(ci + 4) : _mm256_setzero_pd();
    }
    for (int kk = 0; kk < k; ++kk) {
        const double* bk = b + static_cast<std::size_t>(kk) * n + j;
        const __m256d b0 = _mm256_loadu_pd(bk);
        const __m256d b1 = _mm256_loadu_pd(bk + 4);
        for (int r = 0; r < rows; ++r) {
            const double av = a_transposed ? a[static_cast<std::size_t>(kk) * m + (i0 + r)]
                                           : a[static_cast<std::size_t>(i0 + r) * k + kk];
            const __m256d aw = _mm256_set1_pd(av);
            r0[r] = _mm256_fmadd_pd(aw, b0, r0[r]);
            r1[r] = _mm256_fmadd_pd(aw, b1, r1[r]);
        }
    }
    for (int r = 0; r < rows; ++r) {
        double* ci = c + static_cast<std::size_t>(i0 + r) * n + j;
        _mm256_storeu_pd(ci, r0[r]);
        _mm256_storeu_pd(ci + 4, r1[r]);
    }
}

inline void f64_nn_tail(const double* a, const double* b, double* c, int k, int n, int i0, int j0,
                        int rows, bool acc, bool a_transposed, int m) {
    for (int r = 0; r < rows; ++r) {
        double* ci = c + static_cast<std::size_t>(i0 + r) * n;
        for (int j = j0; j < n; ++j) {
            double s = acc ? ci[j] : 0.0;
            for (int kk = 0; kk < k; ++kk) {
                const double av = a_transposed ? a[static_cast<std::size_t>(kk) * m + (i0 + r)]
                                               : a[static_cast<std::size_t>(i0 + r) * k + kk];
                s += av * b[static_cast<std::size_t>(kk) * n + j];
            }
            ci[j] = s;
        }
    }
}

inline void f64_gemm_nn_impl(const double* a, const double* b, double* c, int m, int k, int n,
                             bool acc, bool a_transposed) {
    for (int i0 = 0; i0 < m; i0 += 4) {
        const int rows = (m - i0) < 4 ? (m - i0) : 4;
        int j = 0;
        for (; j + 8 <= n; j += 8) f64_nn_block8(a, b, c, k, n, i0, j, rows, acc, a_transposed, m);
        if (j < n) f64_nn_tail(a, b, c, k, n, i0, j, rows, acc, a_transposed, m);
    }
}

void f64_gemm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    f64_gemm_nn_impl(a, b, c, m, k, n, acc, false);
}

void f64_gemm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    f64_gemm_nn_impl(a, b, c, m, k, n, acc, true);
}

void f64_gemm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            __m256d accv = _mm256_setzero_pd();
            int kk = 0;
            for (; kk + 4 <= k; kk += 4)
                accv = _mm256_fmadd_pd(_mm256_loadu_pd(ai + kk), _mm256_loadu_pd(bj + kk), accv);
            double s = hsum(accv);
            for (; kk < k; ++kk) s += ai[kk] * bj[kk];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

// -------------------------------------------------------------- elementwise

void f32_axpy(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void f64_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void f32_scale(float alpha, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] *= alpha;
}

void f64_scale(double alpha, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] *= alpha;
}

void f32_vadd(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void f64_vadd(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void f32_vmul(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void f64_vmul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void f32_vmuladd(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(
            out + i, _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                                     _mm256_loadu_ps(out + i)));
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

void f64_vmuladd(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            out + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                     _mm256_loadu_pd(out + i)));
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

float f32_dot(const float* a, const float* b, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double f64_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float f32_sum(const float* x, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double f64_sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

template <>
const Table<float>& table<float>() {
    static const Table<float> t = {f32_gemm_nn, f32_gemm_tn, f32_gemm_nt, f32_axpy, f32_scale,
                                   f32_vadd,    f32_vmul,    f32_vmuladd, f32_dot,  f32_sum};
    return t;
}

template <>
const Table<double>& table<double>() {
    static const Table<double> t = {f64_gemm_nn, f64_gemm_tn, f64_gemm_nt, f64_axpy, f64_scale,
                                    f64_vadd,    f64_vmul,    f64_vmuladd, f64_dot,  f64_sum};
    return t;
}

}  // namespace steadapt::kernels::avx2

#endif  // STEADAPT_HAVE_AVX2_BUILD
