#include "kernels/kernels.hpp"

namespace steadapt::kernels::scalar {

namespace {

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<std::size_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const T av = ai[kk];
            const T* bk = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) c[i] = T(0);
    for (int kk = 0; kk < k; ++kk) {
        const T* ak = a + static_cast<std::size_t>(kk) * m;
        const T* bk = b + static_cast<std::size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            const T av = ak[i];
            T* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<std::size_t>(i) * k;
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<std::size_t>(j) * k;
            T acc = T(0);
            for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void scale(T alpha, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

template <class T>
void vadd(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void vmul(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void vmuladd(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
T sum(const T* x, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <class T>
Table<T> make_table() {
    Table<T> t;
    t.gemm_nn = &gemm_nn<T>;
    t.gemm_tn = &gemm_tn<T>;
    t.gemm_nt = &gemm_nt<T>;
    t.axpy = &axpy<T>;
    t.scale = &scale<T>;
    t.vadd = &vadd<T>;
    t.vmul = &vmul<T>;
    t.vmuladd = &vmuladd<T>;
    t.dot = &dot<T>;
    t.sum = &sum<T>;
    return t;
}

}  // namespace

template <class T>
const Table<T>& table() {
    static const Table<T> t = make_table<T>();
    return t;
}

template const Table<float>& table<float>();
template const Table<double>& table<double>();

}  // namespace steadapt::kernels::scalar
