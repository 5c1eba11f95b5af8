#pragma once

#include <cstddef>
#include <cstdint>

// Hot arithmetic inner loops, behind a runtime-dispatched table: a scalar
// reference path and an AVX2 path (compiled separately with -mavx2 -mfma).
// The two are equivalence-tested against each other; everything above this
// layer is backend-agnostic.
//
// Matrix conventions: row-major, C is (m,n).
//   gemm_nn  C (+)= A(m,k) * B(k,n)
//   gemm_tn  C (+)= A'(k,m) * B(k,n)   (A stored k-by-m; used for grad-of-weight)
//   gemm_nt  C (+)= A(m,k) * B'(n,k)   (B stored n-by-k; used for x*W' and Q*K')

namespace steadapt::kernels {

enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);  // throws InvalidConfig when unsupported on this host
const char* backend_name(Backend b);

template <class T>
struct Table {
    void (*gemm_nn)(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
    void (*gemm_tn)(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
    void (*gemm_nt)(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);     // y += alpha*x
    void (*scale)(T alpha, T* y, std::size_t n);                // y *= alpha
    void (*vadd)(const T* a, const T* b, T* out, std::size_t n);
    void (*vmul)(const T* a, const T* b, T* out, std::size_t n);
    void (*vmuladd)(const T* a, const T* b, T* out, std::size_t n);  // out += a*b
    T (*dot)(const T* a, const T* b, std::size_t n);
    T (*sum)(const T* x, std::size_t n);
};

namespace scalar {
template <class T>
const Table<T>& table();
}
#ifdef STEADAPT_HAVE_AVX2_BUILD
namespace avx2 {
template <class T>
const Table<T>& table();
}
#endif

// Table for the active backend.
template <class T>
const Table<T>& K();

}  // namespace steadapt::kernels
