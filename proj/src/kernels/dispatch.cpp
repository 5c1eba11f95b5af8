#include "kernels/kernels.hpp"

#include <atomic>

#include "core/error.hpp"

namespace steadapt::kernels {

bool avx2_supported() {
#if defined(STEADAPT_HAVE_AVX2_BUILD) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {
Backend initial_backend() { return avx2_supported() ? Backend::avx2 : Backend::scalar; }
std::atomic<Backend> g_backend{initial_backend()};
}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported())
        throw InvalidConfig("avx2 backend requested but not supported on this host");
    g_backend.store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

template <class T>
const Table<T>& K() {
#ifdef STEADAPT_HAVE_AVX2_BUILD
    if (active_backend() == Backend::avx2) return avx2::table<T>();
#endif
    return scalar::table<T>();
}

template const Table<float>& K<float>();
template const Table<double>& K<double>();

}  // namespace steadapt::kernels
