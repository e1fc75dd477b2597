#include "mdiq/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace mdiq::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable* avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_table_impl();
#endif
    return nullptr;
}

const KernelTable& active() {
    static const KernelTable* selected = [] {
        const char* env = std::getenv("MDIQ_KERNELS");
        if (env && std::strcmp(env, "scalar") == 0) return &scalar_table();
        if (env && std::strcmp(env, "avx2") == 0) {
            if (const KernelTable* t = avx2_table()) return t;
            return &scalar_table(); // requested but unavailable
        }
        if (const KernelTable* t = avx2_table()) return t;
        return &scalar_table();
    }();
    return *selected;
}

} // namespace mdiq::kernels
