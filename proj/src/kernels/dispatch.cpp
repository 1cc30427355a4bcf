#include "mogen/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mogen::kern {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* pick(std::string_view name) {
    if (name == "scalar") return &scalar_kernels();
    if (name == "avx2") {
        const Kernels* k = avx2_kernels();
        return (k && cpu_has_avx2_fma()) ? k : nullptr;
    }
    if (name == "auto") {
        const Kernels* k = avx2_kernels();
        if (k && cpu_has_avx2_fma()) return k;
        return &scalar_kernels();
    }
    return nullptr;
}

std::atomic<const Kernels*> g_active{nullptr};

const Kernels* init_from_env() {
    const char* env = std::getenv("MOGEN_SIMD");
    const Kernels* k = pick(env ? std::string_view(env) : std::string_view("auto"));
    if (!k) k = &scalar_kernels();
    return k;
}

}  // namespace

const Kernels& active() {
    const Kernels* k = g_active.load(std::memory_order_acquire);
    if (!k) {
        k = init_from_env();
        g_active.store(k, std::memory_order_release);
    }
    return *k;
}

bool set_active(std::string_view name) {
    const Kernels* k = pick(name);
    if (!k) return false;
    g_active.store(k, std::memory_order_release);
    return true;
}

}  // namespace mogen::kern
