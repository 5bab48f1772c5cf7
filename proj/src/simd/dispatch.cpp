#include "handsdown/simd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace handsdown::simd {

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(HANDSDOWN_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& kernels(Isa isa) {
    if (!supported(isa)) {
        throw std::runtime_error("SIMD variant not supported on this CPU: " + std::string(to_string(isa)));
    }
#if defined(HANDSDOWN_HAVE_AVX2_TU)
    if (isa == Isa::Avx2) return detail::avx2_table();
#endif
    return detail::scalar_table();
}

namespace {

const KernelTable& select() {
    if (const char* env = std::getenv("HANDSDOWN_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return detail::scalar_table();
        if (want == "avx2" && supported(Isa::Avx2)) return kernels(Isa::Avx2);
    }
    if (supported(Isa::Avx2)) return kernels(Isa::Avx2);
    return detail::scalar_table();
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& active = select();
    return active;
}

PatternMasks build_pattern(std::string_view pattern) {
    if (pattern.size() > static_cast<std::size_t>(kMaxPattern)) {
        throw std::invalid_argument("pattern longer than 64 letters");
    }
    PatternMasks masks;
    masks.length = static_cast<int>(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const char c = pattern[i];
        if (c < 'a' || c > 'z') throw std::invalid_argument("pattern must be lowercase a-z");
        masks.peq[c - 'a'] |= std::uint64_t{1} << i;
    }
    return masks;
}

}  // namespace handsdown::simd
