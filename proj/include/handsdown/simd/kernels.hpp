#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference in
// kernels_scalar.cpp and an AVX2 variant in kernels_avx2.cpp; the table
// returned by kernels() is picked once at startup from CPU features.
// All variants are bit-identical to the scalar reference.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace handsdown::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

/// Maximum pattern length for batch_edit_distance (one machine word).
inline constexpr int kMaxPattern = 64;

struct KernelTable {
    Isa isa;

    /// out[i] = (px - cx[i])^2 + (py - cy[i])^2
    void (*squared_distances)(double px, double py, const double* cx, const double* cy,
                              std::size_t n, double* out);

    /// out[i] = a[i] dx^2 + 2 b[i] dx dy + c[i] dy^2 with dx = px - cx[i], dy = py - cy[i].
    void (*quadratic_forms)(double px, double py, const double* cx, const double* cy,
                            const double* a, const double* b, const double* c, std::size_t n,
                            double* out);

    /// min_i sqrt((qx-px[i])^2 + (qy-py[i])^2) / max(w[i], eps); +inf when n == 0.
    double (*min_weighted_distance)(double qx, double qy, const double* px, const double* py,
                                    const double* w, double eps, std::size_t n);

    /// Levenshtein distance between a pattern (given as its 26 match masks
    /// and length m <= 64) and `count` texts of identical length `len`,
    /// stored back to back in `texts` (lowercase a-z).
    void (*batch_edit_distance)(const std::uint64_t* peq, int m, const char* texts,
                                std::size_t count, int len, std::int32_t* out);
};

bool supported(Isa isa);
const KernelTable& kernels(Isa isa);

/// Active table: best supported ISA, overridable with HANDSDOWN_SIMD=scalar|avx2.
const KernelTable& kernels();

/// Per-letter match masks for a pattern of lowercase letters (length <= 64).
struct PatternMasks {
    std::uint64_t peq[26] = {};
    int length = 0;
};
PatternMasks build_pattern(std::string_view pattern);

namespace detail {
const KernelTable& scalar_table();
#if defined(HANDSDOWN_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace handsdown::simd
