// AVX2 variants. Compiled with -mavx2 only; callers reach these through the
// dispatch table after a CPU feature check.

#include "handsdown/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace handsdown::simd {
namespace {

void squared_distances(double px, double py, const double* cx, const double* cy, std::size_t n,
                       double* out) {
    const __m256d vx = _mm256_set1_pd(px);
    const __m256d vy = _mm256_set1_pd(py);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(cx + i));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(cy + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
    }
    for (; i < n; ++i) {
        const double dx = px - cx[i];
        const double dy = py - cy[i];
        out[i] = dx * dx + dy * dy;
    }
}

void quadratic_forms(double px, double py, const double* cx, const double* cy, const double* a,
                     const double* b, const double* c, std::size_t n, double* out) {
    const __m256d vx = _mm256_set1_pd(px);
    const __m256d vy = _mm256_set1_pd(py);
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(cx + i));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(cy + i));
        const __m256d xx = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_mul_pd(dx, dx));
        const __m256d xy = _mm256_mul_pd(_mm256_mul_pd(two, _mm256_loadu_pd(b + i)),
                                          _mm256_mul_pd(dx, dy));
        const __m256d yy = _mm256_mul_pd(_mm256_loadu_pd(c + i), _mm256_mul_pd(dy, dy));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_add_pd(xx, xy), yy));
    }
    for (; i < n; ++i) {
        const double dx = px - cx[i];
        const double dy = py - cy[i];
        const double xx = a[i] * (dx * dx);
        const double xy = (2.0 * b[i]) * (dx * dy);
        const double yy = c[i] * (dy * dy);
        out[i] = (xx + xy) + yy;
    }
}

double min_weighted_distance(double qx, double qy, const double* px, const double* py,
                             const double* w, double eps, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    const __m256d vx = _mm256_set1_pd(qx);
    const __m256d vy = _mm256_set1_pd(qy);
    const __m256d veps = _mm256_set1_pd(eps);
    __m256d best = _mm256_set1_pd(inf);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(px + i));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(py + i));
        const __m256d d = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
        const __m256d den = _mm256_max_pd(_mm256_loadu_pd(w + i), veps);
        best = _mm256_min_pd(best, _mm256_div_pd(d, den));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    double result = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
    for (; i < n; ++i) {
        const double dx = qx - px[i];
        const double dy = qy - py[i];
        const double d = std::sqrt(dx * dx + dy * dy);
        result = std::min(result, d / std::max(w[i], eps));
    }
    return result;
}

std::int32_t myers_one(const std::uint64_t* peq, int m, const char* text, int len) {
    if (m == 0) return len;
    const std::uint64_t high = std::uint64_t{1} << (m - 1);
    std::uint64_t pv = ~std::uint64_t{0};
    std::uint64_t mv = 0;
    std::int32_t score = m;
    for (int j = 0; j < len; ++j) {
        const std::uint64_t eq = peq[text[j] - 'a'];
        const std::uint64_t xv = eq | mv;
        const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
        std::uint64_t ph = mv | ~(xh | pv);
        std::uint64_t mh = pv & xh;
        score += static_cast<std::int32_t>((ph & high) != 0) - static_cast<std::int32_t>((mh & high) != 0);
        ph = (ph << 1) | 1;
        mh <<= 1;
        pv = mh | ~(xv | ph);
        mv = ph & xv;
    }
    return score;
}

// Four texts per step, one per 64-bit lane. All texts share the pattern
// masks and the length, so the lanes run in lockstep without masking.
void batch_edit_distance(const std::uint64_t* peq, int m, const char* texts, std::size_t count,
                         int len, std::int32_t* out) {
    const std::size_t stride = static_cast<std::size_t>(len);
    std::size_t i = 0;
    if (m > 0) {
        const __m256i ones = _mm256_set1_epi64x(-1);
        const __m256i one = _mm256_set1_epi64x(1);
        const __m128i shift = _mm_cvtsi32_si128(m - 1);
        for (; i + 4 <= count; i += 4) {
            const char* t0 = texts + (i + 0) * stride;
            const char* t1 = texts + (i + 1) * stride;
            const char* t2 = texts + (i + 2) * stride;
            const char* t3 = texts + (i + 3) * stride;
            __m256i pv = ones;
            __m256i mv = _mm256_setzero_si256();
            __m256i score = _mm256_set1_epi64x(m);
            for (int j = 0; j < len; ++j) {
                const __m256i eq = _mm256_set_epi64x(
                    static_cast<long long>(peq[t3[j] - 'a']), static_cast<long long>(peq[t2[j] - 'a']),
                    static_cast<long long>(peq[t1[j] - 'a']), static_cast<long long>(peq[t0[j] - 'a']));
                const __m256i xv = _mm256_or_si256(eq, mv);
                const __m256i sum = _mm256_add_epi64(_mm256_and_si256(eq, pv), pv);
                const __m256i xh = _mm256_or_si256(_mm256_xor_si256(sum, pv), eq);
                __m256i ph = _mm256_or_si256(mv, _mm256_xor_si256(_mm256_or_si256(xh, pv), ones));
                __m256i mh = _mm256_and_si256(pv, xh);
                const __m256i up = _mm256_and_si256(_mm256_srl_epi64(ph, shift), one);
                const __m256i down = _mm256_and_si256(_mm256_srl_epi64(mh, shift), one);
                score = _mm256_sub_epi64(_mm256_add_epi64(score, up), down);
                ph = _mm256_or_si256(_mm256_slli_epi64(ph, 1), one);
                mh = _mm256_slli_epi64(mh, 1);
                pv = _mm256_or_si256(mh, _mm256_xor_si256(_mm256_or_si256(xv, ph), ones));
                mv = _mm256_and_si256(ph, xv);
            }
            alignas(32) long long lanes[4];
            _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), score);
            for (int k = 0; k < 4; ++k) out[i + k] = static_cast<std::int32_t>(lanes[k]);
        }
    }
    for (; i < count; ++i) out[i] = myers_one(peq, m, texts + i * stride, len);
}

constexpr KernelTable kTable{
    Isa::Avx2, squared_distances, quadratic_forms, min_weighted_distance, batch_edit_distance,
};

}  // namespace

namespace detail {
const KernelTable& avx2_table() { return kTable; }
}  // namespace detail

}  // namespace handsdown::simd
