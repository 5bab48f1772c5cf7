#include "handsdown/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace handsdown::simd {
namespace {

void squared_distances(double px, double py, const double* cx, const double* cy, std::size_t n,
                       double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = px - cx[i];
        const double dy = py - cy[i];
        out[i] = dx * dx + dy * dy;
    }
}

void quadratic_forms(double px, double py, const double* cx, const double* cy, const double* a,
                     const double* b, const double* c, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
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
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = qx - px[i];
        const double dy = qy - py[i];
        const double d = std::sqrt(dx * dx + dy * dy);
        const double s = d / std::max(w[i], eps);
        best = std::min(best, s);
    }
    return best;
}

// Myers / Hyyro bit-parallel global edit distance, one text at a time.
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

void batch_edit_distance(const std::uint64_t* peq, int m, const char* texts, std::size_t count,
                         int len, std::int32_t* out) {
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = myers_one(peq, m, texts + i * static_cast<std::size_t>(len), len);
    }
}

constexpr KernelTable kTable{
    Isa::Scalar, squared_distances, quadratic_forms, min_weighted_distance, batch_edit_distance,
};

}  // namespace

namespace detail {
const KernelTable& scalar_table() { return kTable; }
}  // namespace detail

}  // namespace handsdown::simd
