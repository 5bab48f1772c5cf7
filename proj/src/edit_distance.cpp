#include "handsdown/edit_distance.hpp"

#include <cstdlib>
#include <limits>

namespace handsdown {

int levenshtein(std::string_view a, std::string_view b) {
    return sequence_distance<char>(std::span<const char>(a.data(), a.size()),
                                   std::span<const char>(b.data(), b.size()));
}

std::optional<int> bounded_levenshtein(std::string_view a, std::string_view b, int max_distance) {
    if (max_distance < 0) return std::nullopt;
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    if (std::abs(n - m) > max_distance) return std::nullopt;

    // Only cells with |i - j| <= max_distance can stay within the bound.
    const int inf = std::numeric_limits<int>::max() / 2;
    std::vector<int> prev(m + 1, inf);
    std::vector<int> cur(m + 1, inf);
    for (int j = 0; j <= std::min(m, max_distance); ++j) prev[j] = j;
    for (int i = 1; i <= n; ++i) {
        const int lo = std::max(1, i - max_distance);
        const int hi = std::min(m, i + max_distance);
        std::fill(cur.begin(), cur.end(), inf);
        if (i <= max_distance) cur[0] = i;
        int row_min = cur[0];
        for (int j = lo; j <= hi; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > max_distance) return std::nullopt;
        std::swap(prev, cur);
    }
    if (prev[m] > max_distance) return std::nullopt;
    return prev[m];
}

std::vector<EditStep> align(std::string_view gold, std::string_view noisy) {
    const std::size_t n = gold.size();
    const std::size_t m = noisy.size();
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            d[i][j] = std::min({d[i - 1][j - 1] + (gold[i - 1] == noisy[j - 1] ? 0 : 1), d[i - 1][j] + 1,
                                d[i][j - 1] + 1});
        }
    }
    std::vector<EditStep> steps;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (gold[i - 1] == noisy[j - 1] ? 0 : 1)) {
            const bool same = gold[i - 1] == noisy[j - 1];
            steps.push_back({same ? EditKind::Match : EditKind::Substitute, static_cast<int>(i - 1), gold[i - 1],
                             noisy[j - 1]});
            --i;
            --j;
        } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
            steps.push_back({EditKind::Delete, static_cast<int>(i - 1), gold[i - 1], '\0'});
            --i;
        } else {
            steps.push_back({EditKind::Insert, static_cast<int>(i) - 1, '\0', noisy[j - 1]});
            --j;
        }
    }
    std::reverse(steps.begin(), steps.end());
    return steps;
}

}  // namespace handsdown
