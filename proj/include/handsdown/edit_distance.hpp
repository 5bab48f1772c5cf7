#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

/// Unit-cost insert/delete/substitute distance over any token sequence.
template <class T>
int sequence_distance(std::span<const T> a, std::span<const T> b) {
    std::vector<int> prev(b.size() + 1);
    std::vector<int> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

int levenshtein(std::string_view a, std::string_view b);

/// Banded computation; returns the distance only when it is <= max_distance.
std::optional<int> bounded_levenshtein(std::string_view a, std::string_view b, int max_distance);

enum class EditKind { Match, Substitute, Insert, Delete };

/// One step of an optimal alignment turning `gold` into `noisy`.
/// gold_pos indexes gold (for Insert: the gold position the letter follows,
/// -1 when inserted before the first letter).
struct EditStep {
    EditKind kind;
    int gold_pos;
    char gold_char;
    char noisy_char;
};

std::vector<EditStep> align(std::string_view gold, std::string_view noisy);

}  // namespace handsdown
