#pragma once

// Keyboard layout in normalized coordinates: origin top-left, x to the
// right, y downward, both in [0,1].

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

double distance(Point a, Point b);
double squared_distance(Point a, Point b);
bool in_unit_square(Point p);

enum class Hand : std::uint8_t { Left, Right };

enum class ControlKey : std::uint8_t { Space, Enter, Backspace };

std::string_view to_string(Hand h);
std::string_view to_string(ControlKey k);
std::optional<ControlKey> control_from_string(std::string_view s);

/// One key of the layout. `id` is a lowercase letter ("a".."z") or a
/// control id ("space", "enter", "backspace").
struct KeyGeom {
    std::string id;
    Point center;
    double width = 0.0;
    double height = 0.0;
    int row = 0;
    Hand hand = Hand::Left;
    int finger = 0;

    bool contains(Point p) const;
};

class LayoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometry bucket = row (0..2) x hand. Ids 0..5, row-major.
struct Bucket {
    int row = 0;
    Hand hand = Hand::Left;

    int id() const { return row * 2 + (hand == Hand::Left ? 0 : 1); }
    friend bool operator==(const Bucket&, const Bucket&) = default;
};

inline constexpr int kLetterCount = 26;
inline constexpr int kBucketCount = 6;

inline bool is_letter(char c) { return c >= 'a' && c <= 'z'; }
inline int letter_index(char c) { return c - 'a'; }
inline char index_letter(int i) { return static_cast<char>('a' + i); }

/// Outcome of the soft nearest-key kernel: a distribution over the 26
/// letters plus an explicit no-key outcome. When `no_key` is set the whole
/// mass sits on the no-key outcome.
struct SoftKeyDistribution {
    std::array<double, kLetterCount> letter{};
    bool no_key = false;

    double no_key_mass() const { return no_key ? 1.0 : 0.0; }
    char argmax() const;
};

class KeyLayout {
public:
    /// Validates the invariants: all 26 letters present, unique ids, centers
    /// in the unit square, letter rows in 0..2, no overlapping key bounds.
    KeyLayout(std::vector<KeyGeom> keys, int version);

    static KeyLayout qwerty();
    static KeyLayout from_json(std::string_view text);
    static KeyLayout load(const std::filesystem::path& path);
    std::string to_json() const;

    int version() const { return version_; }
    const std::vector<KeyGeom>& keys() const { return keys_; }

    const KeyGeom& letter(char c) const;
    const KeyGeom& key(std::string_view id) const;
    const KeyGeom* find(std::string_view id) const;
    Point center(char c) const { return letter(c).center; }

    /// Control key whose bounds contain p, if any.
    std::optional<ControlKey> control_at(Point p) const;

    /// Letter whose center is closest to p; exact ties go to the smaller
    /// (row, column) position.
    char nearest_key(Point p) const;

    /// q(c|p) proportional to exp(-alpha * |p - center(c)|^2) over letters;
    /// the no-key outcome fires when the nearest center is farther than
    /// no_key_radius(). Throws std::invalid_argument for alpha <= 0.
    SoftKeyDistribution soft_key_distribution(Point p, double alpha) const;

    Bucket geometry_bucket(char c) const;
    Bucket geometry_bucket(std::string_view id) const;

    /// Horizontal distance between adjacent letter centers.
    double key_pitch() const { return key_pitch_; }
    double no_key_radius() const { return no_key_radius_; }

    /// Structure-of-arrays copy of the letter centers, in 'a'..'z' order.
    const std::array<double, kLetterCount>& center_xs() const { return cx_; }
    const std::array<double, kLetterCount>& center_ys() const { return cy_; }

private:
    std::vector<KeyGeom> keys_;
    int version_ = 1;
    std::array<int, kLetterCount> letter_slot_{};
    std::array<int, kLetterCount> scan_order_{};
    std::array<double, kLetterCount> cx_{};
    std::array<double, kLetterCount> cy_{};
    double key_pitch_ = 0.0;
    double no_key_radius_ = 0.0;
};

}  // namespace handsdown
