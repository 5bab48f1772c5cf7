#include "handsdown/geometry.hpp"

#include "handsdown/simd/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace handsdown {

using nlohmann::json;

double squared_distance(Point a, Point b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double distance(Point a, Point b) { return std::sqrt(squared_distance(a, b)); }

bool in_unit_square(Point p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 &&
           p.y <= 1.0;
}

std::string_view to_string(Hand h) { return h == Hand::Left ? "left" : "right"; }

std::string_view to_string(ControlKey k) {
    switch (k) {
        case ControlKey::Space: return "space";
        case ControlKey::Enter: return "enter";
        case ControlKey::Backspace: return "backspace";
    }
    return "?";
}

std::optional<ControlKey> control_from_string(std::string_view s) {
    if (s == "space") return ControlKey::Space;
    if (s == "enter") return ControlKey::Enter;
    if (s == "backspace") return ControlKey::Backspace;
    return std::nullopt;
}

bool KeyGeom::contains(Point p) const {
    return std::abs(p.x - center.x) <= width / 2 && std::abs(p.y - center.y) <= height / 2;
}

char SoftKeyDistribution::argmax() const {
    if (no_key) return '\0';
    int best = 0;
    for (int i = 1; i < kLetterCount; ++i) {
        if (letter[i] > letter[best]) best = i;
    }
    return index_letter(best);
}

namespace {

bool single_letter(std::string_view id) { return id.size() == 1 && is_letter(id[0]); }

bool overlaps(const KeyGeom& a, const KeyGeom& b) {
    const double ox = (a.width + b.width) / 2 - std::abs(a.center.x - b.center.x);
    const double oy = (a.height + b.height) / 2 - std::abs(a.center.y - b.center.y);
    constexpr double kSlack = 1e-12;
    return ox > kSlack && oy > kSlack;
}

}  // namespace

KeyLayout::KeyLayout(std::vector<KeyGeom> keys, int version) : keys_(std::move(keys)), version_(version) {
    letter_slot_.fill(-1);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        const KeyGeom& k = keys_[i];
        if (!ids.insert(k.id).second) throw LayoutError("duplicate key id: " + k.id);
        if (!in_unit_square(k.center)) throw LayoutError("key center outside the unit square: " + k.id);
        if (!(k.width > 0) || !(k.height > 0)) throw LayoutError("key without extent: " + k.id);
        if (single_letter(k.id)) {
            if (k.row < 0 || k.row > 2) throw LayoutError("letter row must be 0..2: " + k.id);
            letter_slot_[letter_index(k.id[0])] = static_cast<int>(i);
        } else if (!control_from_string(k.id)) {
            throw LayoutError("unknown key id: " + k.id);
        }
    }
    for (int c = 0; c < kLetterCount; ++c) {
        if (letter_slot_[c] < 0) throw LayoutError(std::string("layout lacks letter ") + index_letter(c));
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        for (std::size_t j = i + 1; j < keys_.size(); ++j) {
            if (overlaps(keys_[i], keys_[j])) {
                throw LayoutError("keys overlap: " + keys_[i].id + " and " + keys_[j].id);
            }
        }
    }

    for (int c = 0; c < kLetterCount; ++c) {
        cx_[c] = keys_[letter_slot_[c]].center.x;
        cy_[c] = keys_[letter_slot_[c]].center.y;
    }
    std::iota(scan_order_.begin(), scan_order_.end(), 0);
    std::sort(scan_order_.begin(), scan_order_.end(), [&](int a, int b) {
        const KeyGeom& ka = keys_[letter_slot_[a]];
        const KeyGeom& kb = keys_[letter_slot_[b]];
        if (ka.row != kb.row) return ka.row < kb.row;
        return ka.center.x < kb.center.x;
    });

    // Pitch: smallest horizontal gap between same-row letter centers.
    key_pitch_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < kLetterCount; ++i) {
        const KeyGeom& a = keys_[letter_slot_[scan_order_[i]]];
        const KeyGeom& b = keys_[letter_slot_[scan_order_[i + 1]]];
        if (a.row == b.row) key_pitch_ = std::min(key_pitch_, b.center.x - a.center.x);
    }
    const KeyGeom& ref = keys_[letter_slot_[0]];
    no_key_radius_ = 0.75 * std::hypot(ref.width, ref.height);
}

KeyLayout KeyLayout::qwerty() {
    struct RowSpec {
        std::string_view letters;
        double x0;
        double y;
    };
    constexpr double kW = 0.1;
    constexpr double kH = 0.25;
    const RowSpec rows[] = {{"qwertyuiop", 0.05, 0.125}, {"asdfghjkl", 0.10, 0.375}, {"zxcvbnm", 0.20, 0.625}};
    // Touch-typing finger assignment: 0..3 left pinky..index, 4/5 thumbs, 6..9 right index..pinky.
    auto finger_of = [](char c) {
        switch (c) {
            case 'q': case 'a': case 'z': return 0;
            case 'w': case 's': case 'x': return 1;
            case 'e': case 'd': case 'c': return 2;
            case 'r': case 'f': case 'v': case 't': case 'g': case 'b': return 3;
            case 'y': case 'h': case 'n': case 'u': case 'j': case 'm': return 6;
            case 'i': case 'k': return 7;
            case 'o': case 'l': return 8;
            default: return 9;
        }
    };
    std::vector<KeyGeom> keys;
    for (int r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < rows[r].letters.size(); ++i) {
            const char c = rows[r].letters[i];
            const int f = finger_of(c);
            keys.push_back(KeyGeom{std::string(1, c), {rows[r].x0 + kW * static_cast<double>(i), rows[r].y},
                                   kW, kH, r, f <= 4 ? Hand::Left : Hand::Right, f});
        }
    }
    keys.push_back(KeyGeom{"backspace", {0.925, 0.625}, 0.15, kH, 2, Hand::Right, 9});
    keys.push_back(KeyGeom{"space", {0.5, 0.875}, 0.5, kH, 3, Hand::Right, 5});
    keys.push_back(KeyGeom{"enter", {0.875, 0.875}, 0.25, kH, 3, Hand::Right, 9});
    return KeyLayout(std::move(keys), 1);
}

KeyLayout KeyLayout::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LayoutError(std::string("layout JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("layout_version") || !doc.contains("keys")) {
        throw LayoutError("layout JSON needs layout_version and keys");
    }
    std::vector<KeyGeom> keys;
    try {
        for (const auto& [id, k] : doc.at("keys").items()) {
            const std::string hand = k.at("hand").get<std::string>();
            if (hand != "left" && hand != "right") throw LayoutError("bad hand for key " + id);
            keys.push_back(KeyGeom{id,
                                   {k.at("cx").get<double>(), k.at("cy").get<double>()},
                                   k.at("w").get<double>(),
                                   k.at("h").get<double>(),
                                   k.at("row").get<int>(),
                                   hand == "left" ? Hand::Left : Hand::Right,
                                   k.at("finger").get<int>()});
        }
        return KeyLayout(std::move(keys), doc.at("layout_version").get<int>());
    } catch (const json::exception& e) {
        throw LayoutError(std::string("layout JSON: ") + e.what());
    }
}

KeyLayout KeyLayout::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LayoutError("cannot open layout file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string KeyLayout::to_json() const {
    json keys = json::object();
    for (const KeyGeom& k : keys_) {
        keys[k.id] = json{{"cx", k.center.x}, {"cy", k.center.y}, {"w", k.width}, {"h", k.height},
                          {"row", k.row},     {"hand", to_string(k.hand)},       {"finger", k.finger}};
    }
    json doc{{"layout_version", version_}, {"keys", std::move(keys)}};
    return doc.dump(2) + "\n";
}

const KeyGeom& KeyLayout::letter(char c) const {
    if (!is_letter(c)) throw std::invalid_argument(std::string("not a letter key: ") + c);
    return keys_[letter_slot_[letter_index(c)]];
}

const KeyGeom* KeyLayout::find(std::string_view id) const {
    for (const KeyGeom& k : keys_) {
        if (k.id == id) return &k;
    }
    return nullptr;
}

const KeyGeom& KeyLayout::key(std::string_view id) const {
    if (const KeyGeom* k = find(id)) return *k;
    throw std::invalid_argument("unknown key id: " + std::string(id));
}

std::optional<ControlKey> KeyLayout::control_at(Point p) const {
    for (const KeyGeom& k : keys_) {
        if (single_letter(k.id)) continue;
        if (k.contains(p)) return control_from_string(k.id);
    }
    return std::nullopt;
}

char KeyLayout::nearest_key(Point p) const {
    std::array<double, kLetterCount> d2{};
    simd::kernels().squared_distances(p.x, p.y, cx_.data(), cy_.data(), kLetterCount, d2.data());
    int best = scan_order_[0];
    for (int i = 1; i < kLetterCount; ++i) {
        const int c = scan_order_[i];
        if (d2[c] < d2[best]) best = c;
    }
    return index_letter(best);
}

SoftKeyDistribution KeyLayout::soft_key_distribution(Point p, double alpha) const {
    if (!(alpha > 0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("soft key kernel needs a positive finite alpha");
    }
    std::array<double, kLetterCount> d2{};
    simd::kernels().squared_distances(p.x, p.y, cx_.data(), cy_.data(), kLetterCount, d2.data());
    const double nearest = *std::min_element(d2.begin(), d2.end());

    SoftKeyDistribution out;
    if (std::sqrt(nearest) > no_key_radius_) {
        out.no_key = true;
        return out;
    }
    // Shifted by the nearest distance so the largest term is exp(0).
    double total = 0.0;
    for (int c = 0; c < kLetterCount; ++c) {
        out.letter[c] = std::exp(-alpha * (d2[c] - nearest));
        total += out.letter[c];
    }
    for (double& q : out.letter) q /= total;
    return out;
}

Bucket KeyLayout::geometry_bucket(char c) const {
    const KeyGeom& k = letter(c);
    return Bucket{k.row, k.hand};
}

Bucket KeyLayout::geometry_bucket(std::string_view id) const {
    if (!single_letter(id)) throw std::invalid_argument("geometry buckets are defined for letter keys only");
    return geometry_bucket(id[0]);
}

}  // namespace handsdown
