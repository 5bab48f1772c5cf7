#include "handsdown/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace handsdown {

double Gaussian2::log_density(Point p) const {
    const double det = determinant();
    const double dx = p.x - mean.x;
    const double dy = p.y - mean.y;
    const double q = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    return -0.5 * q - std::log(2.0 * std::numbers::pi * std::sqrt(det));
}

double Mixture2::log_density(Point p) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(components.size());
    for (const Gaussian2& g : components) {
        terms.push_back(std::log(g.weight) + g.log_density(p));
        best = std::max(best, terms.back());
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
}

Point Mixture2::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng);
    const Gaussian2* g = &components.back();
    for (const Gaussian2& c : components) {
        if (u < c.weight) {
            g = &c;
            break;
        }
        u -= c.weight;
    }
    std::normal_distribution<double> n01(0.0, 1.0);
    const double z1 = n01(rng);
    const double z2 = n01(rng);
    // Cholesky of [[sxx, sxy], [sxy, syy]].
    const double l11 = std::sqrt(g->sxx);
    const double l21 = g->sxy / l11;
    const double l22 = std::sqrt(std::max(0.0, g->syy - l21 * l21));
    return {g->mean.x + l11 * z1, g->mean.y + l21 * z1 + l22 * z2};
}

namespace {

std::vector<Point> kmeans_init(std::span<const Point> xs, int k, std::mt19937_64& rng) {
    std::vector<Point> centers;
    std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
    centers.push_back(xs[pick(rng)]);
    std::vector<double> d2(xs.size());
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const Point& c : centers) best = std::min(best, squared_distance(xs[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            centers.push_back(centers.front());
            continue;
        }
        std::uniform_real_distribution<double> uni(0.0, total);
        double u = uni(rng);
        std::size_t chosen = xs.size() - 1;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (u < d2[i]) {
                chosen = i;
                break;
            }
            u -= d2[i];
        }
        centers.push_back(xs[chosen]);
    }
    // A few Lloyd iterations.
    std::vector<int> assign(xs.size(), 0);
    for (int it = 0; it < 20; ++it) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c) {
                if (squared_distance(xs[i], centers[static_cast<std::size_t>(c)]) <
                    squared_distance(xs[i], centers[static_cast<std::size_t>(best)])) {
                    best = c;
                }
            }
            assign[i] = best;
        }
        for (int c = 0; c < k; ++c) {
            double sx = 0, sy = 0;
            int n = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (assign[i] != c) continue;
                sx += xs[i].x;
                sy += xs[i].y;
                ++n;
            }
            if (n > 0) centers[static_cast<std::size_t>(c)] = {sx / n, sy / n};
        }
    }
    return centers;
}

}  // namespace

Mixture2 fit_mixture(std::span<const Point> xs, const GmmFitConfig& cfg) {
    if (xs.empty()) throw std::invalid_argument("cannot fit a mixture to no samples");
    if (cfg.components < 1) throw std::invalid_argument("mixture needs at least one component");
    const int k = cfg.components;
    const std::size_t n = xs.size();
    std::mt19937_64 rng(cfg.seed);

    Mixture2 mix;
    const std::vector<Point> centers = kmeans_init(xs, k, rng);
    double vx = 0, vy = 0, mx = 0, my = 0;
    for (const Point& p : xs) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (const Point& p : xs) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
    }
    vx = vx / static_cast<double>(n) + cfg.regularization;
    vy = vy / static_cast<double>(n) + cfg.regularization;
    for (int c = 0; c < k; ++c) {
        mix.components.push_back(Gaussian2{1.0 / k, centers[static_cast<std::size_t>(c)], vx, 0.0, vy});
    }

    std::vector<double> resp(n * static_cast<std::size_t>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        // E step.
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const Gaussian2& g = mix.components[static_cast<std::size_t>(c)];
                const double v = std::log(g.weight) + g.log_density(xs[i]);
                resp[i * k + c] = v;
                best = std::max(best, v);
            }
            double s = 0.0;
            for (int c = 0; c < k; ++c) s += std::exp(resp[i * k + c] - best);
            const double lse = best + std::log(s);
            ll += lse;
            for (int c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
        }
        ll /= static_cast<double>(n);

        // M step.
        for (int c = 0; c < k; ++c) {
            double nk = 0, sx = 0, sy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                nk += r;
                sx += r * xs[i].x;
                sy += r * xs[i].y;
            }
            Gaussian2& g = mix.components[static_cast<std::size_t>(c)];
            if (nk < 1e-12) continue;  // starved component keeps its parameters
            g.mean = {sx / nk, sy / nk};
            double cxx = 0, cxy = 0, cyy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                const double dx = xs[i].x - g.mean.x;
                const double dy = xs[i].y - g.mean.y;
                cxx += r * dx * dx;
                cxy += r * dx * dy;
                cyy += r * dy * dy;
            }
            g.sxx = cxx / nk + cfg.regularization;
            g.sxy = cxy / nk;
            g.syy = cyy / nk + cfg.regularization;
            g.weight = nk / static_cast<double>(n);
        }
        double wsum = 0.0;
        for (const Gaussian2& g : mix.components) wsum += g.weight;
        for (Gaussian2& g : mix.components) g.weight /= wsum;

        if (std::abs(ll - prev_ll) < cfg.tolerance) break;
        prev_ll = ll;
    }
    return mix;
}

}  // namespace handsdown
