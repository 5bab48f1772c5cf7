#pragma once

// Small 2-D Gaussian mixtures fitted by EM.

#include "handsdown/geometry.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace handsdown {

struct Gaussian2 {
    double weight = 1.0;
    Point mean;
    double sxx = 1.0;
    double sxy = 0.0;
    double syy = 1.0;

    double determinant() const { return sxx * syy - sxy * sxy; }
    bool positive_definite() const { return sxx > 0 && determinant() > 0; }
    double log_density(Point p) const;
};

struct Mixture2 {
    std::vector<Gaussian2> components;

    double log_density(Point p) const;
    Point sample(std::mt19937_64& rng) const;
};

struct GmmFitConfig {
    int components = 2;
    int max_iterations = 200;
    double tolerance = 1e-9;      // on mean log-likelihood
    double regularization = 1e-6;  // added to covariance diagonals
    std::uint64_t seed = 7;
};

/// k-means++ initialisation with a fixed seed, then EM. Deterministic for a
/// given input order. Throws std::invalid_argument on empty input.
Mixture2 fit_mixture(std::span<const Point> samples, const GmmFitConfig& cfg = {});

}  // namespace handsdown
