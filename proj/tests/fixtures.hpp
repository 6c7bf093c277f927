#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "microloc/quantize.hpp"

namespace microloc::fixtures {

// random spectrum with Gaussian envelope of width bw, times a Gaussian of width w at c
inline Field localized_random(const Grid& g, std::mt19937& rng, double c, double w, double bw) {
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& z : f.v) z = {nd(rng), nd(rng)};
    Field s = forward(f);
    multiply_spectrum(s, [bw](double xi) { return cplx(std::exp(-xi * xi / (2 * bw * bw))); });
    f = inverse(s);
    for (int i = 0; i < g.n; ++i) f.v[i] *= std::exp(-(g.x(i) - c) * (g.x(i) - c) / (2 * w * w));
    return f;
}

// max over `count` random fields of max(r, 1/r), r = dyadic_norm / weighted_norm
inline double norm_equivalence_constant(const DyadicPartition& part, double nu, double k, int count,
                                        unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ud(0, 1);
    const Grid& g = part.grid;
    double c0 = 1.0;
    for (int t = 0; t < count; ++t) {
        double c = (2 * ud(rng) - 1) * 0.4 * g.L;
        double w = std::pow(10.0, 1.5 * ud(rng) - 0.5), bw = std::pow(10.0, 1.5 * ud(rng) - 0.5);
        Field f = localized_random(g, rng, c, w, bw);
        double r = dyadic_norm(f, nu, k, part) / weighted_norm(f, nu, k);
        c0 = std::max({c0, r, 1 / r});
    }
    return c0;
}

}  // namespace microloc::fixtures
