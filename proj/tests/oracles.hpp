// Independent reference implementations used to pin expected values in tests.
// Everything here is deliberately brute-force and shares no code with the
// spectral estimators it checks.
#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "proplab/spectral.hpp"

namespace oracles {

inline proplab::CrossCorr2 xcorr2_direct(std::span<const double> f, std::span<const double> g,
                                         int max_lag) {
    const int t_len = static_cast<int>(f.size());
    proplab::CrossCorr2 out;
    out.max_lag = max_lag;
    out.values.assign(2 * static_cast<std::size_t>(max_lag) + 1, 0.0);
    out.counts.assign(out.values.size(), 0.0);
    for (int l = -max_lag; l <= max_lag; ++l) {
        double acc = 0.0;
        long count = 0;
        for (int t = 0; t < t_len; ++t) {
            const int u = t + l;
            if (u < 0 || u >= t_len) continue;
            acc += f[static_cast<std::size_t>(t)] * g[static_cast<std::size_t>(u)];
            ++count;
        }
        if (count > 0) {
            out.values[static_cast<std::size_t>(l + max_lag)] = acc / static_cast<double>(count);
            out.counts[static_cast<std::size_t>(l + max_lag)] = static_cast<double>(count);
        }
    }
    return out;
}

inline proplab::CrossCorr3 xcorr3_direct(std::span<const double> f, std::span<const double> g,
                                         std::span<const double> h, int max_lag) {
    const int t_len = static_cast<int>(f.size());
    proplab::CrossCorr3 out;
    out.max_lag = max_lag;
    const std::size_t dim = out.dim();
    out.values.assign(dim * dim, 0.0);
    out.counts.assign(dim * dim, 0.0);
    out.mask.assign(dim * dim, 0);
    for (int l = -max_lag; l <= max_lag; ++l) {
        for (int j = -max_lag; j <= max_lag; ++j) {
            if (std::abs(l - j) > max_lag) continue;
            double acc = 0.0;
            long count = 0;
            for (int t = 0; t < t_len; ++t) {
                const int u = t + l, v = t + j;
                if (u < 0 || u >= t_len || v < 0 || v >= t_len) continue;
                acc += f[static_cast<std::size_t>(t)] * g[static_cast<std::size_t>(u)] *
                       h[static_cast<std::size_t>(v)];
                ++count;
            }
            if (count > 0) {
                const std::size_t k = out.idx(l, j);
                out.values[k] = acc / static_cast<double>(count);
                out.counts[k] = static_cast<double>(count);
                out.mask[k] = 1;
            }
        }
    }
    return out;
}

inline std::vector<double> rademacher(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
    return v;
}

inline std::vector<double> gaussian(std::size_t n, unsigned seed, double sigma = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
}

// |got - want| <= atol + rtol * |want|: relative comparison with an absolute
// floor, matching the estimator tolerances.
inline bool close(double got, double want, double rtol = 1e-10, double atol = 1e-12) {
    return std::abs(got - want) <= atol + rtol * std::abs(want);
}

}  // namespace oracles
