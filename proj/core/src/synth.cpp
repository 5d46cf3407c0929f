#include "proplab/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include "proplab/parallel.hpp"
#include "proplab/spectral.hpp"

namespace proplab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

// fGn autocovariance at lag k for unit-variance increments.
double fgn_gamma(std::size_t k, double hurst) {
    const double h2 = 2.0 * hurst;
    const double kk = static_cast<double>(k);
    return 0.5 * (std::pow(kk + 1.0, h2) - 2.0 * std::pow(kk, h2) +
                  std::pow(std::abs(kk - 1.0), h2));
}

std::string date_for_day(int day_index) {
    using namespace std::chrono;
    const sys_days base = sys_days{year{2020} / January / 6};
    const year_month_day ymd{base + days{day_index}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace

double ChangeProb::operator()(double imbalance) const {
    double p = p0;
    if (family == Family::Pinning)
        p = p0 * (1.0 - std::pow(std::abs(imbalance), gamma));
    return std::clamp(p, clip_lo, clip_hi);
}

namespace {

// Circulant-embedding sampler for a stationary zero-mean Gaussian series
// with autocovariance gamma(k).
template <typename GammaFn>
std::vector<double> circulant_gaussian(std::size_t n, GammaFn gamma, std::uint64_t seed) {
    if (n == 0) return {};
    if (n == 1) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        return {normal(rng)};
    }

    // embedding size: a power of two at least 2(n-1)
    std::size_t m = 2;
    while (m < 2 * (n - 1)) m *= 2;

    std::vector<double> cov(m);
    for (std::size_t k = 0; k <= m / 2; ++k) cov[k] = gamma(k);
    for (std::size_t k = 1; k < m / 2; ++k) cov[m - k] = cov[k];

    auto lambda = fft_padded(cov, m);
    for (auto& l : lambda) {
        double v = l.real();
        if (v < -1e-8 * static_cast<double>(m))
            throw std::runtime_error(
                "circulant embedding produced a negative eigenvalue; persistence target unreachable");
        l = {std::max(v, 0.0), 0.0};
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<std::complex<double>> w(m);
    w[0] = {std::sqrt(lambda[0].real()) * normal(rng), 0.0};
    w[m / 2] = {std::sqrt(lambda[m / 2].real()) * normal(rng), 0.0};
    for (std::size_t k = 1; k < m / 2; ++k) {
        const double scale = std::sqrt(0.5 * lambda[k].real());
        const double a = normal(rng), b = normal(rng);
        w[k] = {scale * a, scale * b};
        w[m - k] = std::conj(w[k]);
    }

    // One forward transform of the spectral amplitudes yields the sample.
    std::vector<double> re(m), im(m);
    for (std::size_t k = 0; k < m; ++k) {
        re[k] = w[k].real();
        im[k] = w[k].imag();
    }
    auto fre = fft_padded(re, m);
    auto fim = fft_padded(im, m);
    const double norm = 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t)
        out[t] = (fre[t].real() - fim[t].imag()) * norm;
    return out;
}

}  // namespace

std::vector<double> fgn(std::size_t n, double hurst, std::uint64_t seed) {
    if (!(hurst > 0.0 && hurst < 1.0))
        throw std::invalid_argument("fgn: hurst must lie in (0, 1)");
    return circulant_gaussian(n, [hurst](std::size_t k) { return fgn_gamma(k, hurst); }, seed);
}

std::vector<double> gen_sign_flow(std::size_t n, double hurst, std::uint64_t seed) {
    if (!(hurst > 0.0 && hurst < 1.0))
        throw std::invalid_argument("gen_sign_flow: hurst must lie in (0, 1)");
    // Thresholding compresses Gaussian correlations by the arcsine law,
    // sign autocorr = (2/pi) asin(rho). Driving with rho = sin(pi/2 gamma)
    // makes the signs carry the fGn autocovariance of the target exactly.
    const auto x = circulant_gaussian(
        n,
        [hurst](std::size_t k) {
            return k == 0 ? 1.0 : std::sin(0.5 * std::numbers::pi * fgn_gamma(k, hurst));
        },
        seed);
    std::vector<double> signs(n);
    for (std::size_t t = 0; t < n; ++t) signs[t] = x[t] > 0.0 ? 1.0 : -1.0;
    return signs;
}

std::vector<Label> gen_labels(std::span<const double> signs, const ChangeProb& change_prob,
                              std::uint64_t seed) {
    if (change_prob.window < 1) throw std::invalid_argument("gen_labels: window must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<Label> labels(signs.size());
    double rolling = 0.0;
    const std::size_t w = static_cast<std::size_t>(change_prob.window);
    for (std::size_t t = 0; t < signs.size(); ++t) {
        rolling += signs[t];
        if (t >= w) rolling -= signs[t - w];
        const double imbalance = rolling / static_cast<double>(std::min(t + 1, w));
        labels[t] = uniform(rng) < change_prob(imbalance) ? Label::c : Label::n;
    }
    return labels;
}

std::vector<double> gen_returns(std::span<const double> signs, std::span<const Label> labels,
                                const CalibratedModel& generator, double noise,
                                std::uint64_t seed, bool noise_on_n) {
    if (signs.size() != labels.size()) throw std::invalid_argument("gen_returns: misaligned inputs");
    if (noise_on_n)
        throw std::invalid_argument("gen_returns: noise on n events would break the label contract");
    if (noise < 0.0) throw std::invalid_argument("gen_returns: negative noise");

    const std::size_t t_len = signs.size();
    std::vector<double> r(t_len, 0.0);
    switch (generator.kind) {
        case ModelKind::CIM2: {
            const double delta = generator.delta_c();
            if (delta <= 0.0) throw std::invalid_argument("gen_returns: CIM2 needs delta_c > 0");
            for (std::size_t t = 0; t < t_len; ++t)
                if (labels[t] == Label::c) r[t] = delta * signs[t];
            break;
        }
        case ModelKind::TIM1: {
            const auto& g = generator.kernel("g");
            for (std::size_t t = 0; t < t_len; ++t) {
                const std::size_t jmax = std::min(t, g.size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) acc += g[j] * signs[t - j];
                r[t] = acc;
            }
            break;
        }
        case ModelKind::TIM2: {
            const auto& gn = generator.kernel("g_n");
            const auto& gc = generator.kernel("g_c");
            for (std::size_t t = 0; t < t_len; ++t) {
                const std::size_t jmax = std::min(t, gn.size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j)
                    acc += (labels[t - j] == Label::c ? gc[j] : gn[j]) * signs[t - j];
                r[t] = acc;
            }
            break;
        }
        case ModelKind::HDIM2:
        case ModelKind::HDIM2star: {
            const auto& kn = generator.kernel("kappa_nc");
            const auto& kc = generator.kernel("kappa_cc");
            for (std::size_t t = 0; t < t_len; ++t) {
                if (labels[t] != Label::c) continue;
                const std::size_t jmax = std::min(t, kn.size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j)
                    acc += (labels[t - j] == Label::c ? kc[j] : kn[j]) * signs[t - j];
                r[t] = acc;
            }
            break;
        }
    }

    if (noise > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, noise);
        for (std::size_t t = 0; t < t_len; ++t)
            if (labels[t] == Label::c) r[t] += normal(rng);
    }
    return r;
}

InstrumentData generate(const FlowSpec& spec) {
    if (spec.events_per_day < 2 || spec.days < 1)
        throw std::invalid_argument("generate: need at least 2 events per day and 1 day");

    InstrumentData data;
    data.instrument_id = spec.instrument_id;
    data.days.resize(static_cast<std::size_t>(spec.days));

    const std::int64_t session_ms = 23'400'000;  // 6.5 hours
    const std::int64_t spacing =
        std::max<std::int64_t>(1, session_ms / spec.events_per_day);

    parallel_for(static_cast<std::size_t>(spec.days), [&](std::size_t d) {
        const std::uint64_t day_seed = mix_seed(spec.seed, 1000 + d);
        const std::size_t t_len = static_cast<std::size_t>(spec.events_per_day);

        const auto signs = gen_sign_flow(t_len, spec.sign_memory, mix_seed(day_seed, 1));
        const auto labels = gen_labels(signs, spec.change_prob, mix_seed(day_seed, 2));
        const auto rets =
            gen_returns(signs, labels, spec.generator, spec.noise, mix_seed(day_seed, 3));

        std::mt19937_64 vol_rng(mix_seed(day_seed, 4));
        std::normal_distribution<double> normal;

        DaySeries day;
        day.date = date_for_day(static_cast<int>(d));
        day.events.resize(t_len);
        double log_mid = std::log(100.0);
        for (std::size_t t = 0; t < t_len; ++t) {
            TradeEvent& ev = day.events[t];
            ev.t_ms = static_cast<std::int64_t>(t) * spacing;
            ev.sign = signs[t] > 0.0 ? +1 : -1;
            ev.label = labels[t];
            ev.log_mid = log_mid;
            const double next = log_mid + rets[t];
            ev.ret = next - log_mid;  // the stored return is the stored mid difference
            ev.volume = std::exp(spec.volume_sigma * normal(vol_rng));
            log_mid = next;
        }
        data.days[d] = std::move(day);
    });

    const std::size_t shortest = data.shortest_day();
    data.max_lag = static_cast<int>(
        std::min<std::size_t>(shortest - 1, static_cast<std::size_t>(spec.max_lag_cap)));
    return data;
}

CalibratedModel make_cim2(double delta_c) {
    if (delta_c <= 0.0) throw std::invalid_argument("make_cim2: delta_c must be positive");
    CalibratedModel model;
    model.kind = ModelKind::CIM2;
    model.max_lag = 0;
    model.kernels["delta_c"] = {delta_c};
    return model;
}

CalibratedModel make_power_law_model(ModelKind kind, int max_lag, double amplitude,
                                     double exponent, double n_scale) {
    if (max_lag < 0) throw std::invalid_argument("make_power_law_model: negative max_lag");
    std::vector<double> k(static_cast<std::size_t>(max_lag) + 1);
    for (std::size_t j = 0; j < k.size(); ++j)
        k[j] = amplitude * std::pow(static_cast<double>(j + 1), -exponent);

    CalibratedModel model;
    model.kind = kind;
    model.max_lag = max_lag;
    switch (kind) {
        case ModelKind::TIM1:
            model.kernels["g"] = k;
            break;
        case ModelKind::TIM2: {
            model.kernels["g_c"] = k;
            for (double& v : k) v *= n_scale;
            model.kernels["g_n"] = k;
            break;
        }
        case ModelKind::HDIM2:
        case ModelKind::HDIM2star: {
            model.kernels["kappa_cc"] = k;
            for (double& v : k) v *= n_scale;
            k[0] = 0.0;  // never used, pinned by convention
            model.kernels["kappa_nc"] = k;
            break;
        }
        case ModelKind::CIM2:
            throw std::invalid_argument("make_power_law_model: CIM2 has no kernel");
    }
    return model;
}

}  // namespace proplab
