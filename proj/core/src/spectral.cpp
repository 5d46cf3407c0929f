#include "proplab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace proplab {

namespace {

// FFTW plan creation is not thread-safe; execution on distinct buffers is.
// Plans are cached per (kind, size) for the process lifetime and created with
// FFTW_ESTIMATE so that results do not depend on planner timing.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int kind, std::size_t n) {
        const std::uint64_t key = (static_cast<std::uint64_t>(kind) << 56) | n;
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::vector<std::complex<double>> scratch(kind == 2 ? n * n : n);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = nullptr;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        switch (kind) {
            case 0:
                plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, flags);
                break;
            case 1:
                plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, flags);
                break;
            case 2:
                plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf,
                                        FFTW_BACKWARD, flags);
                break;
            default:
                throw std::logic_error("unknown plan kind");
        }
        if (!plan) throw std::runtime_error("fftw plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::unordered_map<std::uint64_t, fftw_plan> plans_;
};

void execute_inplace(fftw_plan plan, std::complex<double>* data) {
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, buf, buf);
}

int lag_span(int l, int j) {
    const int hi = std::max({0, l, j});
    const int lo = std::min({0, l, j});
    return hi - lo;
}

std::size_t circular_index(int lag, std::size_t padded) {
    const long p = static_cast<long>(padded);
    long idx = lag % p;
    if (idx < 0) idx += p;
    return static_cast<std::size_t>(idx);
}

void check_series(std::size_t len_f, std::size_t len_g, int max_lag) {
    if (len_f == 0 || len_g == 0) throw std::invalid_argument("xcorr: empty series");
    if (len_f != len_g) throw std::invalid_argument("xcorr: length mismatch");
    if (max_lag < 0) throw std::invalid_argument("xcorr: negative max_lag");
    if (static_cast<std::size_t>(max_lag) >= len_f)
        throw std::invalid_argument("xcorr: max_lag must be below the series length");
}

}  // namespace

std::size_t next_fast_len(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t k = m;
        while (k % 2 == 0) k /= 2;
        while (k % 3 == 0) k /= 3;
        while (k % 5 == 0) k /= 5;
        if (k == 1) return m;
    }
}

std::vector<std::complex<double>> fft_padded(std::span<const double> x, std::size_t padded_len) {
    if (padded_len < x.size()) throw std::invalid_argument("fft_padded: padded_len below series length");
    std::vector<std::complex<double>> buf(padded_len, {0.0, 0.0});
    for (std::size_t t = 0; t < x.size(); ++t) buf[t] = {x[t], 0.0};
    execute_inplace(PlanCache::instance().get(0, padded_len), buf.data());
    return buf;
}

std::vector<std::complex<double>> bispectrum(std::span<const std::complex<double>> F,
                                             std::span<const std::complex<double>> G,
                                             std::span<const std::complex<double>> H) {
    const std::size_t p = F.size();
    if (G.size() != p || H.size() != p) throw std::invalid_argument("bispectrum: spectrum length mismatch");
    std::vector<std::complex<double>> b(p * p);
    for (std::size_t a = 0; a < p; ++a) {
        const std::complex<double> ga = G[a];
        std::size_t sum = a;  // (a + b) mod p, incremented alongside b
        for (std::size_t bb = 0; bb < p; ++bb) {
            b[a * p + bb] = std::conj(F[sum]) * ga * H[bb];
            if (++sum == p) sum = 0;
        }
    }
    return b;
}

namespace {

// Shared finish step: backward transform holds P * sum_t f(t) g(t+l) per
// circular bin; unbiased values divide the linear sum by the true count.
CrossCorr2 finish_xcorr2(std::vector<std::complex<double>>& spec, std::size_t t_len,
                         int max_lag, double n_segments) {
    const std::size_t p = spec.size();
    execute_inplace(PlanCache::instance().get(1, p), spec.data());
    CrossCorr2 out;
    out.max_lag = max_lag;
    out.values.assign(2 * static_cast<std::size_t>(max_lag) + 1, 0.0);
    out.counts.assign(out.values.size(), 0.0);
    for (int l = -max_lag; l <= max_lag; ++l) {
        const double count = static_cast<double>(t_len) - std::abs(l);
        if (count <= 0) continue;
        const double raw = spec[circular_index(l, p)].real() / static_cast<double>(p);
        out.values[static_cast<std::size_t>(l + max_lag)] = raw / (count * n_segments);
        out.counts[static_cast<std::size_t>(l + max_lag)] = count * n_segments;
    }
    return out;
}

CrossCorr3 finish_xcorr3(std::vector<std::complex<double>>& bisp, std::size_t p,
                         std::size_t t_len, int max_lag, double n_segments) {
    execute_inplace(PlanCache::instance().get(2, p), bisp.data());
    const double norm = static_cast<double>(p) * static_cast<double>(p);
    CrossCorr3 out;
    out.max_lag = max_lag;
    const std::size_t dim = out.dim();
    out.values.assign(dim * dim, 0.0);
    out.counts.assign(dim * dim, 0.0);
    out.mask.assign(dim * dim, 0);
    for (int l = -max_lag; l <= max_lag; ++l) {
        const std::size_t li = circular_index(l, p);
        for (int j = -max_lag; j <= max_lag; ++j) {
            const double count = static_cast<double>(t_len) - lag_span(l, j);
            if (std::abs(l - j) > max_lag || count <= 0) continue;
            const std::size_t ji = circular_index(j, p);
            const double raw = bisp[li * p + ji].real() / norm;
            const std::size_t k = out.idx(l, j);
            out.values[k] = raw / (count * n_segments);
            out.counts[k] = count * n_segments;
            out.mask[k] = 1;
        }
    }
    return out;
}

}  // namespace

CrossCorr2 xcorr2(std::span<const double> f, std::span<const double> g, int max_lag) {
    check_series(f.size(), g.size(), max_lag);
    const std::size_t p = next_fast_len(f.size() + static_cast<std::size_t>(max_lag));
    auto F = fft_padded(f, p);
    const auto G = fft_padded(g, p);
    for (std::size_t v = 0; v < p; ++v) F[v] = std::conj(F[v]) * G[v];
    return finish_xcorr2(F, f.size(), max_lag, 1.0);
}

CrossCorr3 xcorr3(std::span<const double> f, std::span<const double> g,
                  std::span<const double> h, int max_lag) {
    check_series(f.size(), g.size(), max_lag);
    check_series(f.size(), h.size(), max_lag);
    const std::size_t p = next_fast_len(f.size() + static_cast<std::size_t>(max_lag));
    const auto F = fft_padded(f, p);
    const auto G = fft_padded(g, p);
    const auto H = fft_padded(h, p);
    auto b = bispectrum(F, G, H);
    return finish_xcorr3(b, p, f.size(), max_lag, 1.0);
}

std::vector<std::size_t> welch_segments(std::size_t day_len, std::size_t segment_len) {
    if (day_len == 0 || segment_len == 0) throw std::invalid_argument("welch_segments: empty input");
    if (day_len <= segment_len) return {0};
    const std::size_t n = (day_len + segment_len - 1) / segment_len;
    const std::size_t last = day_len - segment_len;
    std::vector<std::size_t> starts(n);
    for (std::size_t i = 0; i < n; ++i)
        starts[i] = static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(last) /
                         static_cast<double>(n - 1)));
    return starts;
}

CrossCorr2 xcorr2_day(std::span<const double> f, std::span<const double> g,
                      int max_lag, std::size_t segment_len) {
    check_series(f.size(), g.size(), max_lag);
    if (segment_len == 0) segment_len = 2 * static_cast<std::size_t>(max_lag);
    segment_len = std::max<std::size_t>(segment_len, static_cast<std::size_t>(max_lag) + 1);
    const auto starts = welch_segments(f.size(), segment_len);
    const std::size_t t_len = std::min(f.size(), segment_len);
    const std::size_t p = next_fast_len(t_len + static_cast<std::size_t>(max_lag));

    // Segments all share one length, so their products can be averaged in the
    // frequency domain and transformed back once.
    std::vector<std::complex<double>> acc(p, {0.0, 0.0});
    for (std::size_t s : starts) {
        auto F = fft_padded(f.subspan(s, t_len), p);
        const auto G = fft_padded(g.subspan(s, t_len), p);
        for (std::size_t v = 0; v < p; ++v) acc[v] += std::conj(F[v]) * G[v];
    }
    return finish_xcorr2(acc, t_len, max_lag, static_cast<double>(starts.size()));
}

CrossCorr3 xcorr3_day(std::span<const double> f, std::span<const double> g,
                      std::span<const double> h, int max_lag, std::size_t segment_len) {
    check_series(f.size(), g.size(), max_lag);
    check_series(f.size(), h.size(), max_lag);
    if (segment_len == 0) segment_len = 2 * static_cast<std::size_t>(max_lag);
    segment_len = std::max<std::size_t>(segment_len, static_cast<std::size_t>(max_lag) + 1);
    const auto starts = welch_segments(f.size(), segment_len);
    const std::size_t t_len = std::min(f.size(), segment_len);
    const std::size_t p = next_fast_len(t_len + static_cast<std::size_t>(max_lag));

    std::vector<std::complex<double>> acc(p * p, {0.0, 0.0});
    for (std::size_t s : starts) {
        const auto F = fft_padded(f.subspan(s, t_len), p);
        const auto G = fft_padded(g.subspan(s, t_len), p);
        const auto H = fft_padded(h.subspan(s, t_len), p);
        for (std::size_t a = 0; a < p; ++a) {
            const std::complex<double> ga = G[a];
            std::size_t sum = a;
            std::complex<double>* row = acc.data() + a * p;
            for (std::size_t bb = 0; bb < p; ++bb) {
                row[bb] += std::conj(F[sum]) * ga * H[bb];
                if (++sum == p) sum = 0;
            }
        }
    }
    return finish_xcorr3(acc, p, t_len, max_lag, static_cast<double>(starts.size()));
}

CrossCorr2 welch_average(std::span<const CrossCorr2> per_day) {
    if (per_day.empty()) throw std::invalid_argument("welch_average: no estimates");
    CrossCorr2 out;
    out.max_lag = per_day[0].max_lag;
    out.values.assign(per_day[0].values.size(), 0.0);
    out.counts.assign(out.values.size(), 0.0);
    for (const auto& day : per_day) {
        if (day.max_lag != out.max_lag) throw std::invalid_argument("welch_average: shape mismatch");
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] += day.values[i];
            out.counts[i] += day.counts[i];
        }
    }
    const double n = static_cast<double>(per_day.size());
    for (double& v : out.values) v /= n;
    return out;
}

CrossCorr3 welch_average(std::span<const CrossCorr3> per_day) {
    if (per_day.empty()) throw std::invalid_argument("welch_average: no estimates");
    CrossCorr3 out;
    out.max_lag = per_day[0].max_lag;
    const std::size_t total = per_day[0].values.size();
    out.values.assign(total, 0.0);
    out.counts.assign(total, 0.0);
    out.mask.assign(total, 1);
    for (const auto& day : per_day) {
        if (day.max_lag != out.max_lag) throw std::invalid_argument("welch_average: shape mismatch");
        for (std::size_t i = 0; i < total; ++i) {
            out.values[i] += day.values[i];
            out.counts[i] += day.counts[i];
            out.mask[i] = static_cast<char>(out.mask[i] && day.mask[i]);
        }
    }
    const double n = static_cast<double>(per_day.size());
    for (std::size_t i = 0; i < total; ++i) out.values[i] = out.mask[i] ? out.values[i] / n : 0.0;
    return out;
}

void mean_and_stderr(std::span<const std::vector<double>> per_day,
                     std::vector<double>& mean, std::vector<double>& se) {
    if (per_day.empty()) throw std::invalid_argument("mean_and_stderr: no estimates");
    const std::size_t m = per_day[0].size();
    const std::size_t n = per_day.size();
    mean.assign(m, 0.0);
    se.assign(m, std::numeric_limits<double>::quiet_NaN());
    for (const auto& day : per_day) {
        if (day.size() != m) throw std::invalid_argument("mean_and_stderr: shape mismatch");
        for (std::size_t i = 0; i < m; ++i) mean[i] += day[i];
    }
    for (double& v : mean) v /= static_cast<double>(n);
    if (n < 2) return;
    for (std::size_t i = 0; i < m; ++i) {
        double ss = 0.0;
        for (const auto& day : per_day) {
            const double d = day[i] - mean[i];
            ss += d * d;
        }
        se[i] = std::sqrt(ss / (static_cast<double>(n - 1) * static_cast<double>(n)));
    }
}

void write_crosscorr3_csv(std::ostream& out, const CrossCorr3& c) {
    out << "l,j,value,count,mask\n";
    char buf[64];
    for (int l = -c.max_lag; l <= c.max_lag; ++l) {
        for (int j = -c.max_lag; j <= c.max_lag; ++j) {
            const std::size_t k = c.idx(l, j);
            std::snprintf(buf, sizeof(buf), "%.17g", c.values[k]);
            out << l << ',' << j << ',' << buf << ',' << c.counts[k] << ','
                << static_cast<int>(c.mask[k]) << '\n';
        }
    }
}

}  // namespace proplab
