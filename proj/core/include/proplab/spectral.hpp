#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace proplab {

// Two-point cross-correlation estimate over lags [-L, L].
// values[l+L] is the mean of f(t)*g(t+l) over the t where both factors are
// real observations; the divisor is that summand count, not the series length.
struct CrossCorr2 {
    int max_lag = 0;
    std::vector<double> values;  // 2L+1 entries
    std::vector<double> counts;  // summands behind each entry

    double at(int lag) const { return values[static_cast<std::size_t>(lag + max_lag)]; }
    double count_at(int lag) const { return counts[static_cast<std::size_t>(lag + max_lag)]; }
    std::size_t span() const { return values.size(); }
};

// Three-point cross-correlation estimate over (l, j) in [-L, L]^2.
// Entries with mask == false fall in the zero-padding blind spot |l-j| > L
// and must not be read downstream.
struct CrossCorr3 {
    int max_lag = 0;
    std::vector<double> values;  // (2L+1)^2, row-major in (l, j)
    std::vector<double> counts;
    std::vector<char> mask;

    std::size_t dim() const { return static_cast<std::size_t>(2 * max_lag + 1); }
    std::size_t idx(int l, int j) const {
        return static_cast<std::size_t>(l + max_lag) * dim() + static_cast<std::size_t>(j + max_lag);
    }
    double at(int l, int j) const { return values[idx(l, j)]; }
    bool valid(int l, int j) const { return mask[idx(l, j)] != 0; }
    double count_at(int l, int j) const { return counts[idx(l, j)]; }
};

// Smallest length >= n with only factors 2, 3, 5 (fast FFT sizes).
std::size_t next_fast_len(std::size_t n);

// FFT of x zero-padded to padded_len (full complex spectrum).
std::vector<std::complex<double>> fft_padded(std::span<const double> x, std::size_t padded_len);

// Cross-bispectrum B(a, b) = conj(F[(a+b) mod P]) * G[a] * H[b], row-major PxP.
// All three spectra must share the same length.
std::vector<std::complex<double>> bispectrum(std::span<const std::complex<double>> F,
                                             std::span<const std::complex<double>> G,
                                             std::span<const std::complex<double>> H);

// Exact spectral estimators for a single contiguous segment.
CrossCorr2 xcorr2(std::span<const double> f, std::span<const double> g, int max_lag);
CrossCorr3 xcorr3(std::span<const double> f, std::span<const double> g,
                  std::span<const double> h, int max_lag);

// Segment starts covering [0, day_len) with windows of segment_len and the
// smallest possible overlap. A day shorter than segment_len yields one start.
std::vector<std::size_t> welch_segments(std::size_t day_len, std::size_t segment_len);

// Day-level estimates: segments of length segment_len (default 2L) covering
// the day are estimated independently and averaged with equal weight.
CrossCorr2 xcorr2_day(std::span<const double> f, std::span<const double> g,
                      int max_lag, std::size_t segment_len = 0);
CrossCorr3 xcorr3_day(std::span<const double> f, std::span<const double> g,
                      std::span<const double> h, int max_lag, std::size_t segment_len = 0);

// Equal-weight element-wise average over per-day estimates.
CrossCorr2 welch_average(std::span<const CrossCorr2> per_day);
CrossCorr3 welch_average(std::span<const CrossCorr3> per_day);

// Element-wise mean and standard error across per-day estimates, for the
// significance tests on responses and biases.
void mean_and_stderr(std::span<const std::vector<double>> per_day,
                     std::vector<double>& mean, std::vector<double>& se);

// Dump a triple-correlation tensor as tidy CSV: l,j,value,count,mask.
void write_crosscorr3_csv(std::ostream& out, const CrossCorr3& c);

}  // namespace proplab
