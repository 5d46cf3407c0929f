#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "proplab/calibration.hpp"
#include "proplab/events.hpp"

namespace proplab {

// Probability that an event changes the price, as a function of the local
// sign imbalance over a trailing window. The pinning family reproduces the
// suppression of price changes under strongly polarised flow.
struct ChangeProb {
    enum class Family { Constant, Pinning } family = Family::Constant;
    double p0 = 0.4;
    double gamma = 2.0;   // pinning: p0 * (1 - |imbalance|^gamma)
    int window = 50;
    double clip_lo = 0.01;
    double clip_hi = 1.0;

    double operator()(double imbalance) const;
};

struct FlowSpec {
    int events_per_day = 10000;
    int days = 10;
    double sign_memory = 0.5;      // Hurst target of the sign flow
    ChangeProb change_prob;
    CalibratedModel generator;     // ground-truth model producing the returns
    double noise = 0.0;            // sign-independent return noise on c events
    double volume_sigma = 1.0;     // lognormal volume magnitude
    std::uint64_t seed = 1;
    std::string instrument_id = "synthetic";
    int max_lag_cap = 512;
};

// Fractional Gaussian noise via circulant embedding; n samples with Hurst
// exponent hurst in (0, 1), unit variance, deterministic in the seed.
std::vector<double> fgn(std::size_t n, double hurst, std::uint64_t seed);

// +-1 signs with long-memory autocorrelation from thresholded fGn.
std::vector<double> gen_sign_flow(std::size_t n, double hurst, std::uint64_t seed);

std::vector<Label> gen_labels(std::span<const double> signs, const ChangeProb& change_prob,
                              std::uint64_t seed);

// Returns from the exact model equations on the given flow, plus optional
// noise on c events. Noise on n events would break the label contract and is
// rejected.
std::vector<double> gen_returns(std::span<const double> signs, std::span<const Label> labels,
                                const CalibratedModel& generator, double noise,
                                std::uint64_t seed, bool noise_on_n = false);

// Full synthetic instrument: per-day flows, labels, returns, volumes and mid
// paths, byte-identical for identical specs.
InstrumentData generate(const FlowSpec& spec);

// Ground-truth helpers for tests and the synth command.
CalibratedModel make_cim2(double delta_c);
// kernel(j) = amplitude * (j+1)^(-exponent); two-kernel kinds scale the
// n kernel by n_scale; kappa_nc(0) is pinned to zero.
CalibratedModel make_power_law_model(ModelKind kind, int max_lag, double amplitude,
                                     double exponent, double n_scale = 0.5);

}  // namespace proplab
