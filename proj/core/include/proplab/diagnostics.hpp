#pragma once

#include <array>
#include <span>
#include <vector>

#include "proplab/calibration.hpp"
#include "proplab/events.hpp"
#include "proplab/simulate.hpp"

namespace proplab {

enum class ImbalanceKind { Sign, Volume };

// Conditional aggregate impact R_N(X): mean N-trade log return per quantile
// bin of the windowed imbalance X. Volume imbalances are normalised by each
// day's total volume.
struct ImpactCurve {
    ImbalanceKind variable = ImbalanceKind::Sign;
    int n_trades = 0;
    std::vector<double> bin_centers;
    std::vector<double> means;
    std::vector<double> stderrs;
    std::vector<std::size_t> counts;
};

ImpactCurve aggregate_impact(const InstrumentData& flow, int n_trades, int bins,
                             ImbalanceKind kind,
                             const std::vector<std::vector<double>>* returns_override = nullptr);

// Integral-ratio curvature: 0 for a line through the origin, -2/3 for a sine
// or tent. half_range 0 picks the widest symmetric interval the curve covers.
double curvature(std::span<const double> x, std::span<const double> y, double half_range);
double curvature(const ImpactCurve& curve, double half_range = 0.0);

struct SignaturePlot {
    std::vector<int> lags;
    std::vector<double> d;        // variance per unit lag
    std::vector<double> d_se;
    double d_lf = 0.0;            // mean of d over the largest decade of lags
    std::vector<double> d_excess; // d - d_lf
};

SignaturePlot signature_plot(std::span<const std::vector<double>> log_mid_paths, int max_lag);
SignaturePlot signature_plot(const InstrumentData& data, int max_lag,
                             const std::vector<std::vector<double>>* returns_override = nullptr);

// Scaling exponent of mean absolute increments over dyadic windows, averaged
// across days. Inputs are cumulative paths of at least 512 points.
double hurst_exponent(std::span<const std::vector<double>> cumulative_paths);

// Price response R(l) = <(log m(t+l) - log m(t)) eps(t)> and its label-
// conditioned parts, cumulated from the differential responses.
struct ResponseFunctions {
    int max_lag = 0;
    std::vector<double> r;                       // lags [-L, L]
    std::array<std::vector<double>, 2> r_pi;
};

ResponseFunctions response_function(const ResponseSet& responses);

// Response implied by the calibrated kernels through S = C k, using the same
// correlation estimates that built the system. At negative lags entries lost
// to the estimation blind spot truncate the kernel sum; complete[] records
// where the full sum was available.
struct ClosedFormResponse {
    int max_lag = 0;
    std::vector<double> s_model;                 // differential, lags [-L, L]
    std::array<std::vector<double>, 2> s_model_pi;
    std::vector<double> r;                       // integrated
    std::array<std::vector<double>, 2> r_pi;
    std::vector<char> complete;
    bool has_pi = false;
};

ClosedFormResponse closed_form_response(const CalibratedModel& model,
                                        const PooledEstimates& est);

// Mean per-day Pearson correlation between overlapping N-trade sums of the
// true and predicted returns.
double model_correlation(const InstrumentData& truth, const PredictedSeries& pred,
                         int n_trades);

// Scaling of the central impact-curve slope with N: slope ~ N^-kappa.
struct SlopeScaling {
    std::vector<int> n_values;
    std::vector<double> slopes;
    double kappa = 0.0;
};

SlopeScaling slope_scaling(std::span<const ImpactCurve> curves);

}  // namespace proplab
