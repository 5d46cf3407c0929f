#pragma once

#include <array>
#include <span>
#include <vector>

#include "proplab/calibration.hpp"
#include "proplab/events.hpp"

namespace proplab {

// Model output on a given order flow, one return series per day. Convolutions
// restart at each day boundary; nothing spills over.
struct PredictedSeries {
    ModelKind kind = ModelKind::CIM2;
    std::vector<std::vector<double>> r_hat;
};

std::vector<double> run_model_day(const CalibratedModel& model, const DaySeries& day);
PredictedSeries run_model(const CalibratedModel& model, const InstrumentData& data);

// nu(t) = r(t) - r_hat(t)
std::vector<double> prediction_error(const DaySeries& day, std::span<const double> pred);

// Copy of the flow with returns replaced by model output; signs, labels and
// timestamps stay put, log-mids are rebuilt from the new returns. Lets every
// diagnostic treat predictions exactly like true returns.
InstrumentData with_returns(const InstrumentData& data,
                            const std::vector<std::vector<double>>& returns);

// Cross-correlation between the prediction error and lagged labelled signs,
// with across-day standard errors. Zero within noise iff the calibration was
// consistent.
struct BiasDiagnostic {
    int max_lag = 0;
    std::array<std::vector<double>, 2> bias;  // [pi], lags [-L, L]
    std::array<std::vector<double>, 2> se;
};

BiasDiagnostic calibration_bias(const InstrumentData& flow, const PredictedSeries& pred,
                                int max_lag);

}  // namespace proplab
