#include "proplab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "proplab/parallel.hpp"
#include "proplab/spectral.hpp"

namespace proplab {

std::vector<double> run_model_day(const CalibratedModel& model, const DaySeries& day) {
    const std::size_t t_len = day.events.size();
    std::vector<double> out(t_len, 0.0);

    switch (model.kind) {
        case ModelKind::CIM2: {
            const double delta = model.delta_c();
            for (std::size_t t = 0; t < t_len; ++t)
                if (day.events[t].label == Label::c) out[t] = delta * day.events[t].sign;
            return out;
        }
        case ModelKind::TIM1: {
            const auto& g = model.kernel("g");
            for (std::size_t t = 0; t < t_len; ++t) {
                const std::size_t jmax = std::min(t, g.size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) acc += g[j] * day.events[t - j].sign;
                out[t] = acc;
            }
            return out;
        }
        case ModelKind::TIM2: {
            const std::array<const std::vector<double>*, 2> g = {&model.kernel("g_n"),
                                                                 &model.kernel("g_c")};
            for (std::size_t t = 0; t < t_len; ++t) {
                const std::size_t jmax = std::min(t, g[0]->size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    const TradeEvent& ev = day.events[t - j];
                    acc += (*g[ev.label == Label::c ? 1 : 0])[j] * ev.sign;
                }
                out[t] = acc;
            }
            return out;
        }
        case ModelKind::HDIM2:
        case ModelKind::HDIM2star: {
            const std::array<const std::vector<double>*, 2> k = {&model.kernel("kappa_nc"),
                                                                 &model.kernel("kappa_cc")};
            for (std::size_t t = 0; t < t_len; ++t) {
                if (day.events[t].label != Label::c) continue;  // zero enforced on n events
                const std::size_t jmax = std::min(t, k[0]->size() - 1);
                double acc = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    const TradeEvent& ev = day.events[t - j];
                    acc += (*k[ev.label == Label::c ? 1 : 0])[j] * ev.sign;
                }
                out[t] = acc;
            }
            return out;
        }
    }
    throw std::logic_error("run_model_day: unknown model kind");
}

PredictedSeries run_model(const CalibratedModel& model, const InstrumentData& data) {
    PredictedSeries pred;
    pred.kind = model.kind;
    pred.r_hat.resize(data.days.size());
    parallel_for(data.days.size(),
                 [&](std::size_t i) { pred.r_hat[i] = run_model_day(model, data.days[i]); });
    return pred;
}

std::vector<double> prediction_error(const DaySeries& day, std::span<const double> pred) {
    if (pred.size() != day.events.size())
        throw std::invalid_argument("prediction_error: prediction not aligned with the day");
    std::vector<double> nu(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t) nu[t] = day.events[t].ret - pred[t];
    return nu;
}

InstrumentData with_returns(const InstrumentData& data,
                            const std::vector<std::vector<double>>& returns) {
    if (returns.size() != data.days.size())
        throw std::invalid_argument("with_returns: day count mismatch");
    InstrumentData out = data;
    for (std::size_t d = 0; d < out.days.size(); ++d) {
        auto& events = out.days[d].events;
        if (returns[d].size() != events.size())
            throw std::invalid_argument("with_returns: length mismatch in day " + out.days[d].date);
        double log_mid = events.empty() ? 0.0 : events.front().log_mid;
        for (std::size_t t = 0; t < events.size(); ++t) {
            events[t].log_mid = log_mid;
            events[t].ret = returns[d][t];
            log_mid += returns[d][t];
        }
    }
    return out;
}

BiasDiagnostic calibration_bias(const InstrumentData& flow, const PredictedSeries& pred,
                                int max_lag) {
    if (pred.r_hat.size() != flow.days.size())
        throw std::invalid_argument("calibration_bias: prediction not aligned with the flow");
    if (max_lag <= 0 || max_lag > flow.max_lag)
        throw std::invalid_argument("calibration_bias: bad max_lag");

    const std::size_t n_days = flow.days.size();
    std::array<std::vector<std::vector<double>>, 2> per_day;
    per_day[0].resize(n_days);
    per_day[1].resize(n_days);
    parallel_for(n_days, [&](std::size_t d) {
        const DaySeries& day = flow.days[d];
        const auto nu = prediction_error(day, pred.r_hat[d]);
        for (int pi = 0; pi < 2; ++pi) {
            const auto s = labeled_signs(day, pi == 1 ? Label::c : Label::n);
            per_day[static_cast<std::size_t>(pi)][d] = xcorr2_day(s, nu, max_lag).values;
        }
    });

    BiasDiagnostic out;
    out.max_lag = max_lag;
    for (int pi = 0; pi < 2; ++pi)
        mean_and_stderr(per_day[static_cast<std::size_t>(pi)],
                        out.bias[static_cast<std::size_t>(pi)],
                        out.se[static_cast<std::size_t>(pi)]);
    return out;
}

}  // namespace proplab
