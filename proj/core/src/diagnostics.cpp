#include "proplab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "proplab/parallel.hpp"
#include "proplab/spectral.hpp"

namespace proplab {

namespace {

constexpr int kN = 0;
constexpr int kC = 1;

void check_window(const InstrumentData& flow, int n_trades) {
    if (n_trades < 1) throw std::invalid_argument("aggregate window must be positive");
    if (flow.days.empty()) throw std::invalid_argument("no days");
    if (static_cast<std::size_t>(n_trades) >= flow.shortest_day())
        throw std::invalid_argument("aggregate window exceeds the shortest day");
}

std::vector<double> prefix_sum(std::span<const double> v) {
    std::vector<double> p(v.size() + 1, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) p[i + 1] = p[i] + v[i];
    return p;
}

}  // namespace

ImpactCurve aggregate_impact(const InstrumentData& flow, int n_trades, int bins,
                             ImbalanceKind kind,
                             const std::vector<std::vector<double>>* returns_override) {
    check_window(flow, n_trades);
    if (bins < 1) throw std::invalid_argument("aggregate_impact: bins must be positive");
    if (returns_override && returns_override->size() != flow.days.size())
        throw std::invalid_argument("aggregate_impact: override not aligned with the flow");

    // Overlapping N-trade windows pooled across days: X is the windowed
    // imbalance, Y the aggregate log return over the same window.
    std::vector<std::vector<std::pair<double, double>>> day_windows(flow.days.size());
    parallel_for(flow.days.size(), [&](std::size_t d) {
        const DaySeries& day = flow.days[d];
        std::vector<double> x;
        if (kind == ImbalanceKind::Sign) {
            x = signs_of(day);
        } else {
            x = signed_volumes(day);
            double total = 0.0;
            for (double v : x) total += std::abs(v);
            if (total <= 0.0)
                throw std::runtime_error("aggregate_impact: day " + day.date + " has no volume");
            for (double& v : x) v /= total;
        }
        const std::vector<double> y =
            returns_override ? (*returns_override)[d] : returns_of(day);
        if (y.size() != x.size())
            throw std::invalid_argument("aggregate_impact: return series misaligned");
        const auto px = prefix_sum(x);
        const auto py = prefix_sum(y);
        const std::size_t n = static_cast<std::size_t>(n_trades);
        auto& out = day_windows[d];
        out.reserve(x.size() - n + 1);
        for (std::size_t t = 0; t + n <= x.size(); ++t)
            out.emplace_back(px[t + n] - px[t], py[t + n] - py[t]);
    });

    std::vector<std::pair<double, double>> windows;
    for (const auto& dw : day_windows) windows.insert(windows.end(), dw.begin(), dw.end());
    if (windows.size() < static_cast<std::size_t>(bins))
        throw std::invalid_argument("aggregate_impact: fewer windows than bins");

    std::stable_sort(windows.begin(), windows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    ImpactCurve curve;
    curve.variable = kind;
    curve.n_trades = n_trades;
    const std::size_t w = windows.size();
    for (int k = 0; k < bins; ++k) {
        const std::size_t lo = static_cast<std::size_t>(k) * w / static_cast<std::size_t>(bins);
        const std::size_t hi =
            static_cast<std::size_t>(k + 1) * w / static_cast<std::size_t>(bins);
        if (hi <= lo) continue;
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sx += windows[i].first;
            sy += windows[i].second;
        }
        const double cnt = static_cast<double>(hi - lo);
        const double my = sy / cnt;
        double ss = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double dlt = windows[i].second - my;
            ss += dlt * dlt;
        }
        curve.bin_centers.push_back(sx / cnt);
        curve.means.push_back(my);
        curve.stderrs.push_back(hi - lo > 1 ? std::sqrt(ss / (cnt - 1.0) / cnt) : 0.0);
        curve.counts.push_back(hi - lo);
    }
    return curve;
}

double curvature(std::span<const double> x, std::span<const double> y, double half_range) {
    if (x.size() != y.size() || x.size() < 8)
        throw std::invalid_argument("curvature: need at least 8 aligned points");
    if (half_range <= 0.0) throw std::invalid_argument("curvature: half_range must be positive");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] < x[i - 1]) throw std::invalid_argument("curvature: x must be ascending");
    const double a = half_range;
    if (x.front() > -a || x.back() < a)
        throw std::invalid_argument("curvature: curve does not cover [-a, a]");

    // Linear interpolation onto a regular grid, then trapezoids per quarter.
    constexpr std::size_t kCells = 4096;  // divisible by 4, so a/2 lands on the grid
    const double step = 2.0 * a / static_cast<double>(kCells);
    std::vector<double> grid(kCells + 1);
    std::size_t seg = 0;
    for (std::size_t i = 0; i <= kCells; ++i) {
        const double xi = -a + step * static_cast<double>(i);
        while (seg + 2 < x.size() && x[seg + 1] < xi) ++seg;
        const double x0 = x[seg], x1 = x[seg + 1];
        const double w = x1 > x0 ? (xi - x0) / (x1 - x0) : 0.0;
        grid[i] = y[seg] + w * (y[seg + 1] - y[seg]);
    }
    auto integrate = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += 0.5 * (grid[i] + grid[i + 1]) * step;
        return acc;
    };
    const std::size_t q = kCells / 4;
    const double i1 = integrate(0, q);          // [-a, -a/2]
    const double i2 = integrate(q, 2 * q);      // [-a/2, 0]
    const double i3 = integrate(2 * q, 3 * q);  // [0, a/2]
    const double i4 = integrate(3 * q, 4 * q);  // [a/2, a]
    if (i1 == 0.0 || i4 == 0.0)
        throw std::runtime_error("curvature: zero denominator integral, curvature undefined");
    return 1.0 / 3.0 - 0.5 * (i2 / i1 + i3 / i4);
}

double curvature(const ImpactCurve& curve, double half_range) {
    double a = half_range;
    if (a <= 0.0) {
        if (curve.bin_centers.empty()) throw std::invalid_argument("curvature: empty curve");
        a = std::min(-curve.bin_centers.front(), curve.bin_centers.back());
        if (a <= 0.0)
            throw std::invalid_argument("curvature: curve has no symmetric coverage around 0");
    }
    return curvature(curve.bin_centers, curve.means, a);
}

SignaturePlot signature_plot(std::span<const std::vector<double>> log_mid_paths, int max_lag) {
    if (max_lag < 1) throw std::invalid_argument("signature_plot: max_lag must be positive");
    if (log_mid_paths.empty()) throw std::invalid_argument("signature_plot: no days");
    for (const auto& path : log_mid_paths)
        if (path.size() <= static_cast<std::size_t>(max_lag) + 1)
            throw std::invalid_argument("signature_plot: max_lag exceeds a day length");

    std::vector<std::vector<double>> per_day(log_mid_paths.size());
    parallel_for(log_mid_paths.size(), [&](std::size_t d) {
        const auto& path = log_mid_paths[d];
        std::vector<double> row(static_cast<std::size_t>(max_lag), 0.0);
        for (int l = 1; l <= max_lag; ++l) {
            const std::size_t lim = path.size() - static_cast<std::size_t>(l);
            double acc = 0.0;
            for (std::size_t t = 0; t < lim; ++t) {
                const double diff = path[t + static_cast<std::size_t>(l)] - path[t];
                acc += diff * diff;
            }
            row[static_cast<std::size_t>(l - 1)] =
                acc / static_cast<double>(lim) / static_cast<double>(l);
        }
        per_day[d] = std::move(row);
    });

    SignaturePlot plot;
    plot.lags.resize(static_cast<std::size_t>(max_lag));
    std::iota(plot.lags.begin(), plot.lags.end(), 1);
    mean_and_stderr(per_day, plot.d, plot.d_se);

    double acc = 0.0;
    std::size_t cnt = 0;
    for (int l = std::max(1, max_lag / 10 + 1); l <= max_lag; ++l) {
        acc += plot.d[static_cast<std::size_t>(l - 1)];
        ++cnt;
    }
    plot.d_lf = acc / static_cast<double>(cnt);
    plot.d_excess.resize(plot.d.size());
    for (std::size_t i = 0; i < plot.d.size(); ++i) plot.d_excess[i] = plot.d[i] - plot.d_lf;
    return plot;
}

SignaturePlot signature_plot(const InstrumentData& data, int max_lag,
                             const std::vector<std::vector<double>>* returns_override) {
    std::vector<std::vector<double>> paths(data.days.size());
    for (std::size_t d = 0; d < data.days.size(); ++d) {
        if (!returns_override) {
            paths[d] = log_mid_path(data.days[d]);
        } else {
            const auto& r = (*returns_override)[d];
            std::vector<double> p(r.size() + 1);
            p[0] = data.days[d].events.empty() ? 0.0 : data.days[d].events.front().log_mid;
            for (std::size_t t = 0; t < r.size(); ++t) p[t + 1] = p[t] + r[t];
            paths[d] = std::move(p);
        }
    }
    return signature_plot(paths, max_lag);
}

double hurst_exponent(std::span<const std::vector<double>> cumulative_paths) {
    if (cumulative_paths.empty()) throw std::invalid_argument("hurst_exponent: no days");
    double h_sum = 0.0;
    std::size_t h_cnt = 0;
    for (const auto& path : cumulative_paths) {
        if (path.size() < 512)
            throw std::invalid_argument("hurst_exponent: need at least 512 points per day");
        // rms increment over dyadic windows; scales capped so every scale
        // still averages at least 64 windows
        std::vector<double> lw, lm;
        for (std::size_t w = 4; w * 64 <= path.size(); w *= 2) {
            double acc = 0.0;
            const std::size_t lim = path.size() - w;
            for (std::size_t t = 0; t < lim; ++t) {
                const double d = path[t + w] - path[t];
                acc += d * d;
            }
            const double m = acc / static_cast<double>(lim);
            if (m > 0.0) {
                lw.push_back(std::log(static_cast<double>(w)));
                lm.push_back(0.5 * std::log(m));
            }
        }
        if (lw.size() < 2) {
            // bounded or constant path: no growth across scales
            h_sum += 0.0;
            ++h_cnt;
            continue;
        }
        const double n = static_cast<double>(lw.size());
        const double mx = std::accumulate(lw.begin(), lw.end(), 0.0) / n;
        const double my = std::accumulate(lm.begin(), lm.end(), 0.0) / n;
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lw.size(); ++i) {
            sxy += (lw[i] - mx) * (lm[i] - my);
            sxx += (lw[i] - mx) * (lw[i] - mx);
        }
        h_sum += sxy / sxx;
        ++h_cnt;
    }
    return h_sum / static_cast<double>(h_cnt);
}

namespace {

// R(l) = sum_{l'=0}^{l-1} S(l') for l > 0, 0 at l = 0, -sum_{l'=l}^{-1} S(l')
// for l < 0; the unique cumulation with R(l) = <(log m(t+l) - log m(t)) eps(t)>.
std::vector<double> cumulate_response(std::span<const double> s, int max_lag) {
    const std::size_t mid = static_cast<std::size_t>(max_lag);
    std::vector<double> r(s.size(), 0.0);
    for (int l = 1; l <= max_lag; ++l)
        r[mid + static_cast<std::size_t>(l)] =
            r[mid + static_cast<std::size_t>(l - 1)] + s[mid + static_cast<std::size_t>(l - 1)];
    for (int l = -1; l >= -max_lag; --l)
        r[static_cast<std::size_t>(l + max_lag)] =
            r[static_cast<std::size_t>(l + 1 + max_lag)] - s[static_cast<std::size_t>(l + max_lag)];
    return r;
}

}  // namespace

ResponseFunctions response_function(const ResponseSet& responses) {
    ResponseFunctions out;
    out.max_lag = responses.max_lag;
    out.r = cumulate_response(responses.s, responses.max_lag);
    for (int pi = 0; pi < 2; ++pi)
        out.r_pi[static_cast<std::size_t>(pi)] =
            cumulate_response(responses.s_pi[static_cast<std::size_t>(pi)], responses.max_lag);
    return out;
}

ClosedFormResponse closed_form_response(const CalibratedModel& model,
                                        const PooledEstimates& est) {
    const int L = est.max_lag;
    const std::size_t span = 2 * static_cast<std::size_t>(L) + 1;
    ClosedFormResponse out;
    out.max_lag = L;
    out.s_model.assign(span, 0.0);
    out.complete.assign(span, 1);

    auto kernel_len = [&](const std::vector<double>& k) {
        return std::min(static_cast<int>(k.size()) - 1, L);
    };

    switch (model.kind) {
        case ModelKind::TIM1: {
            const auto& g = model.kernel("g");
            const int kmax = kernel_len(g);
            for (int l = -L; l <= L; ++l) {
                const int jhi = l >= 0 ? kmax : std::min(kmax, l + L);
                double acc = 0.0;
                for (int j = 0; j <= jhi; ++j)
                    acc += est.sign_autocorr.at(l - j) * g[static_cast<std::size_t>(j)];
                out.s_model[static_cast<std::size_t>(l + L)] = acc;
                if (jhi < kmax) out.complete[static_cast<std::size_t>(l + L)] = 0;
            }
            out.has_pi = false;
            break;
        }
        case ModelKind::TIM2:
        case ModelKind::HDIM2:
        case ModelKind::HDIM2star:
        case ModelKind::CIM2: {
            const bool tim2 = model.kind == ModelKind::TIM2;
            const bool hdim = model.kind == ModelKind::HDIM2;
            const bool star = model.kind == ModelKind::HDIM2star;
            std::array<const std::vector<double>*, 2> k = {nullptr, nullptr};
            double delta = 0.0;
            if (tim2) {
                k = {&model.kernel("g_n"), &model.kernel("g_c")};
            } else if (hdim || star) {
                k = {&model.kernel("kappa_nc"), &model.kernel("kappa_cc")};
            } else {
                delta = model.delta_c();
            }
            if (hdim && !est.has_triples)
                throw std::invalid_argument(
                    "closed_form_response: HDIM2 needs the three-point tensors");

            for (int pa = 0; pa < 2; ++pa) {
                auto& s_pa = out.s_model_pi[static_cast<std::size_t>(pa)];
                s_pa.assign(span, 0.0);
                for (int l = -L; l <= L; ++l) {
                    double acc = 0.0;
                    bool complete = true;
                    if (model.kind == ModelKind::CIM2) {
                        // r_hat = delta * s_c(t), so the implied response is exact
                        acc = delta * est.labeled[pa][kC].at(l);
                    } else {
                        for (int pb = 0; pb < 2; ++pb) {
                            const auto& kb = *k[static_cast<std::size_t>(pb)];
                            const int kmax = kernel_len(kb);
                            const int jhi = l >= 0 ? kmax : std::min(kmax, l + L);
                            if (jhi < kmax) complete = false;
                            for (int j = 0; j <= jhi; ++j) {
                                double c;
                                if (tim2) {
                                    c = est.labeled[pa][pb].at(l - j);
                                } else if (hdim) {
                                    if (!est.triple[pa][pb].valid(l, j)) {
                                        complete = false;
                                        continue;
                                    }
                                    c = est.triple[pa][pb].at(l, j);
                                } else {  // two-point factorisation
                                    if (l == 0 && j == 0)
                                        c = pa == kC && pb == kC ? est.p_c : 0.0;
                                    else if (j == 0)
                                        c = pb == kC ? est.labeled[pa][kC].at(l) : 0.0;
                                    else if (l == 0)
                                        c = pa == kC ? est.labeled[pb][kC].at(j) : 0.0;
                                    else
                                        c = est.p_c * est.labeled[pa][pb].at(l - j);
                                }
                                acc += c * kb[static_cast<std::size_t>(j)];
                            }
                        }
                    }
                    s_pa[static_cast<std::size_t>(l + L)] = acc;
                    if (!complete) out.complete[static_cast<std::size_t>(l + L)] = 0;
                }
            }
            for (std::size_t i = 0; i < span; ++i)
                out.s_model[i] = out.s_model_pi[kN][i] + out.s_model_pi[kC][i];
            out.has_pi = true;
            break;
        }
    }

    out.r = cumulate_response(out.s_model, L);
    if (out.has_pi)
        for (int pi = 0; pi < 2; ++pi)
            out.r_pi[static_cast<std::size_t>(pi)] =
                cumulate_response(out.s_model_pi[static_cast<std::size_t>(pi)], L);
    return out;
}

double model_correlation(const InstrumentData& truth, const PredictedSeries& pred,
                         int n_trades) {
    check_window(truth, n_trades);
    if (pred.r_hat.size() != truth.days.size())
        throw std::invalid_argument("model_correlation: prediction not aligned");

    double acc = 0.0;
    for (std::size_t d = 0; d < truth.days.size(); ++d) {
        const auto yt = returns_of(truth.days[d]);
        const auto& yp = pred.r_hat[d];
        if (yp.size() != yt.size())
            throw std::invalid_argument("model_correlation: length mismatch");
        const auto pt = prefix_sum(yt);
        const auto pp = prefix_sum(yp);
        const std::size_t n = static_cast<std::size_t>(n_trades);
        const std::size_t m = yt.size() - n + 1;
        double sa = 0.0, sb = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            sa += pt[t + n] - pt[t];
            sb += pp[t + n] - pp[t];
        }
        const double ma = sa / static_cast<double>(m), mb = sb / static_cast<double>(m);
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            const double a = pt[t + n] - pt[t] - ma;
            const double b = pp[t + n] - pp[t] - mb;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        if (saa <= 0.0 || sbb <= 0.0)
            throw std::runtime_error("model_correlation: zero variance in day " +
                                     truth.days[d].date);
        acc += sab / std::sqrt(saa * sbb);
    }
    return acc / static_cast<double>(truth.days.size());
}

SlopeScaling slope_scaling(std::span<const ImpactCurve> curves) {
    if (curves.size() < 4)
        throw std::invalid_argument("slope_scaling: need at least 4 window sizes");
    SlopeScaling out;
    for (const auto& curve : curves) {
        const auto& x = curve.bin_centers;
        const auto& y = curve.means;
        if (x.size() < 3) throw std::invalid_argument("slope_scaling: curve too coarse");
        const double mid = 0.5 * (x.front() + x.back());
        const double range = x.back() - x.front();
        // central slope: fit over the innermost quarter of the range, widened
        // until at least three bins participate
        double window = 0.125 * range;
        std::vector<std::size_t> sel;
        while (true) {
            sel.clear();
            for (std::size_t i = 0; i < x.size(); ++i)
                if (std::abs(x[i] - mid) <= window) sel.push_back(i);
            if (sel.size() >= 3 || window >= range) break;
            window *= 2.0;
        }
        if (sel.size() < 2) throw std::runtime_error("slope_scaling: empty central window");
        double mx = 0.0, my = 0.0;
        for (std::size_t i : sel) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(sel.size());
        my /= static_cast<double>(sel.size());
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i : sel) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        const double slope = sxy / sxx;
        if (!(slope > 0.0))
            throw std::runtime_error("slope_scaling: non-positive central slope at N = " +
                                     std::to_string(curve.n_trades));
        out.n_values.push_back(curve.n_trades);
        out.slopes.push_back(slope);
    }

    const double n = static_cast<double>(out.slopes.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < out.slopes.size(); ++i) {
        mx += std::log(static_cast<double>(out.n_values[i]));
        my += std::log(out.slopes[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < out.slopes.size(); ++i) {
        const double dx = std::log(static_cast<double>(out.n_values[i])) - mx;
        sxy += dx * (std::log(out.slopes[i]) - my);
        sxx += dx * dx;
    }
    out.kappa = -sxy / sxx;
    return out;
}

}  // namespace proplab
