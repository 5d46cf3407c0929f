#include "proplab/calibration.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "proplab/parallel.hpp"

namespace proplab {

namespace {

constexpr int kN = 0;
constexpr int kC = 1;

int lag_index(int lag, int max_lag) { return lag + max_lag; }

}  // namespace

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::TIM1: return "tim1";
        case ModelKind::TIM2: return "tim2";
        case ModelKind::HDIM2: return "hdim2";
        case ModelKind::HDIM2star: return "hdim2star";
        case ModelKind::CIM2: return "cim2";
    }
    throw std::logic_error("model_name: bad kind");
}

ModelKind model_from_name(const std::string& name) {
    if (name == "tim1") return ModelKind::TIM1;
    if (name == "tim2") return ModelKind::TIM2;
    if (name == "hdim2") return ModelKind::HDIM2;
    if (name == "hdim2star") return ModelKind::HDIM2star;
    if (name == "cim2") return ModelKind::CIM2;
    throw std::invalid_argument("unknown model kind: " + name);
}

const std::vector<double>& CalibratedModel::kernel(const std::string& name) const {
    auto it = kernels.find(name);
    if (it == kernels.end())
        throw std::invalid_argument("model " + model_name(kind) + " has no kernel " + name);
    return it->second;
}

double CalibratedModel::delta_c() const {
    const auto& d = kernel("delta_c");
    if (d.empty()) throw std::logic_error("delta_c kernel empty");
    return d[0];
}

std::string model_to_json(const CalibratedModel& model) {
    nlohmann::json j;
    j["kind"] = model_name(model.kind);
    j["max_lag"] = model.max_lag;
    j["kernels"] = model.kernels;
    j["meta"] = {{"window", model.meta.window},
                 {"smoothed", model.meta.smoothed},
                 {"condition", model.meta.condition},
                 {"ridge_lambda", model.meta.ridge_lambda},
                 {"toeplitz_fast_path", model.meta.toeplitz_fast_path}};
    return j.dump(2) + "\n";
}

CalibratedModel model_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    CalibratedModel model;
    model.kind = model_from_name(j.at("kind").get<std::string>());
    model.max_lag = j.at("max_lag").get<int>();
    for (const auto& [name, values] : j.at("kernels").items())
        model.kernels[name] = values.get<std::vector<double>>();
    if (j.contains("meta")) {
        const auto& m = j["meta"];
        model.meta.window = m.value("window", std::string{});
        model.meta.smoothed = m.value("smoothed", false);
        model.meta.condition = m.value("condition", 0.0);
        model.meta.ridge_lambda = m.value("ridge_lambda", 0.0);
        model.meta.toeplitz_fast_path = m.value("toeplitz_fast_path", false);
    }
    if (model.kind == ModelKind::CIM2 && model.delta_c() <= 0.0)
        throw std::invalid_argument("model_from_json: CIM2 requires delta_c > 0");
    return model;
}

std::vector<double> integrated_kernel(std::span<const double> kernel) {
    std::vector<double> out(kernel.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        acc += kernel[i];
        out[i] = acc;
    }
    return out;
}

namespace {

// Reorients a raw xcorr3(f, g, h) estimate, value(l, j) = <f(t) g(t+l) h(t+j)>,
// into the calibration convention <f(t) g(t-l) h(t-j)>.
CrossCorr3 flip3(const CrossCorr3& in) {
    CrossCorr3 out;
    out.max_lag = in.max_lag;
    const std::size_t dim = in.dim();
    out.values.resize(dim * dim);
    out.counts.resize(dim * dim);
    out.mask.resize(dim * dim);
    for (int l = -in.max_lag; l <= in.max_lag; ++l)
        for (int j = -in.max_lag; j <= in.max_lag; ++j) {
            const std::size_t dst = out.idx(l, j);
            const std::size_t src = in.idx(-l, -j);
            out.values[dst] = in.values[src];
            out.counts[dst] = in.counts[src];
            out.mask[dst] = in.mask[src];
        }
    return out;
}

CrossCorr3 transpose3(const CrossCorr3& in) {
    CrossCorr3 out;
    out.max_lag = in.max_lag;
    const std::size_t dim = in.dim();
    out.values.resize(dim * dim);
    out.counts.resize(dim * dim);
    out.mask.resize(dim * dim);
    for (int l = -in.max_lag; l <= in.max_lag; ++l)
        for (int j = -in.max_lag; j <= in.max_lag; ++j) {
            const std::size_t dst = out.idx(l, j);
            const std::size_t src = in.idx(j, l);
            out.values[dst] = in.values[src];
            out.counts[dst] = in.counts[src];
            out.mask[dst] = in.mask[src];
        }
    return out;
}

}  // namespace

std::vector<DayEstimates> estimate_by_day(const InstrumentData& data,
                                          const EstimateOptions& options) {
    const int L = options.max_lag;
    if (L <= 0) throw std::invalid_argument("estimate_by_day: max_lag must be positive");
    if (L > data.max_lag)
        throw std::invalid_argument("estimate_by_day: max_lag exceeds the data limit (" +
                                    std::to_string(data.max_lag) + ")");
    if (data.days.empty()) throw std::invalid_argument("estimate_by_day: no days");
    const std::size_t seg =
        options.segment_len ? options.segment_len : 2 * static_cast<std::size_t>(L);

    std::vector<DayEstimates> out(data.days.size());
    parallel_for(data.days.size(), [&](std::size_t di) {
        const DaySeries& day = data.days[di];
        DayEstimates& est = out[di];
        const auto e = signs_of(day);
        const auto r = returns_of(day);
        const std::array<std::vector<double>, 2> s = {labeled_signs(day, Label::n),
                                                      labeled_signs(day, Label::c)};
        const std::array<std::vector<double>, 2> rp = {labeled_returns(day, Label::n),
                                                       labeled_returns(day, Label::c)};
        const auto ic = label_indicator(day, Label::c);

        est.sign_autocorr = xcorr2_day(e, e, L, seg);
        est.return_sign = xcorr2_day(r, e, L, seg);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                est.labeled[a][b] = xcorr2_day(s[a], s[b], L, seg);
                est.resp[a][b] = xcorr2_day(s[a], rp[b], L, seg);
            }
        est.p_c = std::accumulate(ic.begin(), ic.end(), 0.0) / static_cast<double>(ic.size());

        if (options.need_triples) {
            est.triple[kN][kN] = flip3(xcorr3_day(ic, s[kN], s[kN], L, seg));
            est.triple[kC][kC] = flip3(xcorr3_day(ic, s[kC], s[kC], L, seg));
            est.triple[kN][kC] = flip3(xcorr3_day(ic, s[kN], s[kC], L, seg));
            est.triple[kC][kN] = transpose3(est.triple[kN][kC]);
            est.has_triples = true;
        }
    });
    return out;
}

PooledEstimates pool_estimates(std::span<const DayEstimates> days, int skip_day) {
    if (days.empty()) throw std::invalid_argument("pool_estimates: no days");
    std::vector<std::size_t> use;
    for (std::size_t i = 0; i < days.size(); ++i)
        if (static_cast<int>(i) != skip_day) use.push_back(i);
    if (use.empty()) throw std::invalid_argument("pool_estimates: all days skipped");

    PooledEstimates pooled;
    pooled.max_lag = days[0].sign_autocorr.max_lag;
    pooled.n_days = use.size();

    auto avg2 = [&](auto field) {
        std::vector<CrossCorr2> v;
        v.reserve(use.size());
        for (std::size_t i : use) v.push_back(field(days[i]));
        return welch_average(std::span<const CrossCorr2>(v));
    };
    pooled.sign_autocorr = avg2([](const DayEstimates& d) { return d.sign_autocorr; });
    pooled.return_sign = avg2([](const DayEstimates& d) { return d.return_sign; });
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            pooled.labeled[a][b] =
                avg2([a, b](const DayEstimates& d) { return d.labeled[a][b]; });

    pooled.has_triples = days[0].has_triples;
    if (pooled.has_triples) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                std::vector<CrossCorr3> v;
                v.reserve(use.size());
                for (std::size_t i : use) v.push_back(days[i].triple[a][b]);
                pooled.triple[a][b] = welch_average(std::span<const CrossCorr3>(v));
            }
    }

    double pc = 0.0;
    for (std::size_t i : use) pc += days[i].p_c;
    pooled.p_c = pc / static_cast<double>(use.size());

    // Responses: averaged components, aggregates formed by summation so the
    // chain identity S = sum_pi S_pi = sum_pipi' S_pipi' is structural.
    ResponseSet& rs = pooled.responses;
    rs.max_lag = pooled.max_lag;
    const std::size_t span = 2 * static_cast<std::size_t>(pooled.max_lag) + 1;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            rs.s_pipi[a][b] = avg2([a, b](const DayEstimates& d) { return d.resp[a][b]; }).values;
    for (int a = 0; a < 2; ++a) {
        rs.s_pi[a].assign(span, 0.0);
        for (std::size_t i = 0; i < span; ++i)
            rs.s_pi[a][i] = rs.s_pipi[a][kN][i] + rs.s_pipi[a][kC][i];
    }
    rs.s.assign(span, 0.0);
    for (std::size_t i = 0; i < span; ++i) rs.s[i] = rs.s_pi[kN][i] + rs.s_pi[kC][i];

    for (int a = 0; a < 2; ++a) {
        std::vector<std::vector<double>> per_day;
        per_day.reserve(use.size());
        for (std::size_t i : use) {
            std::vector<double> v(span);
            for (std::size_t k = 0; k < span; ++k)
                v[k] = days[i].resp[a][kN].values[k] + days[i].resp[a][kC].values[k];
            per_day.push_back(std::move(v));
        }
        std::vector<double> mean;
        mean_and_stderr(per_day, mean, rs.s_pi_se[a]);
    }
    return pooled;
}

ResponseSet estimate_responses(const InstrumentData& data, int max_lag) {
    EstimateOptions opt;
    opt.max_lag = max_lag;
    const auto days = estimate_by_day(data, opt);
    return pool_estimates(days).responses;
}

LinearSystem assemble_tim1(const PooledEstimates& est, Tim1Matrix variant) {
    const int L = est.max_lag;
    const std::size_t n = static_cast<std::size_t>(L) + 1;
    const CrossCorr2& corr =
        variant == Tim1Matrix::SignAutocorr ? est.sign_autocorr : est.return_sign;
    LinearSystem sys;
    sys.n = n;
    sys.matrix.resize(n * n);
    sys.rhs.resize(n);
    sys.unknowns = {"g"};
    sys.symmetric_toeplitz = variant == Tim1Matrix::SignAutocorr;
    for (int l = 0; l <= L; ++l) {
        for (int j = 0; j <= L; ++j)
            sys.matrix[static_cast<std::size_t>(l) * n + static_cast<std::size_t>(j)] =
                corr.at(l - j);
        sys.rhs[static_cast<std::size_t>(l)] = est.responses.s[lag_index(l, L)];
    }
    return sys;
}

LinearSystem assemble_tim2(const PooledEstimates& est) {
    const int L = est.max_lag;
    const std::size_t bs = static_cast<std::size_t>(L) + 1;
    const std::size_t n = 2 * bs;
    LinearSystem sys;
    sys.n = n;
    sys.matrix.resize(n * n);
    sys.rhs.resize(n);
    sys.unknowns = {"g_n", "g_c"};
    for (int pa = 0; pa < 2; ++pa) {
        for (int l = 0; l <= L; ++l) {
            const std::size_t row = static_cast<std::size_t>(pa) * bs + static_cast<std::size_t>(l);
            for (int pb = 0; pb < 2; ++pb)
                for (int j = 0; j <= L; ++j)
                    sys.matrix[row * n + static_cast<std::size_t>(pb) * bs +
                               static_cast<std::size_t>(j)] = est.labeled[pa][pb].at(l - j);
            sys.rhs[row] = est.responses.s_pi[pa][lag_index(l, L)];
        }
    }
    return sys;
}

namespace {

// Shared shell for the two HDIM2 systems: rows (pi, l), unknowns kappa_nc,
// kappa_cc, with the kappa_nc(0) = 0 constraint replacing the degenerate
// (n, 0) row.
template <typename EntryFn>
LinearSystem assemble_hdim2_shell(const PooledEstimates& est, EntryFn entry) {
    const int L = est.max_lag;
    const std::size_t bs = static_cast<std::size_t>(L) + 1;
    const std::size_t n = 2 * bs;
    LinearSystem sys;
    sys.n = n;
    sys.matrix.assign(n * n, 0.0);
    sys.rhs.assign(n, 0.0);
    sys.unknowns = {"kappa_nc", "kappa_cc"};
    for (int pa = 0; pa < 2; ++pa) {
        for (int l = 0; l <= L; ++l) {
            const std::size_t row = static_cast<std::size_t>(pa) * bs + static_cast<std::size_t>(l);
            if (pa == kN && l == 0) {
                sys.matrix[row * n + 0] = 1.0;  // kappa_nc(0) := 0
                sys.rhs[row] = 0.0;
                continue;
            }
            for (int pb = 0; pb < 2; ++pb)
                for (int j = 0; j <= L; ++j)
                    sys.matrix[row * n + static_cast<std::size_t>(pb) * bs +
                               static_cast<std::size_t>(j)] = entry(pa, l, pb, j);
            sys.rhs[row] = est.responses.s_pi[pa][lag_index(l, L)];
        }
    }
    return sys;
}

}  // namespace

LinearSystem assemble_hdim2(const PooledEstimates& est) {
    if (!est.has_triples)
        throw std::invalid_argument("assemble_hdim2: three-point tensors were not estimated");
    return assemble_hdim2_shell(est, [&est](int pa, int l, int pb, int j) {
        return est.triple[pa][pb].at(l, j);
    });
}

LinearSystem assemble_hdim2_star(const PooledEstimates& est) {
    // Two-point factorisation of the triple correlation. Where the current
    // event coincides with a kernel lag (l = 0 or j = 0) the label indicator
    // collapses exactly, so those entries need no approximation.
    return assemble_hdim2_shell(est, [&est](int pa, int l, int pb, int j) -> double {
        if (l == 0 && j == 0) return pa == kC && pb == kC ? est.p_c : 0.0;
        if (j == 0) return pb == kC ? est.labeled[pa][kC].at(l) : 0.0;
        if (l == 0) return pa == kC ? est.labeled[pb][kC].at(j) : 0.0;
        return est.p_c * est.labeled[pa][pb].at(l - j);
    });
}

namespace {

// Levinson recursion for a symmetric Toeplitz system; empty result on
// breakdown. min_denom reports the smallest reflection denominator seen.
std::vector<double> levinson_solve(std::span<const double> r, std::span<const double> b,
                                   double* min_denom) {
    const std::size_t n = r.size();
    *min_denom = 1.0;
    if (n == 0 || r[0] == 0.0) return {};
    std::vector<double> f = {1.0 / r[0]};
    std::vector<double> x = {b[0] / r[0]};
    std::vector<double> fn;
    for (std::size_t m = 2; m <= n; ++m) {
        double ef = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) ef += r[m - 1 - i] * f[i];
        const double denom = 1.0 - ef * ef;
        *min_denom = std::min(*min_denom, std::abs(denom));
        if (std::abs(denom) < 1e-13) return {};
        fn.assign(m, 0.0);
        for (std::size_t i = 0; i + 1 < m; ++i) fn[i] += f[i] / denom;
        for (std::size_t i = 1; i < m; ++i) fn[i] -= ef * f[m - 1 - i] / denom;
        double ex = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) ex += r[m - 1 - i] * x[i];
        const double scale = b[m - 1] - ex;
        x.push_back(0.0);
        for (std::size_t i = 0; i < m; ++i) x[i] += scale * fn[m - 1 - i];
        f = fn;
    }
    return x;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::vector<double> solve_system(const LinearSystem& system, const SolvePolicy& policy,
                                 SolveReport* report) {
    const std::size_t n = system.n;
    if (n == 0 || system.matrix.size() != n * n || system.rhs.size() != n)
        throw std::invalid_argument("solve_system: malformed system");
    SolveReport rep;

    if (system.symmetric_toeplitz) {
        std::vector<double> first_row(system.matrix.begin(),
                                      system.matrix.begin() + static_cast<long>(n));
        double min_denom = 0.0;
        auto x = levinson_solve(first_row, system.rhs, &min_denom);
        if (!x.empty() && min_denom > 1e-10) {
            rep.levinson = true;
            rep.condition = 1.0 / min_denom;  // coarse proxy from the recursion
            if (rep.condition <= policy.condition_limit) {
                if (report) *report = rep;
                return x;
            }
        }
        // breakdown or suspicious conditioning: fall through to the dense path
    }

    Eigen::Map<const RowMatrix> a(system.matrix.data(), static_cast<long>(n),
                                  static_cast<long>(n));
    Eigen::Map<const Eigen::VectorXd> b(system.rhs.data(), static_cast<long>(n));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double rcond = lu.rcond();
    rep.levinson = false;
    rep.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();

    if (!std::isfinite(rep.condition) || rep.condition > policy.condition_limit) {
        if (!policy.ridge_fallback)
            throw CalibrationError("solve_system: ill-conditioned calibration matrix (cond ~ " +
                                       std::to_string(rep.condition) + ")",
                                   rep.condition);
        rep.ridge_lambda = 1e-8 * a.trace() / static_cast<double>(n);
        Eigen::MatrixXd reg = a + rep.ridge_lambda * Eigen::MatrixXd::Identity(
                                                         static_cast<long>(n), static_cast<long>(n));
        Eigen::VectorXd x = reg.partialPivLu().solve(b);
        if (report) *report = rep;
        return {x.data(), x.data() + n};
    }

    Eigen::VectorXd x = lu.solve(b);
    if (report) *report = rep;
    return {x.data(), x.data() + n};
}

std::vector<double> smooth_kernel(std::span<const double> kernel, int cutoff) {
    std::vector<double> out(kernel.begin(), kernel.end());
    const int len = static_cast<int>(kernel.size());
    if (cutoff < 1) cutoff = 1;
    if (len <= cutoff + 2) {
        std::cerr << "proplab: kernel too short to smooth (" << len << " lags), returned unchanged\n";
        return out;
    }

    // Fit in log-lag coordinates from the cutoff to the end; the cutoff point
    // itself anchors continuity.
    std::vector<double> xs, ys;
    for (int j = cutoff; j < len; ++j) {
        xs.push_back(std::log(static_cast<double>(j)));
        ys.push_back(kernel[static_cast<std::size_t>(j)]);
    }
    const double x_lo = xs.front(), x_hi = xs.back();
    int m = static_cast<int>(std::lround(3.0 * (x_hi - x_lo)));
    m = std::clamp(m, 4, static_cast<int>(xs.size()) / 2);
    std::vector<double> centers(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k)
        centers[static_cast<std::size_t>(k)] =
            x_lo + (x_hi - x_lo) * static_cast<double>(k) / static_cast<double>(m - 1);
    const double shape = m > 1 ? centers[1] - centers[0] : 1.0;

    const int cols = m + 2;  // multiquadrics plus an affine part
    Eigen::MatrixXd design(xs.size(), cols);
    Eigen::VectorXd target(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (int k = 0; k < m; ++k) {
            const double d = xs[i] - centers[static_cast<std::size_t>(k)];
            design(static_cast<long>(i), k) = std::sqrt(d * d + shape * shape);
        }
        design(static_cast<long>(i), m) = 1.0;
        design(static_cast<long>(i), m + 1) = xs[i];
        target(static_cast<long>(i)) = ys[i];
    }
    Eigen::VectorXd w = design.colPivHouseholderQr().solve(target);

    for (int j = cutoff + 1; j < len; ++j) {
        const double x = std::log(static_cast<double>(j));
        double v = w(m) + w(m + 1) * x;
        for (int k = 0; k < m; ++k) {
            const double d = x - centers[static_cast<std::size_t>(k)];
            v += w(k) * std::sqrt(d * d + shape * shape);
        }
        out[static_cast<std::size_t>(j)] = v;
    }
    return out;
}

CalibratedModel estimate_cim2(const InstrumentData& data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& day : data.days)
        for (const auto& ev : day.events)
            if (ev.label == Label::c) {
                sum += std::abs(ev.ret);
                ++count;
            }
    if (count == 0) throw std::runtime_error("estimate_cim2: no price-changing events");
    CalibratedModel model;
    model.kind = ModelKind::CIM2;
    model.max_lag = 0;
    model.kernels["delta_c"] = {sum / static_cast<double>(count)};
    return model;
}

CalibratedModel calibrate_pooled(const PooledEstimates& est, ModelKind kind,
                                 const CalibrationOptions& options) {
    LinearSystem sys;
    SolvePolicy policy;
    policy.condition_limit = options.condition_limit;
    switch (kind) {
        case ModelKind::TIM1:
            sys = assemble_tim1(est, options.tim1_matrix);
            break;
        case ModelKind::TIM2:
            sys = assemble_tim2(est);
            break;
        case ModelKind::HDIM2:
            sys = assemble_hdim2(est);
            policy.ridge_fallback = true;
            break;
        case ModelKind::HDIM2star:
            sys = assemble_hdim2_star(est);
            policy.ridge_fallback = true;
            break;
        case ModelKind::CIM2:
            throw std::invalid_argument("calibrate_pooled: CIM2 is estimated from events directly");
    }

    SolveReport report;
    const auto solution = solve_system(sys, policy, &report);

    CalibratedModel model;
    model.kind = kind;
    model.max_lag = est.max_lag;
    const std::size_t bs = static_cast<std::size_t>(est.max_lag) + 1;
    for (std::size_t blk = 0; blk < sys.unknowns.size(); ++blk)
        model.kernels[sys.unknowns[blk]] =
            std::vector<double>(solution.begin() + static_cast<long>(blk * bs),
                                solution.begin() + static_cast<long>((blk + 1) * bs));
    if (kind == ModelKind::HDIM2 || kind == ModelKind::HDIM2star)
        model.kernels["kappa_nc"][0] = 0.0;

    const bool smooth_default = kind == ModelKind::HDIM2 || kind == ModelKind::HDIM2star;
    if (options.smooth.value_or(smooth_default)) {
        for (auto& [name, k] : model.kernels) k = smooth_kernel(k, options.smooth_cutoff);
        if (auto it = model.kernels.find("kappa_nc"); it != model.kernels.end())
            it->second[0] = 0.0;
        model.meta.smoothed = true;
    }
    model.meta.window = options.window_note;
    model.meta.condition = report.condition;
    model.meta.ridge_lambda = report.ridge_lambda;
    model.meta.toeplitz_fast_path = report.levinson;
    return model;
}

CalibratedModel calibrate(const InstrumentData& data, ModelKind kind,
                          const CalibrationOptions& options) {
    if (kind == ModelKind::CIM2) {
        CalibratedModel model = estimate_cim2(data);
        model.meta.window = options.window_note;
        return model;
    }
    EstimateOptions eopt;
    eopt.max_lag = options.max_lag > 0 ? options.max_lag : data.max_lag;
    eopt.need_triples = kind == ModelKind::HDIM2;
    eopt.segment_len = options.segment_len;
    const auto days = estimate_by_day(data, eopt);
    const auto pooled = pool_estimates(days);
    return calibrate_pooled(pooled, kind, options);
}

}  // namespace proplab
