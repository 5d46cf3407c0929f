// Acceptance suite: ten end-to-end criteria, one pass/fail line each.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "proplab/calibration.hpp"
#include "proplab/diagnostics.hpp"
#include "proplab/events.hpp"
#include "proplab/simulate.hpp"
#include "proplab/spectral.hpp"
#include "proplab/synth.hpp"

using namespace proplab;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", num, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <typename Fn>
void criterion(int num, const std::string& name, Fn body) {
    try {
        auto [pass, detail] = body();
        report(num, name, pass, detail);
    } catch (const std::exception& e) {
        report(num, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ------------------------------------------------------------------------

// |got - want| against 1e-10 relative with a 1e-12 absolute floor; returns
// the worst margin ratio (<= 1 passes).
double tol_ratio(double got, double want) {
    return std::abs(got - want) / (1e-12 + 1e-10 * std::abs(want));
}

std::pair<bool, std::string> c1_estimator_exactness() {
    const auto t0 = clock_type::now();
    double worst2 = 0.0, worst3 = 0.0;
    unsigned seed = 1000;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t t_len = rep % 2 == 0 ? 32 : 64;
        const int lag = static_cast<int>(t_len) - 1;
        const auto f = oracles::rademacher(t_len, ++seed);
        const auto g = oracles::rademacher(t_len, ++seed);
        const auto h = oracles::rademacher(t_len, ++seed);

        const auto fast2 = xcorr2(f, g, lag);
        const auto slow2 = oracles::xcorr2_direct(f, g, lag);
        for (int l = -lag; l <= lag; ++l)
            worst2 = std::max(worst2, tol_ratio(fast2.at(l), slow2.at(l)));

        const auto fast3 = xcorr3(f, g, h, lag);
        const auto slow3 = oracles::xcorr3_direct(f, g, h, lag);
        for (int l = -lag; l <= lag; ++l)
            for (int j = -lag; j <= lag; ++j) {
                if (!slow3.valid(l, j)) continue;
                if (!fast3.valid(l, j)) return {false, "mask mismatch"};
                worst3 = std::max(worst3, tol_ratio(fast3.at(l, j), slow3.at(l, j)));
            }
    }
    const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    const bool pass = worst2 <= 1.0 && worst3 <= 1.0 && secs < 5.0;
    return {pass, "worst tolerance ratio xcorr2 " + fmt2(worst2) + ", xcorr3 " + fmt2(worst3) +
                      " (<=1 at 1e-10 rel / 1e-12 abs), runtime " + fmt2(secs) + " s"};
}

std::pair<bool, std::string> c2_blind_spot_padding() {
    const int lag = 16;
    const std::size_t seg = 32;  // T = 2L; every day below is shorter and gets padded
    const std::vector<std::size_t> lens = {17, 21, 26, 31};
    std::vector<CrossCorr3> fast_days, slow_days;
    unsigned seed = 2000;
    for (std::size_t len : lens) {
        const auto f = oracles::rademacher(len, ++seed);
        const auto g = oracles::rademacher(len, ++seed);
        const auto h = oracles::rademacher(len, ++seed);
        fast_days.push_back(xcorr3_day(f, g, h, lag, seg));
        slow_days.push_back(oracles::xcorr3_direct(f, g, h, lag));
    }
    const auto fast = welch_average(std::span<const CrossCorr3>(fast_days));
    const auto slow = welch_average(std::span<const CrossCorr3>(slow_days));
    double worst = 0.0;
    for (int l = -lag; l <= lag; ++l)
        for (int j = -lag; j <= lag; ++j) {
            if (!slow.valid(l, j)) continue;
            if (!fast.valid(l, j)) return {false, "mask mismatch"};
            if (fast.count_at(l, j) != slow.count_at(l, j))
                return {false, "summand count mismatch"};
            worst = std::max(worst, tol_ratio(fast.at(l, j), slow.at(l, j)));
        }
    return {worst <= 1.0, "worst tolerance ratio " + fmt2(worst) +
                              " (<=1) with true per-entry summand counts"};
}

std::pair<bool, std::string> c3_round_trip() {
    const auto t0 = clock_type::now();
    FlowSpec spec;
    spec.events_per_day = 50000;
    spec.days = 20;
    spec.sign_memory = 0.6;
    spec.change_prob.p0 = 0.5;
    spec.noise = 1e-3;
    spec.seed = 501;

    CalibrationOptions opt;
    opt.max_lag = 64;
    opt.smooth = false;

    auto max_rel = [](const std::vector<double>& got, const std::vector<double>& want, int lo,
                      int hi) {
        double w = 0.0;
        for (int j = lo; j <= hi; ++j)
            w = std::max(w, std::abs(got[static_cast<std::size_t>(j)] -
                                     want[static_cast<std::size_t>(j)]) /
                                std::abs(want[static_cast<std::size_t>(j)]));
        return w;
    };

    spec.generator = make_power_law_model(ModelKind::TIM1, 64, 2e-3, 0.5);
    const auto m1 = calibrate(generate(spec), ModelKind::TIM1, opt);
    const double e1 = max_rel(m1.kernel("g"), spec.generator.kernel("g"), 0, 32);

    spec.generator = make_power_law_model(ModelKind::TIM2, 64, 2e-3, 0.5, 0.5);
    const auto m2 = calibrate(generate(spec), ModelKind::TIM2, opt);
    const double e2 = std::max(max_rel(m2.kernel("g_c"), spec.generator.kernel("g_c"), 0, 32),
                               max_rel(m2.kernel("g_n"), spec.generator.kernel("g_n"), 0, 32));

    spec.generator = make_power_law_model(ModelKind::HDIM2, 64, 2e-3, 0.5, 0.5);
    const auto m3 = calibrate(generate(spec), ModelKind::HDIM2, opt);
    const double e3 =
        std::max(max_rel(m3.kernel("kappa_cc"), spec.generator.kernel("kappa_cc"), 0, 32),
                 max_rel(m3.kernel("kappa_nc"), spec.generator.kernel("kappa_nc"), 1, 32));
    const bool knc0 = m3.kernel("kappa_nc")[0] == 0.0;

    const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    const bool pass = e1 <= 0.05 && e2 <= 0.05 && e3 <= 0.05 && knc0 && secs < 300.0;
    return {pass, "max rel err tim1 " + fmt2(e1) + ", tim2 " + fmt2(e2) + ", hdim2 " + fmt2(e3) +
                      ", kappa_nc(0)=" + (knc0 ? "0" : "nonzero") + ", runtime " + fmt2(secs) +
                      " s"};
}

std::pair<bool, std::string> c4_cim2_limit() {
    const double delta = 0.01;
    FlowSpec spec;
    spec.events_per_day = 20000;
    spec.days = 20;
    spec.sign_memory = 0.6;
    spec.change_prob.p0 = 0.4;
    spec.generator = make_cim2(delta);
    spec.noise = 5e-3;
    spec.seed = 801;
    const auto data = generate(spec);

    EstimateOptions eopt;
    eopt.max_lag = 16;
    eopt.need_triples = true;
    const auto days = estimate_by_day(data, eopt);
    CalibrationOptions copt;
    copt.smooth = false;
    const auto full = calibrate_pooled(pool_estimates(days), ModelKind::HDIM2, copt);

    // leave-one-day-out jackknife for the kernel standard errors
    const std::size_t n = days.size();
    std::vector<CalibratedModel> jk;
    jk.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        jk.push_back(
            calibrate_pooled(pool_estimates(days, static_cast<int>(i)), ModelKind::HDIM2, copt));
    auto se_of = [&](const char* name, std::size_t j) {
        double mean = 0.0;
        for (const auto& m : jk) mean += m.kernel(name)[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& m : jk) {
            const double d = m.kernel(name)[j] - mean;
            ss += d * d;
        }
        return std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
    };

    const double z0 = std::abs(full.kernel("kappa_cc")[0] - delta) / se_of("kappa_cc", 0);
    double worst = 0.0;
    for (std::size_t j = 1; j <= 16; ++j) {
        worst = std::max(worst, std::abs(full.kernel("kappa_cc")[j]) / se_of("kappa_cc", j));
        worst = std::max(worst, std::abs(full.kernel("kappa_nc")[j]) / se_of("kappa_nc", j));
    }
    const bool pass = z0 <= 3.0 && worst <= 5.0;
    return {pass, "kappa_cc(0) vs delta_c: " + fmt2(z0) + " se; other entries max " +
                      fmt2(worst) + " se from zero"};
}

std::pair<bool, std::string> c5_bias_diagnostic() {
    const auto truth = make_power_law_model(ModelKind::HDIM2, 32, 2e-3, 0.5, 0.3);
    FlowSpec spec;
    spec.sign_memory = 0.75;
    spec.change_prob.family = ChangeProb::Family::Pinning;
    spec.change_prob.p0 = 0.5;
    spec.change_prob.gamma = 1.0;
    spec.generator = truth;
    spec.noise = 2e-3;
    spec.days = 40;
    spec.events_per_day = 100000;
    spec.seed = 704;
    const auto cal_data = generate(spec);
    spec.days = 24;
    spec.events_per_day = 50000;
    spec.seed = 754;
    const auto eval_data = generate(spec);

    CalibrationOptions opt;
    opt.max_lag = 32;
    const auto hdim2 = calibrate(cal_data, ModelKind::HDIM2, opt);
    const auto tim2 = calibrate(cal_data, ModelKind::TIM2, opt);

    const int lb = 10;
    auto scan = [&](const CalibratedModel& m, int* arg_lag) {
        const auto bias = calibration_bias(eval_data, run_model(m, eval_data), lb);
        double worst = 0.0;
        for (int pi = 0; pi < 2; ++pi)
            for (int l = -lb; l <= lb; ++l) {
                const std::size_t i = static_cast<std::size_t>(l + lb);
                const double z = std::abs(bias.bias[static_cast<std::size_t>(pi)][i]) /
                                 bias.se[static_cast<std::size_t>(pi)][i];
                if (z > worst) {
                    worst = z;
                    if (arg_lag) *arg_lag = l;
                }
            }
        return worst;
    };
    int tim2_lag = 0;
    const double z_h = scan(hdim2, nullptr);
    const double z_t = scan(tim2, &tim2_lag);
    const bool pass = z_h <= 3.0 && z_t > 5.0 && std::abs(tim2_lag) <= 10;
    return {pass, "hdim2 max |z| " + fmt2(z_h) + " (<=3); tim2 rejected at " + fmt2(z_t) +
                      " se, lag " + std::to_string(tim2_lag)};
}

std::pair<bool, std::string> c6_curvature_fixtures() {
    auto sample = [](auto f, double a) {
        std::vector<double> x(100), y(100);
        for (int i = 0; i < 100; ++i) {
            x[static_cast<std::size_t>(i)] = -a + 2.0 * a * i / 99.0;
            y[static_cast<std::size_t>(i)] = f(x[static_cast<std::size_t>(i)]);
        }
        return std::pair{x, y};
    };
    const double a = 1.0;
    const auto [xl, yl] = sample([](double x) { return 1.7 * x; }, a);
    const double chi_line = curvature(xl, yl, a);
    const auto [xs, ys] =
        sample([a](double x) { return std::sin(std::numbers::pi * x / a); }, a);
    const double chi_sine = curvature(xs, ys, a);
    const auto [xt, yt] = sample(
        [a](double x) {
            const double s = x >= 0 ? 1.0 : -1.0;
            const double ax = std::abs(x);
            return s * (ax <= a / 2 ? ax : a - ax) * 2.0 / a;
        },
        a);
    const double chi_tent = curvature(xt, yt, a);

    const bool pass = std::abs(chi_line) <= 0.01 && std::abs(chi_sine + 2.0 / 3.0) <= 0.02 &&
                      std::abs(chi_tent + 2.0 / 3.0) <= 0.02;
    return {pass, "chi(line) " + fmt2(chi_line) + ", chi(sine) " + fmt2(chi_sine) +
                      ", chi(tent) " + fmt2(chi_tent)};
}

std::pair<bool, std::string> c7_sinusoidal_impact() {
    FlowSpec spec;
    spec.events_per_day = 30000;
    spec.days = 12;
    spec.sign_memory = 0.85;
    spec.change_prob.family = ChangeProb::Family::Pinning;
    spec.change_prob.p0 = 0.5;
    spec.change_prob.gamma = 1.0;
    spec.change_prob.window = 50;
    spec.generator = make_cim2(0.01);
    spec.seed = 99;
    const auto pinned = generate(spec);
    const double chi_pinned = curvature(aggregate_impact(pinned, 50, 31, ImbalanceKind::Sign));

    spec.change_prob.family = ChangeProb::Family::Constant;
    spec.change_prob.p0 = 0.4;
    const auto flat = generate(spec);
    const double chi_flat = curvature(aggregate_impact(flat, 50, 31, ImbalanceKind::Sign));

    const bool pass = chi_pinned <= -0.2 && std::abs(chi_flat) <= 0.05;
    return {pass, "pinning chi " + fmt2(chi_pinned) + " (<= -0.2); constant chi " +
                      fmt2(chi_flat) + " (|.| <= 0.05)"};
}

std::pair<bool, std::string> c8_diffusivity() {
    // (a) flat signature for iid returns: per-day excess within 3 se
    FlowSpec spec;
    spec.events_per_day = 5000;
    spec.days = 16;
    spec.sign_memory = 0.5;
    spec.change_prob.p0 = 1.0;
    spec.generator = make_cim2(1e-4);
    spec.noise = 1e-4;
    spec.seed = 811;
    const auto iid = generate(spec);
    std::vector<std::vector<double>> excess;
    for (const auto& day : iid.days) {
        std::vector<std::vector<double>> one = {log_mid_path(day)};
        excess.push_back(signature_plot(one, 100).d_excess);
    }
    std::vector<double> mean, se;
    mean_and_stderr(excess, mean, se);
    double z_flat = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
        z_flat = std::max(z_flat, std::abs(mean[i]) / se[i]);

    // (b) simulated cim2 on persistent signs is superdiffusive over [10, 500]
    FlowSpec pspec;
    pspec.events_per_day = 10000;
    pspec.days = 8;
    pspec.sign_memory = 0.7;
    pspec.change_prob.family = ChangeProb::Family::Pinning;
    pspec.generator = make_cim2(0.01);
    pspec.seed = 821;
    const auto persistent = generate(pspec);
    const auto cim2 = estimate_cim2(persistent);
    const auto pred = run_model(cim2, persistent);
    const auto plot = signature_plot(persistent, 500, &pred.r_hat);
    const double rise = (std::log(plot.d[499]) - std::log(plot.d[9])) /
                        (std::log(500.0) - std::log(10.0));

    // (c) measured Hurst of an iid walk
    const auto signs = gen_sign_flow(100000, 0.5, 822);
    std::vector<double> walk(signs.size() + 1, 0.0);
    for (std::size_t t = 0; t < signs.size(); ++t) walk[t + 1] = walk[t] + signs[t];
    std::vector<std::vector<double>> walk_days = {walk};
    const double hurst = hurst_exponent(walk_days);

    const bool pass = z_flat <= 3.0 && rise > 0.1 && plot.d[499] > plot.d[9] &&
                      std::abs(hurst - 0.5) <= 0.03;
    return {pass, "flat max |z| " + fmt2(z_flat) + "; cim2 log-log rise " + fmt2(rise) +
                      "; iid walk H " + fmt2(hurst)};
}

std::pair<bool, std::string> c9_response_identity() {
    const auto truth = make_power_law_model(ModelKind::HDIM2, 16, 2e-3, 0.5, 0.3);
    FlowSpec spec;
    spec.events_per_day = 20000;
    spec.days = 64;
    spec.sign_memory = 0.75;
    spec.change_prob.family = ChangeProb::Family::Pinning;
    spec.change_prob.p0 = 0.5;
    spec.change_prob.gamma = 1.0;
    spec.generator = truth;
    spec.noise = 2e-3;
    spec.seed = 831;
    const auto data = generate(spec);

    const int lag = 16;
    EstimateOptions eopt;
    eopt.max_lag = lag;
    eopt.need_triples = true;
    const auto days = estimate_by_day(data, eopt);
    const auto pooled = pool_estimates(days);
    CalibrationOptions copt;
    copt.smooth = false;
    const auto hdim2 = calibrate_pooled(pooled, ModelKind::HDIM2, copt);
    const auto tim2 = calibrate_pooled(pooled, ModelKind::TIM2, copt);

    // R = sum_pi R_pi
    const auto rf = response_function(pooled.responses);
    double chain = 0.0;
    for (std::size_t i = 0; i < rf.r.size(); ++i)
        chain = std::max(chain, std::abs(rf.r[i] - rf.r_pi[0][i] - rf.r_pi[1][i]));

    // in-sample closed form equals the empirical response at positive lags
    double cf_dev = 0.0;
    for (const auto* m : {&hdim2, &tim2}) {
        const auto cf = closed_form_response(*m, pooled);
        for (int l = 0; l <= lag; ++l)
            cf_dev = std::max(cf_dev, std::abs(cf.r[static_cast<std::size_t>(l + lag)] -
                                               rf.r[static_cast<std::size_t>(l + lag)]));
    }

    // simulated responses: per-day deviation from the empirical one
    auto sim_dev_z = [&](const CalibratedModel& m) {
        const auto pred = run_model(m, data);
        const auto days_pred = estimate_by_day(with_returns(data, pred.r_hat), eopt);
        const std::size_t span = 2 * static_cast<std::size_t>(lag) + 1;
        std::vector<std::vector<double>> diffs;
        for (std::size_t d = 0; d < days.size(); ++d) {
            std::vector<double> sd(span);
            for (std::size_t i = 0; i < span; ++i)
                sd[i] = days_pred[d].resp[0][0].values[i] + days_pred[d].resp[0][1].values[i] +
                        days_pred[d].resp[1][0].values[i] + days_pred[d].resp[1][1].values[i] -
                        days[d].resp[0][0].values[i] - days[d].resp[0][1].values[i] -
                        days[d].resp[1][0].values[i] - days[d].resp[1][1].values[i];
            std::vector<double> rd(span, 0.0);
            for (int l = 1; l <= lag; ++l)
                rd[static_cast<std::size_t>(lag + l)] =
                    rd[static_cast<std::size_t>(lag + l - 1)] +
                    sd[static_cast<std::size_t>(lag + l - 1)];
            for (int l = -1; l >= -lag; --l)
                rd[static_cast<std::size_t>(lag + l)] =
                    rd[static_cast<std::size_t>(lag + l + 1)] -
                    sd[static_cast<std::size_t>(lag + l)];
            diffs.push_back(std::move(rd));
        }
        std::vector<double> mean, se;
        mean_and_stderr(diffs, mean, se);
        double worst = 0.0;
        for (int l = -10; l <= 10; ++l)
            worst = std::max(worst, std::abs(mean[static_cast<std::size_t>(l + lag)]) /
                                        se[static_cast<std::size_t>(l + lag)]);
        return worst;
    };
    const double z_h = sim_dev_z(hdim2);
    const double z_t = sim_dev_z(tim2);

    const bool pass = chain <= 1e-14 && cf_dev <= 1e-10 && z_t > 5.0 && z_t > 2.0 * z_h;
    return {pass, "chain gap " + fmt2(chain) + "; closed-form gap " + fmt2(cf_dev) +
                      "; simulated deviation z tim2 " + fmt2(z_t) + " vs hdim2 " + fmt2(z_h)};
}

std::pair<bool, std::string> c10_determinism() {
    const char* bin = std::getenv("PROPLAB_BIN");
    std::string prog = bin ? bin : "";
    if (prog.empty()) {
        for (const char* candidate : {"./tools/proplab", "../tools/proplab", "./proplab"})
            if (fs::exists(candidate)) {
                prog = candidate;
                break;
            }
    }
    if (prog.empty()) return {false, "proplab binary not found (set PROPLAB_BIN)"};

    const fs::path base = fs::temp_directory_path() / "proplab_acceptance";
    fs::remove_all(base);
    if (prog.find('/') != std::string::npos && prog[0] != '/')
        prog = fs::absolute(prog).string();
    // identical commands with identical relative paths, from each run's own
    // working directory
    for (const char* run : {"run1", "run2"}) {
        const fs::path dir = base / run;
        fs::create_directories(dir);
        const std::string cd = "cd " + dir.string() + " && " + prog + " ";
        std::string cmd = cd +
                          "synth --output events.csv --days 4 --events 2000 --sign-memory 0.7 "
                          "--change-prob pinning:0.5,2 --generator hdim2 --gen-max-lag 16 "
                          "--kernel-amp 2e-3 --noise 1e-3 --seed 42 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "synth failed"};
        cmd = cd + "calibrate --input events.csv --model all --split odd "
              "--max-lag 16 --output-dir models 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "calibrate failed"};
        cmd = cd + "simulate --input events.csv --model-file models/hdim2.json "
              "--split even --output pred.csv 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "simulate failed"};
        cmd = cd + "diagnose --input events.csv --models models --split even "
              "--metric all --N 50 --bins 15 --output-dir diag 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "diagnose failed"};
    }

    // byte-compare every produced file
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(base / "run1")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), base / "run1");
        const fs::path other = base / "run2" / rel;
        if (!fs::exists(other)) return {false, "missing in run2: " + rel.string()};
        std::ifstream a(entry.path(), std::ios::binary), b(other, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        if (sa.str() != sb.str()) return {false, "byte mismatch: " + rel.string()};
        ++compared;
    }
    return {compared > 0, std::to_string(compared) + " files byte-identical across reruns"};
}

}  // namespace

int main() {
    std::printf("proplab acceptance suite\n");
    criterion(1, "estimator exactness vs direct sums", c1_estimator_exactness);
    criterion(2, "blind spot and short-day padding", c2_blind_spot_padding);
    criterion(3, "round-trip kernel recovery", c3_round_trip);
    criterion(4, "cim2 limit of hdim2", c4_cim2_limit);
    criterion(5, "calibration-bias diagnostic", c5_bias_diagnostic);
    criterion(6, "curvature fixtures", c6_curvature_fixtures);
    criterion(7, "sinusoidal impact from pinning", c7_sinusoidal_impact);
    criterion(8, "diffusivity and signature plots", c8_diffusivity);
    criterion(9, "response identities and contrasts", c9_response_identity);
    criterion(10, "pipeline determinism", c10_determinism);
    if (failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
