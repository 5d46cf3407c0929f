// proplab: calibrate, simulate and diagnose propagator price-impact models
// on trade-event data. Subcommands: ingest, synth, calibrate, simulate,
// diagnose, report. Exit codes: 0 ok, 2 input/config error, 3 numerical
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "proplab/calibration.hpp"
#include "proplab/diagnostics.hpp"
#include "proplab/events.hpp"
#include "proplab/simulate.hpp"
#include "proplab/spectral.hpp"
#include "proplab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace proplab;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

InstrumentData load_input(const std::string& path, const IngestConfig& config,
                          IngestStats* stats = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_events(in, config, stats);
}

InstrumentData apply_split(const InstrumentData& data, const std::string& split) {
    if (split == "none") return data;
    auto [odd, even] = split_odd_even(data);
    if (split == "odd") return std::move(odd);
    if (split == "even") return std::move(even);
    throw std::runtime_error("unknown split: " + split);
}

// "const:p" or "pinning:p0:gamma" (a comma also separates the last two).
ChangeProb parse_change_prob(const std::string& text, int window) {
    ChangeProb cp;
    cp.window = window;
    const auto colon = text.find(':');
    const std::string family = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (family == "const" || family == "constant") {
        cp.family = ChangeProb::Family::Constant;
        if (!args.empty()) cp.p0 = std::stod(args);
    } else if (family == "pinning") {
        cp.family = ChangeProb::Family::Pinning;
        if (!args.empty()) {
            const auto sep = args.find_first_of(",:");
            cp.p0 = std::stod(args.substr(0, sep));
            if (sep != std::string::npos) cp.gamma = std::stod(args.substr(sep + 1));
        }
    } else {
        throw std::runtime_error("unknown change-prob family: " + family);
    }
    return cp;
}

std::vector<ModelKind> parse_model_list(const std::string& name) {
    if (name == "all")
        return {ModelKind::TIM1, ModelKind::TIM2, ModelKind::HDIM2, ModelKind::HDIM2star,
                ModelKind::CIM2};
    return {model_from_name(name)};
}

CalibratedModel read_model_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

// Models for diagnose/report: explicit files, or every *.json in a directory.
std::map<std::string, CalibratedModel> collect_models(const std::vector<std::string>& files,
                                                      const std::string& dir) {
    std::map<std::string, CalibratedModel> models;
    for (const auto& f : files) {
        auto m = read_model_file(f);
        models[model_name(m.kind)] = std::move(m);
    }
    if (!dir.empty()) {
        std::vector<fs::path> paths;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".json") paths.push_back(entry.path());
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            try {
                auto m = read_model_file(p);
                models[model_name(m.kind)] = std::move(m);
            } catch (const std::exception&) {
                // not a model file; ignore
            }
        }
    }
    if (models.empty()) throw std::runtime_error("no calibrated models found");
    return models;
}

// ---------------------------------------------------------------- ingest --

struct IngestArgs {
    std::string input, output, summary;
    IngestConfig config;
};

int run_ingest(const IngestArgs& args) {
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open " + args.input);
    IngestStats stats;
    const auto data = load_events(in, args.config, &stats);

    auto out = open_out(args.output);
    out << "# proplab " << kVersion << "\n";
    write_canonical(out, data);

    std::cerr << "ingest: " << data.days.size() << " days, " << data.total_events()
              << " events kept; rejected " << stats.rejected_malformed << " malformed, "
              << stats.rejected_irregular << " irregular, " << stats.rejected_at_mid
              << " at-mid, " << stats.rejected_mixed_ms << " mixed-millisecond\n";

    if (!args.summary.empty()) {
        json j;
        j["instrument"] = data.instrument_id;
        j["days"] = data.days.size();
        j["events"] = data.total_events();
        j["max_lag"] = data.max_lag;
        j["rejected"] = {{"malformed", stats.rejected_malformed},
                         {"irregular", stats.rejected_irregular},
                         {"at_mid", stats.rejected_at_mid},
                         {"mixed_ms", stats.rejected_mixed_ms}};
        j["merged_records"] = stats.merged_records;
        j["days_dropped"] =
            stats.days_dropped_empty + stats.days_dropped_shortened;
        try {
            j["eta"] = compute_eta(data);
        } catch (const std::exception&) {
            j["eta"] = nullptr;
        }
        open_out(args.summary) << j.dump(2) << "\n";
    }
    return 0;
}

// ----------------------------------------------------------------- synth --

struct SynthArgs {
    std::string output, truth_out;
    FlowSpec spec;
    std::string generator = "cim2";
    std::string generator_file;
    std::string change_prob = "const:0.4";
    int pinning_window = 50;
    double delta_c = 0.01;
    double kernel_amp = 2e-3;
    double kernel_exponent = 0.5;
    double kernel_nscale = 0.5;
    int gen_max_lag = 64;
};

int run_synth(SynthArgs args) {
    args.spec.change_prob = parse_change_prob(args.change_prob, args.pinning_window);
    if (!args.generator_file.empty()) {
        args.spec.generator = read_model_file(args.generator_file);
    } else if (args.generator == "cim2") {
        args.spec.generator = make_cim2(args.delta_c);
    } else {
        args.spec.generator = make_power_law_model(model_from_name(args.generator),
                                                   args.gen_max_lag, args.kernel_amp,
                                                   args.kernel_exponent, args.kernel_nscale);
    }
    const auto data = generate(args.spec);

    auto out = open_out(args.output);
    out << "# proplab " << kVersion << "\n";
    write_canonical(out, data);
    std::cerr << "synth: " << data.days.size() << " days x " << args.spec.events_per_day
              << " events, generator " << model_name(args.spec.generator.kind) << ", seed "
              << args.spec.seed << "\n";

    if (!args.truth_out.empty()) open_out(args.truth_out) << model_to_json(args.spec.generator);
    return 0;
}

// ------------------------------------------------------------- calibrate --

struct CalibrateArgs {
    std::string input, output_dir = ".", split = "none", model = "all";
    std::string dump_correlations;
    IngestConfig config;
    CalibrationOptions options;
    int max_lag = 0;
};

int run_calibrate(const CalibrateArgs& args) {
    const auto all = load_input(args.input, args.config);
    const auto data = apply_split(all, args.split);
    const int lag = args.max_lag > 0 ? args.max_lag : data.max_lag;
    if (lag > data.max_lag)
        throw std::runtime_error("max-lag " + std::to_string(lag) +
                                 " exceeds the shortest-day limit " +
                                 std::to_string(data.max_lag));

    CalibrationOptions opt = args.options;
    opt.max_lag = lag;
    opt.window_note = args.input + " split=" + args.split;

    const auto kinds = parse_model_list(args.model);
    const bool need_triples =
        std::any_of(kinds.begin(), kinds.end(),
                    [](ModelKind k) { return k == ModelKind::HDIM2; });

    EstimateOptions eopt;
    eopt.max_lag = lag;
    eopt.need_triples = need_triples;
    eopt.segment_len = opt.segment_len;
    std::optional<PooledEstimates> pooled;
    const bool any_kernel_model =
        std::any_of(kinds.begin(), kinds.end(),
                    [](ModelKind k) { return k != ModelKind::CIM2; });
    if (any_kernel_model) pooled = pool_estimates(estimate_by_day(data, eopt));

    json condition_report;
    for (ModelKind kind : kinds) {
        CalibratedModel model = kind == ModelKind::CIM2
                                    ? calibrate(data, kind, opt)
                                    : calibrate_pooled(*pooled, kind, opt);
        model.meta.window = opt.window_note;
        const fs::path model_path = fs::path(args.output_dir) / (model_name(kind) + ".json");
        open_out(model_path) << model_to_json(model);

        // kernels with their integrated form, for plotting
        const fs::path kcsv = fs::path(args.output_dir) / (model_name(kind) + "_kernels.csv");
        auto out = open_out(kcsv);
        out << "model,kernel,lag,value,integrated\n";
        for (const auto& [name, kernel] : model.kernels) {
            const auto integrated = integrated_kernel(kernel);
            for (std::size_t j = 0; j < kernel.size(); ++j)
                out << model_name(kind) << ',' << name << ',' << j << ',' << fmt(kernel[j])
                    << ',' << fmt(integrated[j]) << '\n';
        }
        std::cerr << "calibrate: " << model_name(kind) << " -> " << model_path.string()
                  << " (condition " << model.meta.condition;
        if (model.meta.ridge_lambda > 0) std::cerr << ", ridge " << model.meta.ridge_lambda;
        std::cerr << ")\n";
        condition_report[model_name(kind)] = {{"condition", model.meta.condition},
                                              {"ridge_lambda", model.meta.ridge_lambda},
                                              {"toeplitz_fast_path", model.meta.toeplitz_fast_path},
                                              {"smoothed", model.meta.smoothed}};
    }
    open_out(fs::path(args.output_dir) / "calibration_report.json")
        << condition_report.dump(2) << "\n";

    if (!args.dump_correlations.empty() && pooled && pooled->has_triples) {
        const char* pis[2] = {"n", "c"};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const fs::path p = fs::path(args.dump_correlations) /
                                   (std::string("triple_") + pis[a] + pis[b] + "c.csv");
                auto out = open_out(p);
                write_crosscorr3_csv(out, pooled->triple[a][b]);
            }
    }
    return 0;
}

// -------------------------------------------------------------- simulate --

struct SimulateArgs {
    std::string input, output, split = "none";
    std::vector<std::string> model_files;
    IngestConfig config;
};

int run_simulate(const SimulateArgs& args) {
    const auto data = apply_split(load_input(args.input, args.config), args.split);
    std::vector<CalibratedModel> models;
    for (const auto& f : args.model_files) models.push_back(read_model_file(f));
    std::vector<PredictedSeries> preds;
    for (const auto& m : models) preds.push_back(run_model(m, data));

    auto out = open_out(args.output);
    out << "# proplab " << kVersion << "\n";
    out << "date,t,sign,label,log_mid,ret,volume";
    if (models.size() == 1) {
        out << ",r_hat";
    } else {
        for (const auto& m : models) out << ",r_hat_" << model_name(m.kind);
    }
    out << '\n';
    for (std::size_t d = 0; d < data.days.size(); ++d) {
        const auto& day = data.days[d];
        for (std::size_t t = 0; t < day.events.size(); ++t) {
            const auto& ev = day.events[t];
            out << day.date << ',' << ev.t_ms << ',' << ev.sign << ',' << label_char(ev.label)
                << ',' << fmt(ev.log_mid) << ',' << fmt(ev.ret) << ',' << fmt(ev.volume);
            for (const auto& pred : preds) out << ',' << fmt(pred.r_hat[d][t]);
            out << '\n';
        }
    }
    std::cerr << "simulate: " << models.size() << " model(s) over " << data.days.size()
              << " days -> " << args.output << "\n";
    return 0;
}

// -------------------------------------------------------------- diagnose --

struct DiagnoseArgs {
    std::string input, output_dir = ".", split = "none", metric = "all";
    std::vector<std::string> model_files;
    std::string models_dir;
    std::vector<int> n_list = {50};
    int bins = 31;
    int bias_lags = 10;
    int signature_lags = 0;  // 0: min(500, max_lag)
    int response_lags = 0;   // 0: min(128, max_lag)
    bool plot_data = false;
    IngestConfig config;
};

void write_plot_dat(const fs::path& csv_path, const std::vector<std::string>& lines) {
    fs::path dat = csv_path;
    dat.replace_extension(".dat");
    auto out = open_out(dat);
    for (const auto& l : lines) out << l << '\n';
}

int run_diagnose(const DiagnoseArgs& args) {
    const auto data = apply_split(load_input(args.input, args.config), args.split);
    auto models = collect_models(args.model_files, args.models_dir);
    const fs::path dir(args.output_dir);
    fs::create_directories(dir);

    const std::set<std::string> want =
        args.metric == "all"
            ? std::set<std::string>{"impact", "curvature", "signature", "hurst",
                                    "response", "bias", "correlation", "slopes"}
            : std::set<std::string>{args.metric};

    // simulate every model once on this flow
    std::map<std::string, PredictedSeries> preds;
    for (const auto& [name, model] : models) preds[name] = run_model(model, data);

    json summary;
    summary["input"] = args.input;
    summary["split"] = args.split;
    summary["days"] = data.days.size();
    summary["events"] = data.total_events();
    try {
        summary["eta"] = compute_eta(data);
    } catch (const std::exception&) {
        summary["eta"] = nullptr;
    }

    if (want.count("impact") || want.count("curvature")) {
        for (ImbalanceKind kind : {ImbalanceKind::Sign, ImbalanceKind::Volume}) {
            const char* var = kind == ImbalanceKind::Sign ? "sign" : "volume";
            for (int n : args.n_list) {
                const fs::path path = dir / ("impact_" + std::string(var) + "_N" +
                                             std::to_string(n) + ".csv");
                auto out = open_out(path);
                out << "model,variable,N,bin,x,mean,stderr,count\n";
                std::vector<std::string> plot;
                auto emit = [&](const std::string& name, const ImpactCurve& curve) {
                    for (std::size_t b = 0; b < curve.bin_centers.size(); ++b)
                        out << name << ',' << var << ',' << n << ',' << b << ','
                            << fmt(curve.bin_centers[b]) << ',' << fmt(curve.means[b]) << ','
                            << fmt(curve.stderrs[b]) << ',' << curve.counts[b] << '\n';
                    plot.push_back("# " + name);
                    for (std::size_t b = 0; b < curve.bin_centers.size(); ++b)
                        plot.push_back(fmt(curve.bin_centers[b]) + " " + fmt(curve.means[b]) +
                                       " " + fmt(curve.stderrs[b]));
                    plot.push_back("");
                    if (want.count("curvature") && kind == ImbalanceKind::Sign) {
                        try {
                            summary["curvature"][name][std::to_string(n)] = curvature(curve);
                        } catch (const std::exception&) {
                            summary["curvature"][name][std::to_string(n)] = nullptr;
                        }
                    }
                };
                emit("true", aggregate_impact(data, n, args.bins, kind));
                for (const auto& [name, pred] : preds)
                    emit(name, aggregate_impact(data, n, args.bins, kind, &pred.r_hat));
                if (args.plot_data) write_plot_dat(path, plot);
            }
        }
        if (summary.contains("curvature")) {
            const fs::path path = dir / "curvature.csv";
            auto out = open_out(path);
            out << "model,N,chi\n";
            for (const auto& [name, by_n] : summary["curvature"].items())
                for (const auto& [n, chi] : by_n.items())
                    out << name << ',' << n << ','
                        << (chi.is_null() ? "nan" : fmt(chi.get<double>())) << '\n';
        }
    }

    if (want.count("signature")) {
        const int lags = args.signature_lags > 0 ? args.signature_lags
                                                 : std::min(500, data.max_lag);
        const fs::path path = dir / "signature.csv";
        auto out = open_out(path);
        out << "model,lag,d,d_se,d_excess\n";
        auto emit = [&](const std::string& name, const SignaturePlot& plot) {
            for (std::size_t i = 0; i < plot.lags.size(); ++i)
                out << name << ',' << plot.lags[i] << ',' << fmt(plot.d[i]) << ','
                    << fmt(plot.d_se[i]) << ',' << fmt(plot.d_excess[i]) << '\n';
            summary["signature_d_lf"][name] = plot.d_lf;
        };
        emit("true", signature_plot(data, lags));
        for (const auto& [name, pred] : preds)
            emit(name, signature_plot(data, lags, &pred.r_hat));
    }

    if (want.count("hurst")) {
        const fs::path path = dir / "hurst.csv";
        auto out = open_out(path);
        out << "model,hurst\n";
        std::vector<std::vector<double>> paths;
        for (const auto& day : data.days) paths.push_back(log_mid_path(day));
        out << "true," << fmt(hurst_exponent(paths)) << '\n';
        summary["hurst"]["true"] = hurst_exponent(paths);
        for (const auto& [name, pred] : preds) {
            std::vector<std::vector<double>> mp;
            for (std::size_t d = 0; d < data.days.size(); ++d) {
                std::vector<double> p(pred.r_hat[d].size() + 1, 0.0);
                for (std::size_t t = 0; t < pred.r_hat[d].size(); ++t)
                    p[t + 1] = p[t] + pred.r_hat[d][t];
                mp.push_back(std::move(p));
            }
            const double h = hurst_exponent(mp);
            out << name << ',' << fmt(h) << '\n';
            summary["hurst"][name] = h;
        }
    }

    if (want.count("response")) {
        const int lag = args.response_lags > 0 ? std::min(args.response_lags, data.max_lag)
                                               : std::min(128, data.max_lag);
        const std::size_t span = 2 * static_cast<std::size_t>(lag) + 1;
        EstimateOptions eopt;
        eopt.max_lag = lag;
        eopt.need_triples =
            models.count("hdim2") > 0;  // closed form needs the triple tensors
        const auto days_true = estimate_by_day(data, eopt);
        const auto pooled = pool_estimates(days_true);
        const fs::path path = dir / "response.csv";
        auto out = open_out(path);
        out << "source,model,pi,lag,value,stderr\n";

        // per-day cumulated responses give the across-day standard errors
        auto day_response = [&](const DayEstimates& day, int pi) {
            std::vector<double> s(span, 0.0), r(span, 0.0);
            for (std::size_t i = 0; i < span; ++i)
                s[i] = pi < 0 ? day.resp[0][0].values[i] + day.resp[0][1].values[i] +
                                    day.resp[1][0].values[i] + day.resp[1][1].values[i]
                              : day.resp[static_cast<std::size_t>(pi)][0].values[i] +
                                    day.resp[static_cast<std::size_t>(pi)][1].values[i];
            for (int l = 1; l <= lag; ++l)
                r[static_cast<std::size_t>(lag + l)] =
                    r[static_cast<std::size_t>(lag + l - 1)] + s[static_cast<std::size_t>(lag + l - 1)];
            for (int l = -1; l >= -lag; --l)
                r[static_cast<std::size_t>(lag + l)] =
                    r[static_cast<std::size_t>(lag + l + 1)] - s[static_cast<std::size_t>(lag + l)];
            return r;
        };
        auto emit_measured = [&](const std::string& source, const std::string& name,
                                 const std::vector<DayEstimates>& days) {
            const char* pis[3] = {"all", "n", "c"};
            for (int p = 0; p < 3; ++p) {
                std::vector<std::vector<double>> per_day;
                per_day.reserve(days.size());
                for (const auto& day : days) per_day.push_back(day_response(day, p - 1));
                std::vector<double> mean, se;
                mean_and_stderr(per_day, mean, se);
                for (int l = -lag; l <= lag; ++l)
                    out << source << ',' << name << ',' << pis[p] << ',' << l << ','
                        << fmt(mean[static_cast<std::size_t>(l + lag)]) << ','
                        << fmt(se[static_cast<std::size_t>(l + lag)]) << '\n';
            }
        };
        emit_measured("empirical", "true", days_true);
        for (const auto& [name, pred] : preds) {
            emit_measured("simulated", name,
                          estimate_by_day(with_returns(data, pred.r_hat), eopt));
            try {
                const auto cf = closed_form_response(models.at(name), pooled);
                for (int l = -lag; l <= lag; ++l) {
                    const std::size_t i = static_cast<std::size_t>(l + lag);
                    out << "closed_form," << name << ",all," << l << ',' << fmt(cf.r[i])
                        << ",0\n";
                    if (cf.has_pi)
                        for (int pi = 0; pi < 2; ++pi)
                            out << "closed_form," << name << ',' << (pi ? 'c' : 'n') << ','
                                << l << ','
                                << fmt(cf.r_pi[static_cast<std::size_t>(pi)][i]) << ",0\n";
                }
            } catch (const std::exception& e) {
                std::cerr << "diagnose: closed form for " << name << " skipped: " << e.what()
                          << "\n";
            }
        }
    }

    if (want.count("bias")) {
        const int lb = std::min(args.bias_lags, data.max_lag);
        const fs::path path = dir / "bias.csv";
        auto out = open_out(path);
        out << "model,pi,lag,bias,stderr,z\n";
        for (const auto& [name, pred] : preds) {
            const auto bias = calibration_bias(data, pred, lb);
            for (int pi = 0; pi < 2; ++pi)
                for (int l = -lb; l <= lb; ++l) {
                    const std::size_t i = static_cast<std::size_t>(l + lb);
                    const double b = bias.bias[static_cast<std::size_t>(pi)][i];
                    const double se = bias.se[static_cast<std::size_t>(pi)][i];
                    out << name << ',' << (pi ? 'c' : 'n') << ',' << l << ',' << fmt(b) << ','
                        << fmt(se) << ',' << fmt(se > 0 ? b / se : 0.0) << '\n';
                }
        }
    }

    if (want.count("correlation")) {
        const fs::path path = dir / "model_correlation.csv";
        auto out = open_out(path);
        out << "model,N,correlation\n";
        for (const auto& [name, pred] : preds)
            for (int n : args.n_list) {
                const double c = model_correlation(data, pred, n);
                out << name << ',' << n << ',' << fmt(c) << '\n';
                summary["model_correlation"][name][std::to_string(n)] = c;
            }
    }

    if (want.count("slopes")) {
        std::vector<int> ns = args.n_list;
        if (ns.size() < 4) ns = {10, 20, 50, 100, 200};
        const fs::path path = dir / "slopes.csv";
        auto out = open_out(path);
        out << "model,N,slope,kappa\n";
        auto emit = [&](const std::string& name,
                        const std::vector<std::vector<double>>* override_r) {
            std::vector<ImpactCurve> curves;
            for (int n : ns)
                curves.push_back(
                    aggregate_impact(data, n, args.bins, ImbalanceKind::Volume, override_r));
            const auto scaling = slope_scaling(curves);
            for (std::size_t i = 0; i < scaling.n_values.size(); ++i)
                out << name << ',' << scaling.n_values[i] << ',' << fmt(scaling.slopes[i])
                    << ',' << fmt(scaling.kappa) << '\n';
            summary["slope_kappa"][name] = scaling.kappa;
        };
        emit("true", nullptr);
        for (const auto& [name, pred] : preds) emit(name, &pred.r_hat);
    }

    open_out(dir / "diagnose_summary.json") << summary.dump(2) << "\n";
    std::cerr << "diagnose: wrote " << args.metric << " bundle(s) to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- report --

struct ReportArgs {
    std::string input, output_dir = "report";
    int max_lag = 0;
    int bins = 31;
    std::vector<int> n_list = {50};
    IngestConfig config;
};

int run_report(const ReportArgs& args) {
    CalibrateArgs cal;
    cal.input = args.input;
    cal.output_dir = (fs::path(args.output_dir) / "models").string();
    cal.split = "odd";
    cal.model = "all";
    cal.config = args.config;
    cal.max_lag = args.max_lag;
    run_calibrate(cal);

    DiagnoseArgs diag;
    diag.input = args.input;
    diag.output_dir = (fs::path(args.output_dir) / "diagnostics").string();
    diag.split = "even";
    diag.metric = "all";
    diag.models_dir = cal.output_dir;
    diag.n_list = args.n_list;
    diag.bins = args.bins;
    diag.config = args.config;
    run_diagnose(diag);

    // terse text table from the diagnose summary
    std::ifstream in(fs::path(diag.output_dir) / "diagnose_summary.json");
    json summary = json::parse(in);
    auto out = open_out(fs::path(args.output_dir) / "report.txt");
    out << "proplab report\n==============\n";
    out << "input: " << args.input << "\n";
    out << "days: " << summary["days"] << "  events: " << summary["events"] << "\n";
    if (!summary["eta"].is_null()) out << "eta: " << summary["eta"] << "\n";
    out << "\nmodel correlation (N-trade returns vs truth)\n";
    if (summary.contains("model_correlation"))
        for (const auto& [name, by_n] : summary["model_correlation"].items())
            for (const auto& [n, c] : by_n.items())
                out << "  " << name << " N=" << n << ": " << c << "\n";
    out << "\nsign-impact curvature chi\n";
    if (summary.contains("curvature"))
        for (const auto& [name, by_n] : summary["curvature"].items())
            for (const auto& [n, chi] : by_n.items())
                out << "  " << name << " N=" << n << ": " << chi << "\n";
    out << "\nhurst exponents\n";
    if (summary.contains("hurst"))
        for (const auto& [name, h] : summary["hurst"].items())
            out << "  " << name << ": " << h << "\n";
    std::cerr << "report: wrote " << args.output_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"propagator price-impact model laboratory"};
    // global config file; keys live in [subcommand] sections
    app.set_config("--config");
    app.require_subcommand(1);

    // shared ingest knobs
    auto add_ingest_config = [](CLI::App* cmd, IngestConfig& cfg) {
        cmd->add_option("--instrument", cfg.instrument_id, "instrument id");
        cmd->add_option("--tick", cfg.tick, "price tick for raw input");
        cmd->add_option("--trim-minutes", cfg.trim_minutes, "session trim window");
        cmd->add_option("--session-open-ms", cfg.session_open_ms, "session open (ms)");
        cmd->add_option("--session-close-ms", cfg.session_close_ms, "session close (ms)");
        cmd->add_option("--min-day-span-ms", cfg.min_day_span_ms,
                        "drop days spanning less than this");
        cmd->add_option("--max-lag-cap", cfg.max_lag_cap, "cap on the data max lag");
    };

    IngestArgs ingest;
    auto* cmd_ingest = app.add_subcommand("ingest", "parse raw trades into canonical events");
    cmd_ingest->add_option("--input", ingest.input, "raw or canonical CSV")->required();
    cmd_ingest->add_option("--output", ingest.output, "canonical event CSV")->required();
    cmd_ingest->add_option("--summary", ingest.summary, "summary JSON path");
    add_ingest_config(cmd_ingest, ingest.config);

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic instrument");
    cmd_synth->add_option("--output", synth.output, "canonical event CSV")->required();
    cmd_synth->add_option("--truth-out", synth.truth_out, "ground-truth model JSON");
    cmd_synth->add_option("--days", synth.spec.days, "number of days");
    cmd_synth->add_option("--events", synth.spec.events_per_day, "events per day");
    cmd_synth->add_option("--sign-memory", synth.spec.sign_memory, "sign-flow Hurst target");
    cmd_synth->add_option("--change-prob", synth.change_prob,
                          "const:p or pinning:p0,gamma");
    cmd_synth->add_option("--pinning-window", synth.pinning_window, "trailing window");
    cmd_synth->add_option("--generator", synth.generator,
                          "tim1|tim2|hdim2|hdim2star|cim2");
    cmd_synth->add_option("--generator-file", synth.generator_file, "model JSON as truth");
    cmd_synth->add_option("--delta-c", synth.delta_c, "cim2 delta");
    cmd_synth->add_option("--kernel-amp", synth.kernel_amp, "power-law amplitude");
    cmd_synth->add_option("--kernel-exponent", synth.kernel_exponent, "power-law exponent");
    cmd_synth->add_option("--kernel-nscale", synth.kernel_nscale, "n-kernel scale");
    cmd_synth->add_option("--gen-max-lag", synth.gen_max_lag, "generator kernel length");
    cmd_synth->add_option("--noise", synth.spec.noise, "c-event return noise stddev");
    cmd_synth->add_option("--volume-sigma", synth.spec.volume_sigma, "lognormal volume sigma");
    cmd_synth->add_option("--seed", synth.spec.seed, "master seed");
    cmd_synth->add_option("--instrument", synth.spec.instrument_id, "instrument id");

    CalibrateArgs cal;
    bool cal_smooth = false, cal_no_smooth = false;
    std::string tim1_matrix = "sign";
    auto* cmd_cal = app.add_subcommand("calibrate", "fit propagator models");
    cmd_cal->add_option("--input", cal.input, "canonical event CSV")->required();
    cmd_cal->add_option("--output-dir", cal.output_dir, "model output directory");
    cmd_cal->add_option("--model", cal.model, "tim1|tim2|hdim2|hdim2star|cim2|all");
    cmd_cal->add_option("--split", cal.split, "odd|even|none");
    cmd_cal->add_option("--max-lag", cal.max_lag, "kernel lag bound");
    cmd_cal->add_flag("--smooth", cal_smooth, "smooth kernel tails");
    cmd_cal->add_flag("--no-smooth", cal_no_smooth, "disable kernel smoothing");
    cmd_cal->add_option("--smooth-cutoff", cal.options.smooth_cutoff, "smoothing cutoff lag");
    cmd_cal->add_option("--condition-limit", cal.options.condition_limit,
                        "ill-conditioning threshold");
    cmd_cal->add_option("--segment-len", cal.options.segment_len,
                        "welch segment length (default 2L)");
    cmd_cal->add_option("--tim1-matrix", tim1_matrix,
                        "sign (autocorrelation) or return-sign (printed variant)");
    cmd_cal->add_option("--dump-correlations", cal.dump_correlations,
                        "directory for triple-correlation CSV dumps");
    add_ingest_config(cmd_cal, cal.config);

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "run a calibrated model on a flow");
    cmd_sim->add_option("--input", sim.input, "canonical event CSV")->required();
    cmd_sim->add_option("--model-file", sim.model_files, "calibrated model JSON (repeatable)")
        ->required();
    cmd_sim->add_option("--output", sim.output, "prediction CSV")->required();
    cmd_sim->add_option("--split", sim.split, "odd|even|none");
    add_ingest_config(cmd_sim, sim.config);

    DiagnoseArgs diag;
    auto* cmd_diag = app.add_subcommand("diagnose", "model diagnostics on a flow");
    cmd_diag->add_option("--input", diag.input, "canonical event CSV")->required();
    cmd_diag->add_option("--output-dir", diag.output_dir, "bundle directory");
    cmd_diag->add_option("--models", diag.models_dir, "directory of model JSON files");
    cmd_diag->add_option("--model-file", diag.model_files, "model JSON (repeatable)");
    cmd_diag->add_option("--metric", diag.metric,
                         "impact|curvature|signature|hurst|response|bias|correlation|slopes|all");
    cmd_diag->add_option("--N", diag.n_list, "window sizes")->delimiter(',');
    cmd_diag->add_option("--bins", diag.bins, "quantile bins");
    cmd_diag->add_option("--bias-lags", diag.bias_lags, "bias diagnostic lag bound");
    cmd_diag->add_option("--signature-lags", diag.signature_lags, "signature plot lag bound");
    cmd_diag->add_option("--response-lags", diag.response_lags, "response function lag bound");
    cmd_diag->add_option("--split", diag.split, "odd|even|none");
    cmd_diag->add_flag("--plot-data", diag.plot_data, "emit gnuplot-ready .dat files");
    add_ingest_config(cmd_diag, diag.config);

    ReportArgs rep;
    auto* cmd_rep = app.add_subcommand("report", "calibrate on odd days, diagnose on even");
    cmd_rep->add_option("--input", rep.input, "canonical event CSV")->required();
    cmd_rep->add_option("--output-dir", rep.output_dir, "report directory");
    cmd_rep->add_option("--max-lag", rep.max_lag, "kernel lag bound");
    cmd_rep->add_option("--N", rep.n_list, "window sizes")->delimiter(',');
    cmd_rep->add_option("--bins", rep.bins, "quantile bins");
    add_ingest_config(cmd_rep, rep.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*cmd_ingest) return run_ingest(ingest);
        if (*cmd_synth) return run_synth(synth);
        if (*cmd_cal) {
            if (cal_smooth) cal.options.smooth = true;
            if (cal_no_smooth) cal.options.smooth = false;
            cal.options.tim1_matrix =
                tim1_matrix == "return-sign" ? Tim1Matrix::ReturnSign : Tim1Matrix::SignAutocorr;
            return run_calibrate(cal);
        }
        if (*cmd_sim) return run_simulate(sim);
        if (*cmd_diag) return run_diagnose(diag);
        if (*cmd_rep) return run_report(rep);
    } catch (const CalibrationError& e) {
        std::cerr << "proplab: numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "proplab: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
