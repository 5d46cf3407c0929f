#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "proplab/events.hpp"
#include "proplab/spectral.hpp"

namespace proplab {

enum class ModelKind { TIM1, TIM2, HDIM2, HDIM2star, CIM2 };

std::string model_name(ModelKind kind);
ModelKind model_from_name(const std::string& name);

struct ModelMeta {
    std::string window;            // free-form: input file, split, day count
    bool smoothed = false;
    double condition = 0.0;        // condition estimate of the calibration solve
    double ridge_lambda = 0.0;     // 0 when no regularisation was needed
    bool toeplitz_fast_path = false;
};

// A calibrated model: kind plus its kernels over lags [0, L].
// TIM1: g; TIM2: g_n, g_c; HDIM2/HDIM2star: kappa_nc, kappa_cc (kappa_nc(0) is
// pinned to zero); CIM2: the scalar delta_c.
struct CalibratedModel {
    ModelKind kind = ModelKind::CIM2;
    int max_lag = 0;
    std::map<std::string, std::vector<double>> kernels;
    ModelMeta meta;

    const std::vector<double>& kernel(const std::string& name) const;
    double delta_c() const;
};

std::string model_to_json(const CalibratedModel& model);
CalibratedModel model_from_json(const std::string& text);

// Integrated form G(l) = sum_{l' <= l} g(l'), the usual plotting convention.
std::vector<double> integrated_kernel(std::span<const double> kernel);

// Conditioned differential responses over lags [-L, L].
// s_pipi[pi][pi'](l) = < delta_{label(t),pi'} r(t) delta_{label(t-l),pi} sign(t-l) >;
// s_pi and s are the partial sums, so the chain identity holds by construction.
struct ResponseSet {
    int max_lag = 0;
    std::array<std::array<std::vector<double>, 2>, 2> s_pipi;
    std::array<std::vector<double>, 2> s_pi;
    std::vector<double> s;
    std::array<std::vector<double>, 2> s_pi_se;  // across-day standard errors

    double at(const std::vector<double>& a, int lag) const {
        return a[static_cast<std::size_t>(lag + max_lag)];
    }
};

// Everything one day contributes to calibration, estimated spectrally with
// the day's Welch segments. Triple tensors are stored in the calibration
// orientation: triple[pi][pi'](l, j) = < ind_c(t) s_pi(t-l) s_pi'(t-j) >.
struct DayEstimates {
    CrossCorr2 sign_autocorr;                           // (eps, eps)
    CrossCorr2 return_sign;                             // (r, eps), printed TIM1 variant
    std::array<std::array<CrossCorr2, 2>, 2> labeled;   // [a][b]: <s_a(t) s_b(t+x)>
    std::array<std::array<CrossCorr2, 2>, 2> resp;      // [pi][pi']: <s_pi(t) r_pi'(t+l)>
    std::array<std::array<CrossCorr3, 2>, 2> triple;
    bool has_triples = false;
    double p_c = 0.0;                                   // fraction of c events
};

struct EstimateOptions {
    int max_lag = 0;
    bool need_triples = false;
    std::size_t segment_len = 0;   // 0: 2 * max_lag
};

std::vector<DayEstimates> estimate_by_day(const InstrumentData& data,
                                          const EstimateOptions& options);

// Equal-weight average over days; skip_day >= 0 drops that day (jackknife).
struct PooledEstimates {
    int max_lag = 0;
    std::size_t n_days = 0;
    ResponseSet responses;
    CrossCorr2 sign_autocorr;
    CrossCorr2 return_sign;
    std::array<std::array<CrossCorr2, 2>, 2> labeled;
    std::array<std::array<CrossCorr3, 2>, 2> triple;
    bool has_triples = false;
    double p_c = 0.0;
};

PooledEstimates pool_estimates(std::span<const DayEstimates> days, int skip_day = -1);

ResponseSet estimate_responses(const InstrumentData& data, int max_lag);

// Which matrix backs the TIM1 system. SignAutocorr is the standard
// <eps(t) eps(t+l-j)>; ReturnSign exposes the <r(t) eps(t+l-j)> variant.
enum class Tim1Matrix { SignAutocorr, ReturnSign };

struct LinearSystem {
    std::size_t n = 0;
    std::vector<double> matrix;            // row-major n x n
    std::vector<double> rhs;
    bool symmetric_toeplitz = false;
    std::vector<std::string> unknowns;     // kernel name per (L+1)-sized block
};

LinearSystem assemble_tim1(const PooledEstimates& est,
                           Tim1Matrix variant = Tim1Matrix::SignAutocorr);
LinearSystem assemble_tim2(const PooledEstimates& est);
LinearSystem assemble_hdim2(const PooledEstimates& est);
LinearSystem assemble_hdim2_star(const PooledEstimates& est);

class CalibrationError : public std::runtime_error {
public:
    CalibrationError(const std::string& msg, double condition_estimate)
        : std::runtime_error(msg), condition(condition_estimate) {}
    double condition;
};

struct SolvePolicy {
    double condition_limit = 1e10;
    bool ridge_fallback = false;  // regularise instead of throwing
};

struct SolveReport {
    double condition = 0.0;
    double ridge_lambda = 0.0;
    bool levinson = false;
};

std::vector<double> solve_system(const LinearSystem& system, const SolvePolicy& policy,
                                 SolveReport* report = nullptr);

// Replaces the kernel tail beyond the cutoff with a least-squares fit over
// log-spaced multiquadric radial basis functions. Lags <= cutoff pass through.
std::vector<double> smooth_kernel(std::span<const double> kernel, int cutoff = 10);

struct CalibrationOptions {
    int max_lag = 0;                  // 0: use data.max_lag
    std::optional<bool> smooth;       // default: on for HDIM2 kinds, off for TIMs
    int smooth_cutoff = 10;
    Tim1Matrix tim1_matrix = Tim1Matrix::SignAutocorr;
    double condition_limit = 1e10;
    std::size_t segment_len = 0;
    std::string window_note;
};

CalibratedModel estimate_cim2(const InstrumentData& data);
CalibratedModel calibrate(const InstrumentData& data, ModelKind kind,
                          const CalibrationOptions& options = {});
// Kernel-model calibration from pooled estimates (jackknife and reuse).
CalibratedModel calibrate_pooled(const PooledEstimates& est, ModelKind kind,
                                 const CalibrationOptions& options = {});

}  // namespace proplab
