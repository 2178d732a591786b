#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "misspec/analytic.hpp"
#include "misspec/core_model.hpp"

namespace misspec {

/// FullSampling averages squared errors over M_u fresh (x, v) draws per
/// feature realization. ConditionalTrace replaces that inner average by its
/// exact expectation given A_bar.
enum class SamplingMode { FullSampling, ConditionalTrace };

std::string_view to_string(SamplingMode m) noexcept;

/// Row covariances for the regressors. With redraw_per_realization the Haar
/// rotations are redrawn for each feature realization; otherwise they are
/// fixed by the specs' seeds for the whole experiment.
struct FeatureCovarianceSpec {
    CovarianceSpec a;    // over [A_S, A_C], dim p_S + p_C
    CovarianceSpec a_F;  // over A_F, dim p_F
    bool redraw_per_realization = false;
};

struct CellOptions {
    Index M_r = 100;
    Index M_u = 100;
    SamplingMode mode = SamplingMode::FullSampling;
    Index test_points = 0;  // held-out rows per feature realization; 0 disables eps_y
    unsigned threads = 1;
    std::optional<FeatureCovarianceSpec> feature_cov;

    void validate() const;
};

inline constexpr Index kDefaultTestPoints = 200;

/// Per-realization averages J^(i) of one cell.
struct RealizationTerms {
    double J_S = 0.0;
    double J_C = 0.0;
    double J_F = 0.0;
    double J_y = 0.0;  // NaN unless held-out error was measured
    double J() const noexcept { return J_S + J_C; }
};

struct CellResult {
    ProblemConfig config;
    CellOptions options;
    ValueWithError eps;    // (1/M_r) sum_i J^(i)
    ValueWithError eps_S;
    ValueWithError eps_C;
    ValueWithError eps_F;
    std::optional<ValueWithError> eps_y;
    /// Paired mean of J_y - (J_S + J_C + J_F + sigma_v2) across realizations.
    std::optional<ValueWithError> decomposition_gap;
    std::vector<RealizationTerms> realizations;
    double wall_seconds = 0.0;
};

/// Runs one cell. Realization i draws from stream_id(master_seed, {cell_index, i}).
CellResult run_cell(const ProblemConfig& config, const CellOptions& options,
                    std::uint64_t master_seed, std::uint64_t cell_index = 0);

enum class SweepAxis { FakeCount, AssumedNoise, SampleCount };
std::string_view to_string(SweepAxis a) noexcept;

struct SweepPlan {
    ProblemConfig base;
    SweepAxis axis = SweepAxis::FakeCount;
    std::vector<double> values;  // p_F, sigma_hat2 or n; strictly increasing
    CellOptions options;
    std::uint64_t master_seed = 0;
    Index num_spectra = 200;  // for sigma_hat2 > 0 analytic predictions
    std::uint64_t cell_offset = 0;

    void validate() const;
};

/// Closed-form or sampled-moment prediction attached to a sweep point.
struct AnalyticPrediction {
    Regime regime = Regime::NearThreshold;
    std::string formula_id;                // "thm1", "thm2-sampled" or "none"
    std::optional<ValueWithError> eps;     // zero stderr for exact closed forms
    MseBreakdown breakdown;                // filled for sigma_hat2 = 0
};

AnalyticPrediction predict(const ProblemConfig& config, Index num_spectra, std::uint64_t seed,
                           unsigned threads = 1);

struct SweepPoint {
    double axis_value = 0.0;
    CellResult cell;
    AnalyticPrediction analytic;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::FakeCount;
    std::vector<SweepPoint> points;
};

SweepResult run_sweep(const SweepPlan& plan);

/// Sweep over assumed noise levels with common random numbers: each feature
/// realization and its unknowns are shared across the whole axis and a single
/// SVD serves every sigma_hat2.
struct SigmaSweepResult {
    SweepResult sweep;
    std::size_t argmin_index = 0;
    double argmin_sigma_hat2 = 0.0;
    std::optional<double> closed_form_optimum;  // closed-form optimum when p_F = 0
};

SigmaSweepResult run_sigma_sweep(const ProblemConfig& config,
                                 const std::vector<double>& sigma_hat2_axis,
                                 const CellOptions& options, std::uint64_t master_seed,
                                 Index num_spectra = 200, std::uint64_t cell_index = 0);

/// p_F sweep with held-out output error (test_points >= 1).
SweepResult run_decomposition_sweep(const ProblemConfig& config, const std::vector<double>& pF_axis,
                                    const CellOptions& options, std::uint64_t master_seed);

struct CovarianceSeries {
    double alpha = 0.0;
    double alpha_F = 0.0;
    SweepResult sweep;  // analytic attached only for the isotropic pair (0, 0)
};

/// Structured-covariance experiment: one p_F sweep per (alpha, alpha_F) pair.
/// Series s uses cell indices offset by s * axis length.
std::vector<CovarianceSeries> run_covariance_experiment(
    const std::vector<std::pair<double, double>>& alphas, const ProblemConfig& config,
    const std::vector<double>& pF_axis, const CellOptions& options, std::uint64_t master_seed,
    std::uint64_t covariance_seed = 0);

}  // namespace misspec
