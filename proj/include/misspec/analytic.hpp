#pragma once

#include <optional>
#include <string_view>

#include "misspec/core_model.hpp"

namespace misspec {

/// Position of the assumed model width relative to the interpolation
/// threshold. The closed forms hold for n > p_bar + 1 (Under) and
/// p_bar > n + 1 (Over); |n - p_bar| <= 1 is NearThreshold.
enum class Regime { Under, Over, NearThreshold };

std::string_view to_string(Regime r) noexcept;
Regime classify(Index p_bar, Index n) noexcept;

/// A closed-form value, absent when the regime is NearThreshold.
struct ClosedForm {
    Regime regime = Regime::NearThreshold;
    std::optional<double> value;

    explicit operator bool() const noexcept { return value.has_value(); }
    double operator*() const { return value.value(); }
};

/// Parameters of an analytic cell. Formulas only depend on the powers
/// tr(K_x_S) and tr(K_x_C), never on the covariance shapes.
struct AnalyticCell {
    Index p_S = 0;
    Index p_F = 0;
    Index n = 1;
    double trace_S = 0.0;  // tr(K_x_S)
    double trace_C = 0.0;  // tr(K_x_C)
    double sigma_v2 = 0.0;

    Index p_bar() const noexcept { return p_S + p_F; }
    double effective_noise() const noexcept { return trace_C + sigma_v2; }

    static AnalyticCell from(const ProblemConfig& config);
};

struct MseBreakdown {
    Regime regime = Regime::NearThreshold;
    std::optional<double> eps;    // eps_S + eps_C
    std::optional<double> eps_S;
    std::optional<double> eps_C;
    std::optional<double> eps_F;
    std::optional<double> eps_y;  // eps_S + eps_C + eps_F + sigma_v2
};

/// Expected MSE over (x_S, x_C) with sigma_hat2 = 0.
ClosedForm mse_theorem1(const AnalyticCell& cell);

/// Shared-block part of mse_theorem1, i.e. mse_theorem1 - tr(K_x_C).
ClosedForm mse_shared_theorem1(const AnalyticCell& cell);

/// Limit of the expected MSE as p_F grows without bound: tr(K_x).
double mse_limit_pf_infinity(double trace_x) noexcept;

/// Largest power ratio r = tr(K_x_S)/tr(K_x) for which p_F -> infinity beats
/// p_F = 0 (the condition is r < bound).
double pf_infinity_ratio_bound(Index p_S, Index n, double trace_x, double sigma_v2);
bool pf_infinity_beats_pf_zero(Index p_S, Index n, double r, double trace_x, double sigma_v2);

/// Eigenvalue moments mu1, mu2 of the regularized Gram spectrum.
enum class MomentMethod { MonteCarloSpectra, LargeNApprox };

struct SpectralMoments {
    double mu1 = 0.0;
    double mu2 = 0.0;
    double stderr1 = 0.0;
    double stderr2 = 0.0;
    double cov12 = 0.0;  // covariance of the two mean estimates
    double sigma_hat2 = 0.0;
    Index num_spectra = 0;
    MomentMethod method = MomentMethod::MonteCarloSpectra;
    bool outside_validity = false;  // large-n approximation used with n < 10 p_bar
};

struct ValueWithError {
    double value = 0.0;
    double stderr = 0.0;
};

/// Expected MSE for sigma_hat2 > 0 given spectral moments; the moment
/// standard errors are propagated to first order.
ValueWithError mse_theorem2(const AnalyticCell& cell, const SpectralMoments& moments);

/// Deterministic n >> p_bar approximation of the moments.
SpectralMoments moments_large_n(Index p_bar, Index n, double sigma_hat2);

/// p_S (tr K_x_C + sigma_v2) / tr K_x_S. Throws Unsupported if tr K_x_S = 0.
double optimal_sigma_hat2(Index p_S, double trace_S, double trace_C, double sigma_v2);

/// Expected fake-block error E||x_F_hat||^2 with sigma_hat2 = 0.
ClosedForm mse_fake_theorem3(const AnalyticCell& cell);

/// Expected output MSE with sigma_hat2 = 0; depends on p_bar, not on the split.
ClosedForm mse_output(Index p_bar, Index n, double trace_S, double trace_C, double sigma_v2);

/// Full sigma_hat2 = 0 breakdown (all fields empty at NearThreshold).
MseBreakdown breakdown_theorem1(const AnalyticCell& cell);

}  // namespace misspec
