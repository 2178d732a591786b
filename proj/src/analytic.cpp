#include "misspec/analytic.hpp"

#include <cmath>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Under: return "Under";
        case Regime::Over: return "Over";
        case Regime::NearThreshold: return "NearThreshold";
    }
    return "NearThreshold";
}

Regime classify(Index p_bar, Index n) noexcept {
    if (n > p_bar + 1) return Regime::Under;
    if (p_bar > n + 1) return Regime::Over;
    return Regime::NearThreshold;
}

AnalyticCell AnalyticCell::from(const ProblemConfig& config) {
    return {config.p_S, config.p_F, config.n, config.cov_x_S.nominal_power(),
            config.cov_x_C.nominal_power(), config.sigma_v2};
}

namespace {

double d(Index v) { return static_cast<double>(v); }

// Coefficient of tr(K_x_S) in the overparameterized regime that is lost to
// the fake block: p_F n (p_bar - n) / ((p_bar - 1) p_bar (p_bar + 2)).
double fake_leak(Index p_F, Index p_bar, Index n) {
    const double pb = d(p_bar);
    return d(p_F) * d(n) * (pb - d(n)) / ((pb - 1.0) * pb * (pb + 2.0));
}

void check_cell(const AnalyticCell& c) {
    if (c.p_S < 0 || c.p_F < 0 || c.n < 1) throw InvalidInput("invalid dimensions in analytic cell");
    if (c.trace_S < 0.0 || c.trace_C < 0.0 || c.sigma_v2 < 0.0)
        throw InvalidInput("powers and noise variance must be non-negative");
}

}  // namespace

ClosedForm mse_shared_theorem1(const AnalyticCell& c) {
    check_cell(c);
    const Index pb = c.p_bar();
    const Regime regime = classify(pb, c.n);
    switch (regime) {
        case Regime::Under:
            return {regime, d(c.p_S) / (d(c.n) - d(pb) - 1.0) * c.effective_noise()};
        case Regime::Over: {
            const double noise_term =
                d(c.n) * d(c.p_S) / (d(pb) * (d(pb) - d(c.n) - 1.0)) * c.effective_noise();
            const double bias = (1.0 - d(c.n) / d(pb) - fake_leak(c.p_F, pb, c.n)) * c.trace_S;
            return {regime, noise_term + bias};
        }
        case Regime::NearThreshold: break;
    }
    return {Regime::NearThreshold, std::nullopt};
}

ClosedForm mse_theorem1(const AnalyticCell& c) {
    ClosedForm shared = mse_shared_theorem1(c);
    if (shared) shared.value = *shared + c.trace_C;
    return shared;
}

double mse_limit_pf_infinity(double trace_x) noexcept { return trace_x; }

double pf_infinity_ratio_bound(Index p_S, Index n, double trace_x, double sigma_v2) {
    if (!(trace_x > 0.0)) throw InvalidInput("tr(K_x) must be positive");
    if (p_S < 0 || n < 1) throw InvalidInput("invalid dimensions");
    const double noise_ratio = (trace_x + sigma_v2) / trace_x;
    if (n >= p_S) {
        if (n <= 1) throw Unsupported("the ratio bound requires n > 1");
        return d(p_S) / (d(n) - 1.0) * noise_ratio;
    }
    return d(p_S) / (2.0 * d(p_S) - d(n) - 1.0) * noise_ratio;
}

bool pf_infinity_beats_pf_zero(Index p_S, Index n, double r, double trace_x, double sigma_v2) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("power ratio r must lie in [0, 1]");
    return r < pf_infinity_ratio_bound(p_S, n, trace_x, sigma_v2);
}

ValueWithError mse_theorem2(const AnalyticCell& c, const SpectralMoments& m) {
    check_cell(c);
    if (c.p_bar() <= 1) throw Unsupported("the sampled-moment formula requires p_bar > 1");
    if (!(m.sigma_hat2 > 0.0)) throw Unsupported("the sampled-moment formula requires sigma_hat2 > 0");
    const double a = c.effective_noise() * d(c.p_S) / d(c.p_bar());
    const double b = c.trace_S;
    const double value = a * m.mu1 + b * m.mu2 + c.trace_C;
    const double var = a * a * m.stderr1 * m.stderr1 + b * b * m.stderr2 * m.stderr2 +
                       2.0 * a * b * m.cov12;
    return {value, std::sqrt(std::max(0.0, var))};
}

SpectralMoments moments_large_n(Index p_bar, Index n, double sigma_hat2) {
    if (p_bar < 1 || n < 1) throw InvalidInput("invalid dimensions");
    if (!(sigma_hat2 >= 0.0)) throw InvalidInput("sigma_hat2 must be non-negative");
    SpectralMoments m;
    const double denom = (d(n) + sigma_hat2) * (d(n) + sigma_hat2);
    m.mu1 = d(n) * d(p_bar) / denom;
    m.mu2 = sigma_hat2 * sigma_hat2 / denom;
    if (std::isinf(sigma_hat2)) {
        m.mu1 = 0.0;
        m.mu2 = 1.0;
    }
    m.sigma_hat2 = sigma_hat2;
    m.method = MomentMethod::LargeNApprox;
    m.outside_validity = n < 10 * p_bar;
    return m;
}

double optimal_sigma_hat2(Index p_S, double trace_S, double trace_C, double sigma_v2) {
    if (trace_S == 0.0) throw Unsupported("optimal sigma_hat2 is undefined for tr(K_x_S) = 0");
    if (trace_S < 0.0) throw InvalidInput("tr(K_x_S) must be positive");
    return d(p_S) * (trace_C + sigma_v2) / trace_S;
}

ClosedForm mse_fake_theorem3(const AnalyticCell& c) {
    check_cell(c);
    const Index pb = c.p_bar();
    const Regime regime = classify(pb, c.n);
    switch (regime) {
        case Regime::Under:
            return {regime, d(c.p_F) / (d(c.n) - d(pb) - 1.0) * c.effective_noise()};
        case Regime::Over: {
            const double noise_term =
                d(c.n) * d(c.p_F) / (d(pb) * (d(pb) - d(c.n) - 1.0)) * c.effective_noise();
            return {regime, noise_term + fake_leak(c.p_F, pb, c.n) * c.trace_S};
        }
        case Regime::NearThreshold: break;
    }
    return {Regime::NearThreshold, std::nullopt};
}

ClosedForm mse_output(Index p_bar, Index n, double trace_S, double trace_C, double sigma_v2) {
    if (p_bar < 0 || n < 1) throw InvalidInput("invalid dimensions");
    const Regime regime = classify(p_bar, n);
    const double noise = trace_C + sigma_v2;
    switch (regime) {
        case Regime::Under:
            return {regime, d(p_bar) / (d(n) - d(p_bar) - 1.0) * noise + noise};
        case Regime::Over:
            return {regime, d(n) / (d(p_bar) - d(n) - 1.0) * noise +
                                (1.0 - d(n) / d(p_bar)) * trace_S + noise};
        case Regime::NearThreshold: break;
    }
    return {Regime::NearThreshold, std::nullopt};
}

MseBreakdown breakdown_theorem1(const AnalyticCell& c) {
    MseBreakdown b;
    b.regime = classify(c.p_bar(), c.n);
    if (b.regime == Regime::NearThreshold) return b;
    b.eps_S = *mse_shared_theorem1(c);
    b.eps_C = c.trace_C;
    b.eps = *b.eps_S + *b.eps_C;
    b.eps_F = *mse_fake_theorem3(c);
    b.eps_y = *b.eps + *b.eps_F + c.sigma_v2;
    return b;
}

}  // namespace misspec
