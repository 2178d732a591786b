#include "misspec/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "misspec/analytic.hpp"
#include "misspec/estimator.hpp"
#include "misspec/montecarlo.hpp"
#include "misspec/rmt_moments.hpp"

namespace misspec {

bool ValidationReport::all_pass() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

double ridge_identity_max_error(int shapes, std::uint64_t seed) {
    double worst = 0.0;
    for (int k = 0; k < shapes; ++k) {
        Rng rng(seed, {0x20ULL, static_cast<std::uint64_t>(k)});
        // Cycle through n < p_bar, n = p_bar and n > p_bar.
        const Index n = 3 + static_cast<Index>(rng.uniform() * 12.0);
        const Index delta = static_cast<Index>(k % 3) - 1;
        const Index p_bar = std::max<Index>(1, n + delta * (1 + static_cast<Index>(rng.uniform() * 6.0)));
        const Index p_S = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(p_bar));
        const Index p_S_used = std::min(p_S, p_bar);
        FeatureSet f(rng.gaussian(n, p_S_used), MatrixXd(n, 0), rng.gaussian(n, p_bar - p_S_used));
        const MatrixXd a = f.A_bar();
        for (double s2 : {0.1, 1.0, 10.0}) {
            const MatrixXd w = build_misspecified(f, s2).W_bar();
            const MatrixXd wide = a.transpose() *
                                  (a * a.transpose() + s2 * MatrixXd::Identity(n, n)).ldlt().solve(MatrixXd::Identity(n, n));
            const MatrixXd tall = (a.transpose() * a + s2 * MatrixXd::Identity(p_bar, p_bar)).ldlt().solve(a.transpose());
            worst = std::max(worst, (w - wide).norm() / wide.norm());
            worst = std::max(worst, (w - tall).norm() / tall.norm());
        }
    }
    return worst;
}

double interpolation_residual(int n, std::uint64_t seed) {
    Rng rng(seed, {0x1e7ULL});
    const Index p_S = n / 2;
    FeatureSet f(rng.gaussian(n, p_S), MatrixXd(n, 0), rng.gaussian(n, n - p_S));
    const VectorXd y = rng.gaussian(n);
    const MatrixXd w = build_misspecified(f, 0.0).W_bar();
    return (f.A_bar() * (w * y) - y).norm() / y.norm();
}

double decomposition_identity_max_error(int cells, std::uint64_t seed) {
    double worst = 0.0;
    int done = 0;
    Rng rng(seed, {0xdecULL});
    while (done < cells) {
        AnalyticCell c;
        c.n = 2 + static_cast<Index>(rng.uniform() * 400.0);
        c.p_S = static_cast<Index>(rng.uniform() * 300.0);
        c.p_F = static_cast<Index>(rng.uniform() * 600.0);
        c.trace_S = 100.0 * rng.uniform();
        c.trace_C = 100.0 * rng.uniform();
        c.sigma_v2 = 50.0 * rng.uniform();
        if (classify(c.p_bar(), c.n) == Regime::NearThreshold) continue;
        const double lhs = *mse_theorem1(c) + *mse_fake_theorem3(c) + c.sigma_v2;
        const double rhs = *mse_output(c.p_bar(), c.n, c.trace_S, c.trace_C, c.sigma_v2);
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
        ++done;
    }
    return worst;
}

namespace {

using Clock = std::chrono::steady_clock;

void timed(ValidationReport& r, const std::function<CheckResult()>& f) {
    const auto t0 = Clock::now();
    CheckResult c = f();
    c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    r.checks.push_back(std::move(c));
}

CheckResult z_check(std::string name, const SampledMoment& m, double reference, double tol) {
    const double z = m.z(reference);
    return {std::move(name), "z", z, tol, z <= tol};
}

CheckResult bound_check(std::string name, std::string stat, double value, double tol) {
    return {std::move(name), std::move(stat), value, tol, value <= tol};
}

}  // namespace

ValidationReport run_validation(const ValidationOptions& opts) {
    ValidationReport r;
    const double ztol = opts.quick ? 4.0 : 3.0;
    // The largest |z| over many off-diagonal entries gets a wider band.
    const double zmax_tol = opts.quick ? 5.0 : 4.0;
    const Index draws = opts.quick ? 20000 : 100000;
    const std::uint64_t seed = opts.seed;

    {
        const auto t0 = Clock::now();
        Rng rng(seed, {0x4a1ULL});
        const SampledHaarMoments s = sample_haar_moments(8, draws, rng);
        HaarMoments ref = haar_fourth_moments(8);
        if (opts.inject_fault == "m_cross") ref.m_cross = -ref.m_cross;
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count() / 3.0;
        r.checks.push_back(z_check("haar_m4_p8", s.m4, ref.m4, ztol));
        r.checks.push_back(z_check("haar_m22_p8", s.m22, ref.m22, ztol));
        r.checks.push_back(z_check("haar_m_cross_p8", s.m_cross, ref.m_cross, ztol));
        for (std::size_t k = r.checks.size() - 3; k < r.checks.size(); ++k) r.checks[k].seconds = secs;
    }
    timed(r, [&] {
        Rng rng(seed, {0x4a2ULL});
        return z_check("pinv_gram_trace_n10_p4", sample_pinv_gram_trace(10, 4, draws, rng),
                       *expected_pinv_gram_trace(10, 4), ztol);
    });
    timed(r, [&] {
        Rng rng(seed, {0x4a3ULL});
        return z_check("pinv_gram_trace_n4_p10", sample_pinv_gram_trace(4, 10, draws, rng),
                       *expected_pinv_gram_trace(4, 10), ztol);
    });
    {
        const auto t0 = Clock::now();
        Rng rng(seed, {0x4a4ULL});
        const SampledQ s = sample_q(5, 12, 4, draws, rng);
        const QExpectation ref = q_expectation(5, 12, 4);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count() / 3.0;
        r.checks.push_back(z_check("projection_q_n5_p12_pS4", s.mu_q, ref.mu_q, ztol));
        r.checks.push_back(z_check("projection_qbar_n5_p12_pS4", s.mu_qbar, ref.mu_qbar, ztol));
        r.checks.push_back(bound_check("projection_q_offdiag_max", "z", s.max_offdiag_z, zmax_tol));
        for (std::size_t k = r.checks.size() - 3; k < r.checks.size(); ++k) r.checks[k].seconds = secs;
    }
    {
        const auto t0 = Clock::now();
        Rng rng(seed, {0x4a5ULL});
        const MatrixXd K = VectorXd::LinSpaced(3, 1.0, 3.0).asDiagonal();
        const SampledSandwich s = sample_gaussian_sandwich(K, 4, draws, rng);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count() / 2.0;
        r.checks.push_back(z_check("sandwich_trace_diag123_n4", s.diagonal, gaussian_sandwich_trace(K), ztol));
        r.checks.push_back(bound_check("sandwich_offdiag_max", "z", s.max_offdiag_z, zmax_tol));
        for (std::size_t k = r.checks.size() - 2; k < r.checks.size(); ++k) r.checks[k].seconds = secs;
    }
    timed(r, [&] { return bound_check("ridge_identity_20_shapes", "rel_err", ridge_identity_max_error(20, seed), 1e-8); });
    timed(r, [&] { return bound_check("interpolation_residual_n50", "residual", interpolation_residual(50, seed), 1e-6); });
    timed(r, [&] {
        return bound_check("output_decomposition_1000_cells", "rel_err",
                           decomposition_identity_max_error(1000, seed), 1e-12);
    });

    CellOptions mc;
    mc.M_r = opts.quick ? 30 : 100;
    mc.M_u = opts.quick ? 30 : 100;
    mc.threads = opts.threads;
    struct Smoke {
        const char* name;
        ProblemConfig cfg;
    };
    const Smoke smoke[] = {
        {"closed_form_mc_pS100_pF0_n200", ProblemConfig::isotropic(100, 0, 0, 200, 1.0)},
        {"closed_form_mc_pS50_pC50_pF350_n200", ProblemConfig::isotropic(50, 50, 350, 200, 25.0)},
    };
    std::uint64_t cell = 0;
    for (const Smoke& s : smoke) {
        timed(r, [&] {
            const CellResult res = run_cell(s.cfg, mc, stream_id(seed, {0x5a0ULL}), cell++);
            const double ref = *mse_theorem1(AnalyticCell::from(s.cfg));
            const double z = std::abs(res.eps.value - ref) / res.eps.stderr;
            return CheckResult{s.name, "z", z, ztol, z <= ztol};
        });
    }
    timed(r, [&] {
        const ProblemConfig cfg = ProblemConfig::isotropic(50, 0, 100, 200, 1.0, 1e-6);
        const SpectralMoments m = estimate_moments(cfg.n, cfg.p_bar(), cfg.sigma_hat2, cfg.p_S,
                                                   opts.quick ? 50 : kDefaultNumSpectra,
                                                   stream_id(seed, {0x5a1ULL}), opts.threads);
        const ValueWithError t2 = mse_theorem2(AnalyticCell::from(cfg), m);
        const double t1 = *mse_theorem1(AnalyticCell::from(cfg));
        const double z = std::abs(t2.value - t1) / t2.stderr;
        return CheckResult{"sampled_moments_small_sigma", "z", z, ztol, z <= ztol};
    });
    return r;
}

}  // namespace misspec
