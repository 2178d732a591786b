#include "misspec/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "misspec/errors.hpp"
#include "misspec/estimator.hpp"
#include "misspec/parallel.hpp"
#include "misspec/rmt_moments.hpp"
#include "misspec/stats.hpp"

namespace misspec {

std::string_view to_string(SamplingMode m) noexcept {
    return m == SamplingMode::FullSampling ? "full" : "conditional";
}

std::string_view to_string(SweepAxis a) noexcept {
    switch (a) {
        case SweepAxis::FakeCount: return "p_F";
        case SweepAxis::AssumedNoise: return "sigma_hat2";
        case SweepAxis::SampleCount: return "n";
    }
    return "p_F";
}

void CellOptions::validate() const {
    if (M_r < 1) throw InvalidSpec("M_r must be at least 1");
    if (mode == SamplingMode::FullSampling && M_u < 1) throw InvalidSpec("M_u must be at least 1");
    if (test_points < 0) throw InvalidSpec("test_points must be non-negative");
    if (feature_cov && mode == SamplingMode::ConditionalTrace)
        throw InvalidSpec("conditional mode assumes isotropic regressors");
}

void SweepPlan::validate() const {
    base.validate();
    options.validate();
    for (std::size_t k = 1; k < values.size(); ++k)
        if (!(values[k] > values[k - 1])) throw InvalidSpec("sweep axis must be strictly increasing");
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) throw InvalidSpec("sweep axis values must be finite and >= 0");
        if (axis != SweepAxis::AssumedNoise && v != std::floor(v))
            throw InvalidSpec("count axes take integer values");
    }
}

namespace {

using Clock = std::chrono::steady_clock;

struct HeldOut {
    MatrixXd a_S, a_C, a_F;  // test_points rows each
    MatrixXd v;              // test_points x M_u
};

struct Draw {
    FeatureSet features;
    UnknownsBatch batch;
    MatrixXd Y;
    std::optional<HeldOut> held;
};

std::optional<FeatureCovariance> fixed_feature_cov(const CellOptions& o) {
    if (!o.feature_cov || o.feature_cov->redraw_per_realization) return std::nullopt;
    return FeatureCovariance{materialize_covariance(o.feature_cov->a),
                             materialize_covariance(o.feature_cov->a_F)};
}

Draw draw_realization(const ProblemConfig& config, const CellOptions& o, const Priors& priors,
                      const std::optional<FeatureCovariance>& fixed_cov, Rng& rng) {
    std::optional<FeatureCovariance> cov = fixed_cov;
    if (o.feature_cov && !cov) {
        cov = FeatureCovariance{materialize_covariance(o.feature_cov->a, rng),
                                materialize_covariance(o.feature_cov->a_F, rng)};
    }
    FeatureSet features = cov ? sample_features(config, *cov, rng) : sample_features(config, rng);
    Draw d{std::move(features), {}, {}, std::nullopt};
    if (o.mode == SamplingMode::FullSampling) {
        d.batch = sample_unknowns(config, priors, o.M_u, rng);
        d.Y = generate_observations(d.features, d.batch);
        if (o.test_points > 0) {
            HeldOut h;
            if (cov) {
                const MatrixXd a = cov->a.sample_rows(o.test_points, rng);
                h.a_S = a.leftCols(config.p_S);
                h.a_C = a.rightCols(config.p_C);
                h.a_F = cov->a_F.sample_rows(o.test_points, rng);
            } else {
                h.a_S = rng.gaussian(o.test_points, config.p_S);
                h.a_C = rng.gaussian(o.test_points, config.p_C);
                h.a_F = rng.gaussian(o.test_points, config.p_F);
            }
            h.v = std::sqrt(config.sigma_v2) * rng.gaussian(o.test_points, o.M_u);
            d.held = std::move(h);
        }
    }
    return d;
}

RealizationTerms evaluate(const Draw& d, const MisspecifiedEstimator& est,
                          const ProblemConfig& config, const CellOptions& o, const Priors& priors) {
    RealizationTerms t;
    t.J_y = std::numeric_limits<double>::quiet_NaN();
    if (o.mode == SamplingMode::ConditionalTrace) {
        const ConditionalMse c =
            conditional_mse(est, d.features, priors.x_S.matrix, priors.x_C.trace(), config.sigma_v2);
        t.J_S = c.mse_S();
        t.J_C = c.eps_C;
        t.J_F = c.mse_F();
        t.J_y = c.mse_y();
        return t;
    }
    const double mu = static_cast<double>(d.batch.count());
    const MatrixXd xhat = est.W_bar() * d.Y;
    const auto xhat_S = xhat.topRows(config.p_S);
    const auto xhat_F = xhat.bottomRows(config.p_F);
    t.J_S = (d.batch.X_S - xhat_S).squaredNorm() / mu;
    t.J_C = d.batch.X_C.squaredNorm() / mu;
    t.J_F = xhat_F.squaredNorm() / mu;
    if (d.held) {
        const HeldOut& h = *d.held;
        MatrixXd resid = h.v;
        if (config.p_S > 0) resid.noalias() += h.a_S * (d.batch.X_S - xhat_S);
        if (config.p_C > 0) resid.noalias() += h.a_C * d.batch.X_C;
        if (config.p_F > 0) resid.noalias() -= h.a_F * xhat_F;
        t.J_y = resid.squaredNorm() / (mu * static_cast<double>(h.v.rows()));
    }
    return t;
}

ValueWithError mean_se(const RunningStats& s) {
    return {s.mean(), s.count() >= 2 ? s.stderr_mean() : std::numeric_limits<double>::quiet_NaN()};
}

CellResult reduce(const ProblemConfig& config, const CellOptions& o,
                  std::vector<RealizationTerms> terms) {
    RunningStats j, js, jc, jf, jy, gap;
    bool have_y = !terms.empty();
    for (const RealizationTerms& t : terms) {
        j.push(t.J());
        js.push(t.J_S);
        jc.push(t.J_C);
        jf.push(t.J_F);
        if (std::isnan(t.J_y)) {
            have_y = false;
        } else {
            jy.push(t.J_y);
            gap.push(t.J_y - (t.J_S + t.J_C + t.J_F + config.sigma_v2));
        }
    }
    CellResult r;
    r.config = config;
    r.options = o;
    r.eps = mean_se(j);
    r.eps_S = mean_se(js);
    r.eps_C = mean_se(jc);
    r.eps_F = mean_se(jf);
    if (have_y) {
        r.eps_y = mean_se(jy);
        r.decomposition_gap = mean_se(gap);
    }
    r.realizations = std::move(terms);
    return r;
}

// One pass over the feature realizations of a cell, evaluating every assumed
// noise level in `sigma_hat2s` on the same draws.
std::vector<CellResult> run_cell_multi(const ProblemConfig& config,
                                       const std::vector<double>& sigma_hat2s,
                                       const CellOptions& o, std::uint64_t master_seed,
                                       std::uint64_t cell_index) {
    config.validate();
    o.validate();
    for (double s2 : sigma_hat2s)
        if (!std::isfinite(s2) || s2 < 0.0) throw InvalidSpec("sigma_hat2 values must be finite and >= 0");

    const auto start = Clock::now();
    const Priors priors = Priors::materialize(config);
    const std::optional<FeatureCovariance> fixed_cov = fixed_feature_cov(o);
    const std::size_t m_r = static_cast<std::size_t>(o.M_r);
    const std::size_t m_s = sigma_hat2s.size();
    std::vector<RealizationTerms> terms(m_r * m_s);

    parallel_for(m_r, o.threads, [&](std::size_t i) {
        Rng rng(master_seed, {cell_index, static_cast<std::uint64_t>(i)});
        const Draw d = draw_realization(config, o, priors, fixed_cov, rng);
        for (std::size_t s = 0; s < m_s; ++s) {
            const MisspecifiedEstimator est = build_misspecified(d.features, sigma_hat2s[s]);
            ProblemConfig c = config;
            c.sigma_hat2 = sigma_hat2s[s];
            terms[s * m_r + i] = evaluate(d, est, c, o, priors);
        }
    });

    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    std::vector<CellResult> out;
    out.reserve(m_s);
    for (std::size_t s = 0; s < m_s; ++s) {
        ProblemConfig c = config;
        c.sigma_hat2 = sigma_hat2s[s];
        std::vector<RealizationTerms> slice(terms.begin() + static_cast<std::ptrdiff_t>(s * m_r),
                                            terms.begin() + static_cast<std::ptrdiff_t>((s + 1) * m_r));
        out.push_back(reduce(c, o, std::move(slice)));
        out.back().wall_seconds = seconds / static_cast<double>(m_s);
    }
    return out;
}

std::uint64_t analytic_seed(std::uint64_t master_seed, std::uint64_t cell_index) {
    return stream_id(master_seed, {cell_index, 0xa7a1ULL});
}

ProblemConfig with_axis_value(const ProblemConfig& base, SweepAxis axis, double v) {
    ProblemConfig c = base;
    switch (axis) {
        case SweepAxis::FakeCount: c.p_F = static_cast<Index>(v); break;
        case SweepAxis::AssumedNoise: c.sigma_hat2 = v; break;
        case SweepAxis::SampleCount: c.n = static_cast<Index>(v); break;
    }
    return c;
}

CellOptions with_feature_dims(CellOptions o, const ProblemConfig& c) {
    if (o.feature_cov) {
        // A zero-width block has nothing to rotate.
        auto resize = [](CovarianceSpec& spec, Index dim) {
            if (dim == 0) spec = CovarianceSpec::isotropic(0);
            spec.dim = dim;
        };
        resize(o.feature_cov->a, c.p());
        resize(o.feature_cov->a_F, c.p_F);
    }
    return o;
}

}  // namespace

CellResult run_cell(const ProblemConfig& config, const CellOptions& options,
                    std::uint64_t master_seed, std::uint64_t cell_index) {
    return std::move(run_cell_multi(config, {config.sigma_hat2}, options, master_seed, cell_index).front());
}

AnalyticPrediction predict(const ProblemConfig& config, Index num_spectra, std::uint64_t seed,
                           unsigned threads) {
    AnalyticPrediction p;
    const AnalyticCell cell = AnalyticCell::from(config);
    p.regime = classify(config.p_bar(), config.n);
    if (config.sigma_hat2 == 0.0) {
        p.breakdown = breakdown_theorem1(cell);
        if (p.breakdown.eps) {
            p.eps = ValueWithError{*p.breakdown.eps, 0.0};
            p.formula_id = "thm1";
        } else {
            p.formula_id = "none";
        }
        return p;
    }
    if (config.p_bar() <= 1) {
        p.formula_id = "none";
        return p;
    }
    const SpectralMoments m =
        estimate_moments(config.n, config.p_bar(), config.sigma_hat2, config.p_S, num_spectra, seed, threads);
    p.eps = mse_theorem2(cell, m);
    p.formula_id = "thm2-sampled";
    return p;
}

SweepResult run_sweep(const SweepPlan& plan) {
    plan.validate();
    SweepResult result;
    result.axis = plan.axis;
    for (std::size_t k = 0; k < plan.values.size(); ++k) {
        const ProblemConfig c = with_axis_value(plan.base, plan.axis, plan.values[k]);
        const CellOptions o = with_feature_dims(plan.options, c);
        const std::uint64_t cell = plan.cell_offset + k;
        SweepPoint pt;
        pt.axis_value = plan.values[k];
        pt.cell = run_cell(c, o, plan.master_seed, cell);
        pt.analytic = predict(c, plan.num_spectra, analytic_seed(plan.master_seed, cell), o.threads);
        result.points.push_back(std::move(pt));
    }
    return result;
}

SigmaSweepResult run_sigma_sweep(const ProblemConfig& config,
                                 const std::vector<double>& sigma_hat2_axis,
                                 const CellOptions& options, std::uint64_t master_seed,
                                 Index num_spectra, std::uint64_t cell_index) {
    if (sigma_hat2_axis.empty()) throw InvalidSpec("sigma_hat2 axis is empty");
    for (std::size_t k = 1; k < sigma_hat2_axis.size(); ++k)
        if (!(sigma_hat2_axis[k] > sigma_hat2_axis[k - 1]))
            throw InvalidSpec("sweep axis must be strictly increasing");
    const CellOptions o = with_feature_dims(options, config);
    std::vector<CellResult> cells = run_cell_multi(config, sigma_hat2_axis, o, master_seed, cell_index);

    SigmaSweepResult out;
    out.sweep.axis = SweepAxis::AssumedNoise;
    for (std::size_t s = 0; s < cells.size(); ++s) {
        SweepPoint pt;
        pt.axis_value = sigma_hat2_axis[s];
        pt.analytic = predict(cells[s].config, num_spectra,
                              stream_id(analytic_seed(master_seed, cell_index), {s}), o.threads);
        pt.cell = std::move(cells[s]);
        out.sweep.points.push_back(std::move(pt));
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < out.sweep.points.size(); ++s)
        if (out.sweep.points[s].cell.eps.value < out.sweep.points[best].cell.eps.value) best = s;
    out.argmin_index = best;
    out.argmin_sigma_hat2 = sigma_hat2_axis[best];
    const double trace_S = config.cov_x_S.nominal_power();
    if (config.p_F == 0 && trace_S > 0.0)
        out.closed_form_optimum = optimal_sigma_hat2(config.p_S, trace_S, config.cov_x_C.nominal_power(),
                                               config.sigma_v2);
    return out;
}

SweepResult run_decomposition_sweep(const ProblemConfig& config, const std::vector<double>& pF_axis,
                                    const CellOptions& options, std::uint64_t master_seed) {
    if (options.test_points < 1) throw InvalidSpec("decomposition sweep needs test_points >= 1");
    SweepPlan plan;
    plan.base = config;
    plan.axis = SweepAxis::FakeCount;
    plan.values = pF_axis;
    plan.options = options;
    plan.master_seed = master_seed;
    return run_sweep(plan);
}

std::vector<CovarianceSeries> run_covariance_experiment(
    const std::vector<std::pair<double, double>>& alphas, const ProblemConfig& config,
    const std::vector<double>& pF_axis, const CellOptions& options, std::uint64_t master_seed,
    std::uint64_t covariance_seed) {
    std::vector<CovarianceSeries> out;
    // K_a depends only on alpha and K_a_F only on alpha_F, so series sharing
    // an alpha share the same matrix.
    const std::uint64_t seed_a = stream_id(covariance_seed, {0});
    const std::uint64_t seed_aF = stream_id(covariance_seed, {1});
    for (std::size_t s = 0; s < alphas.size(); ++s) {
        const auto [alpha, alpha_F] = alphas[s];
        FeatureCovarianceSpec fc;
        fc.a = alpha == 0.0 ? CovarianceSpec::isotropic(config.p())
                            : CovarianceSpec::decayed(config.p(), alpha, seed_a);
        // Dimensions are set per sweep point.
        fc.a_F = alpha_F == 0.0 ? CovarianceSpec::isotropic(1) : CovarianceSpec::decayed(1, alpha_F, seed_aF);
        if (options.feature_cov) fc.redraw_per_realization = options.feature_cov->redraw_per_realization;

        SweepPlan plan;
        plan.base = config;
        plan.axis = SweepAxis::FakeCount;
        plan.values = pF_axis;
        plan.options = options;
        plan.options.feature_cov = fc;
        plan.master_seed = master_seed;
        plan.cell_offset = s * pF_axis.size();
        CovarianceSeries series{alpha, alpha_F, run_sweep(plan)};
        if (alpha != 0.0 || alpha_F != 0.0) {
            for (SweepPoint& pt : series.sweep.points) {
                pt.analytic.eps.reset();
                pt.analytic.breakdown = MseBreakdown{};
                pt.analytic.breakdown.regime = pt.analytic.regime;
                pt.analytic.formula_id = "none";
            }
        }
        out.push_back(std::move(series));
    }
    return out;
}

}  // namespace misspec
