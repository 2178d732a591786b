#include <doctest.h>

#include <cmath>

#include "misspec/analytic.hpp"
#include "misspec/errors.hpp"
#include "misspec/montecarlo.hpp"
#include "misspec/stats.hpp"

using namespace misspec;

namespace {

CellOptions opts(Index M_r, Index M_u, SamplingMode mode = SamplingMode::FullSampling) {
    CellOptions o;
    o.M_r = M_r;
    o.M_u = M_u;
    o.mode = mode;
    return o;
}

double combined(const ValueWithError& a, const ValueWithError& b) {
    return std::hypot(a.stderr, b.stderr);
}

}  // namespace

TEST_CASE("noise-free fully specified model is recovered exactly") {
    const ProblemConfig cfg = ProblemConfig::isotropic(20, 0, 0, 50, 0.0);
    for (SamplingMode mode : {SamplingMode::FullSampling, SamplingMode::ConditionalTrace}) {
        const CellResult r = run_cell(cfg, opts(5, 5, mode), 1);
        CHECK(std::abs(r.eps.value) < 1e-12);
    }
}

TEST_CASE("empirical MSE matches the closed form on a reference cell") {
    const ProblemConfig cfg = ProblemConfig::isotropic(100, 0, 0, 200, 1.0);
    const CellResult r = run_cell(cfg, opts(100, 100), 2);
    CHECK(std::abs(r.eps.value - 100.0 / 99.0) < 3.0 * r.eps.stderr);
}

TEST_CASE("conditional and full sampling agree") {
    const ProblemConfig cfg = ProblemConfig::isotropic(20, 5, 10, 60, 2.0);
    const CellResult full = run_cell(cfg, opts(200, 50), 3);
    const CellResult cond = run_cell(cfg, opts(200, 50, SamplingMode::ConditionalTrace), 4);
    CHECK(std::abs(full.eps.value - cond.eps.value) < 3.0 * combined(full.eps, cond.eps));
    CHECK(std::abs(full.eps_F.value - cond.eps_F.value) < 3.0 * combined(full.eps_F, cond.eps_F));
}

TEST_CASE("conditional sampling has smaller variance") {
    const ProblemConfig cfg = ProblemConfig::isotropic(20, 5, 10, 60, 2.0);
    const CellResult full = run_cell(cfg, opts(200, 5), 5);
    const CellResult cond = run_cell(cfg, opts(200, 5, SamplingMode::ConditionalTrace), 5);
    CHECK(cond.eps.stderr <= full.eps.stderr);
}

TEST_CASE("component estimates add up") {
    const ProblemConfig cfg = ProblemConfig::isotropic(10, 4, 30, 25, 1.5);
    for (SamplingMode mode : {SamplingMode::FullSampling, SamplingMode::ConditionalTrace}) {
        const CellResult r = run_cell(cfg, opts(10, 10, mode), 6);
        CHECK(std::abs(r.eps.value - (r.eps_S.value + r.eps_C.value)) <= 1e-10 * r.eps.value);
        CHECK(r.eps.stderr > 0.0);
        CHECK(r.realizations.size() == 10);
    }
}

TEST_CASE("one realization gives no standard error") {
    const CellResult r = run_cell(ProblemConfig::isotropic(5, 1, 2, 20, 1.0), opts(1, 4), 7);
    CHECK(std::isfinite(r.eps.value));
    CHECK(std::isnan(r.eps.stderr));
}

TEST_CASE("cell results do not depend on the thread count") {
    const ProblemConfig cfg = ProblemConfig::isotropic(15, 5, 25, 30, 1.0);
    CellOptions a = opts(12, 7);
    a.test_points = 9;
    CellOptions b = a;
    b.threads = 3;
    const CellResult ra = run_cell(cfg, a, 8, 4);
    const CellResult rb = run_cell(cfg, b, 8, 4);
    CHECK(ra.eps.value == rb.eps.value);
    CHECK(ra.eps.stderr == rb.eps.stderr);
    CHECK(ra.eps_F.value == rb.eps_F.value);
    CHECK(ra.eps_y->value == rb.eps_y->value);
}

TEST_CASE("a one-point sweep reproduces run_cell") {
    SweepPlan plan;
    plan.base = ProblemConfig::isotropic(10, 2, 0, 40, 1.0);
    plan.values = {12.0};
    plan.options = opts(8, 6);
    plan.master_seed = 9;
    const SweepResult s = run_sweep(plan);
    REQUIRE(s.points.size() == 1);
    ProblemConfig cfg = plan.base;
    cfg.p_F = 12;
    const CellResult r = run_cell(cfg, plan.options, 9, 0);
    CHECK(s.points[0].cell.eps.value == r.eps.value);
    CHECK(s.points[0].cell.eps.stderr == r.eps.stderr);
    CHECK(s.points[0].analytic.formula_id == "thm1");
    CHECK(s.points[0].analytic.eps->stderr == 0.0);
}

TEST_CASE("near-threshold sweep points carry no prediction") {
    SweepPlan plan;
    plan.base = ProblemConfig::isotropic(10, 0, 0, 20, 1.0);
    plan.values = {10.0};
    plan.options = opts(3, 3);
    const SweepResult s = run_sweep(plan);
    CHECK(s.points[0].analytic.regime == Regime::NearThreshold);
    CHECK_FALSE(s.points[0].analytic.eps.has_value());
    CHECK(std::isfinite(s.points[0].cell.eps.value));
}

TEST_CASE("sweep plan validation") {
    SweepPlan plan;
    plan.base = ProblemConfig::isotropic(10, 0, 0, 20, 1.0);
    plan.values = {3.0, 3.0};
    CHECK_THROWS_AS(plan.validate(), InvalidSpec);
    plan.values = {2.5};
    CHECK_THROWS_AS(plan.validate(), InvalidSpec);
    plan.values = {-1.0};
    CHECK_THROWS_AS(plan.validate(), InvalidSpec);
    CellOptions o = opts(0, 1);
    CHECK_THROWS_AS(o.validate(), InvalidSpec);
    o = opts(1, 0);
    CHECK_THROWS_AS(o.validate(), InvalidSpec);
    o = opts(1, 0, SamplingMode::ConditionalTrace);
    CHECK_NOTHROW(o.validate());
    o.feature_cov = FeatureCovarianceSpec{CovarianceSpec::isotropic(10), CovarianceSpec::isotropic(0)};
    CHECK_THROWS_AS(o.validate(), InvalidSpec);
}

TEST_CASE("huge assumed noise gives no reduction in uncertainty") {
    const ProblemConfig cfg = ProblemConfig::isotropic(20, 5, 10, 60, 2.0);
    const SigmaSweepResult s = run_sigma_sweep(cfg, {1e12}, opts(100, 100), 10, 20);
    CHECK(s.sweep.points[0].cell.eps.value == doctest::Approx(25.0).epsilon(0.01));
}

TEST_CASE("sampled-moment prediction at the optimal assumed noise") {
    SweepPlan plan;
    plan.base = ProblemConfig::isotropic(100, 0, 0, 200, 100.0);
    plan.axis = SweepAxis::AssumedNoise;
    plan.values = {100.0};
    plan.options = opts(100, 100);
    plan.master_seed = 11;
    const SweepResult s = run_sweep(plan);
    const SweepPoint& pt = s.points[0];
    REQUIRE(pt.analytic.eps.has_value());
    CHECK(pt.analytic.formula_id == "thm2-sampled");
    const double gap = std::abs(pt.cell.eps.value - pt.analytic.eps->value);
    CHECK(gap < 3.0 * combined(pt.cell.eps, *pt.analytic.eps));
}

TEST_CASE("sigma sweep reports the closed-form optimum only without fake features") {
    const std::vector<double> axis{0.0, 1.0, 4.0};
    const SigmaSweepResult a = run_sigma_sweep(ProblemConfig::isotropic(10, 0, 0, 40, 4.0), axis, opts(5, 5), 12, 10);
    REQUIRE(a.closed_form_optimum.has_value());
    CHECK(*a.closed_form_optimum == 4.0);
    CHECK(a.sweep.points.size() == 3);
    CHECK(a.argmin_sigma_hat2 == axis[a.argmin_index]);
    const SigmaSweepResult b = run_sigma_sweep(ProblemConfig::isotropic(10, 0, 5, 40, 4.0), axis, opts(5, 5), 12, 10);
    CHECK_FALSE(b.closed_form_optimum.has_value());
    CHECK_THROWS_AS(run_sigma_sweep(ProblemConfig::isotropic(10, 0, 5, 40, 4.0), {1.0, 0.5}, opts(5, 5), 12),
                    InvalidSpec);
}

TEST_CASE("output decomposition on held-out rows") {
    const ProblemConfig cfg = ProblemConfig::isotropic(18, 2, 0, 40, 4.0);
    CellOptions o = opts(100, 20);
    o.test_points = 50;
    const SweepResult s = run_decomposition_sweep(cfg, {4.0, 12.0, 60.0, 200.0}, o, 13);
    for (const SweepPoint& pt : s.points) {
        const CellResult& c = pt.cell;
        REQUIRE(c.eps_y.has_value());
        REQUIRE(c.decomposition_gap.has_value());
        CHECK(std::abs(c.decomposition_gap->value) < 3.0 * c.decomposition_gap->stderr);
        CHECK(std::abs(c.eps_C.value - 2.0) < 3.0 * c.eps_C.stderr);
        REQUIRE(pt.analytic.breakdown.eps_y.has_value());
        CHECK(std::abs(c.eps_y->value - *pt.analytic.breakdown.eps_y) < 3.0 * c.eps_y->stderr);
    }
    o.test_points = 0;
    CHECK_THROWS_AS(run_decomposition_sweep(cfg, {4.0}, o, 13), InvalidSpec);
}

TEST_CASE("shape of the unknowns' covariance does not matter") {
    ProblemConfig iso = ProblemConfig::isotropic(30, 5, 20, 80, 2.0);
    ProblemConfig dec = iso;
    dec.cov_x_S = CovarianceSpec::decayed(30, 2.0, 4);
    const CellResult a = run_cell(iso, opts(100, 30), 14);
    const CellResult b = run_cell(dec, opts(100, 30), 15);
    CHECK(std::abs(a.eps.value - b.eps.value) < 3.0 * combined(a.eps, b.eps));
}

TEST_CASE("regressor covariance experiment") {
    const ProblemConfig cfg = ProblemConfig::isotropic(18, 2, 0, 40, 1.0);
    const std::vector<double> axis{4.0, 10.0};
    const auto series = run_covariance_experiment({{0.0, 0.0}, {0.0, 20.0}, {1.0, 0.0}}, cfg, axis,
                                                  opts(100, 20), 16, 3);
    REQUIRE(series.size() == 3);
    for (std::size_t k = 0; k < axis.size(); ++k) {
        const SweepPoint& iso = series[0].sweep.points[k];
        const SweepPoint& fake = series[1].sweep.points[k];
        REQUIRE(iso.analytic.eps.has_value());
        CHECK(std::abs(iso.cell.eps.value - iso.analytic.eps->value) < 3.0 * iso.cell.eps.stderr);
        CHECK(std::abs(iso.cell.eps.value - fake.cell.eps.value) < 3.0 * combined(iso.cell.eps, fake.cell.eps));
        CHECK_FALSE(fake.analytic.eps.has_value());
        CHECK_FALSE(series[2].sweep.points[k].analytic.eps.has_value());
    }
}

TEST_CASE("empirical MSE is unbiased over repeated seeds") {
    const ProblemConfig cfg = ProblemConfig::isotropic(20, 3, 10, 60, 1.0);
    const double truth = *mse_theorem1(AnalyticCell::from(cfg));
    RunningStats repeats;
    for (std::uint64_t seed = 100; seed < 120; ++seed) repeats.push(run_cell(cfg, opts(30, 10), seed).eps.value);
    CHECK(std::abs(repeats.mean() - truth) < 3.0 * repeats.stderr_mean());
}
