#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "misspec/analytic.hpp"
#include "misspec/cli.hpp"
#include "misspec/dataset.hpp"
#include "misspec/montecarlo.hpp"
#include "misspec/rmt_moments.hpp"
#include "misspec/validate.hpp"

using namespace misspec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

CellOptions options(Index M_r, Index M_u) {
    CellOptions o;
    o.M_r = M_r;
    o.M_u = M_u;
    return o;
}

double combined(const ValueWithError& a, const ValueWithError& b) {
    return std::hypot(a.stderr, b.stderr);
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED ") + what;
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome closed_form_vs_monte_carlo() {
    Outcome o;
    std::uint64_t cell = 0;
    for (double sv : {1.0, 10.0}) {
        const auto t0 = Clock::now();
        for (Index pF : {0, 20, 60, 300, 1000}) {
            const ProblemConfig cfg = ProblemConfig::isotropic(100, 0, pF, 200, sv * sv);
            const CellResult r = run_cell(cfg, options(100, 100), 1001, cell++);
            const double truth = *mse_theorem1(AnalyticCell::from(cfg));
            const double z = std::abs(r.eps.value - truth) / r.eps.stderr;
            o.require(z <= 3.0, fmt("sv=%g pF=%g z=%.2f", sv, static_cast<double>(pF), z));
        }
        const double secs = seconds_since(t0);
        o.require(secs < 120.0, fmt("sv=%g %.1fs", sv, secs));
    }
    return o;
}

Outcome threshold_peak() {
    Outcome o;
    SweepPlan plan;
    plan.base = ProblemConfig::isotropic(100, 0, 0, 200, 100.0);
    plan.values = {60.0, 100.0, 300.0};
    plan.options = options(100, 100);
    plan.master_seed = 1002;
    const SweepResult s = run_sweep(plan);
    const double e60 = s.points[0].cell.eps.value;
    const double peak = s.points[1].cell.eps.value;
    const double e300 = s.points[2].cell.eps.value;
    o.require(s.points[1].analytic.regime == Regime::NearThreshold, "pF=100 flagged NearThreshold");
    o.require(peak >= 5.0 * e60, fmt("peak/eps(60)=%.1f", peak / e60));
    o.require(peak >= 5.0 * e300, fmt("peak/eps(300)=%.1f", peak / e300));
    return o;
}

Outcome pf_infinity_limit() {
    Outcome o;
    const AnalyticCell c{50, 1000000, 200, 50.0, 50.0, 1.0};
    const double eps = *mse_theorem1(c);
    const double rel = (100.0 - eps) / 100.0;
    o.require(eps < 100.0 && rel <= 5e-4, fmt("eps=%.6f rel_gap=%.2e", eps, rel));
    return o;
}

Outcome decomposition_identity() {
    Outcome o;
    const double err = decomposition_identity_max_error(1000, 1004);
    o.require(err <= 1e-12, fmt("max rel err=%.2e over 1000 cells", err));
    return o;
}

Outcome sigma_argmin() {
    Outcome o;
    std::vector<double> grid;
    for (double s : {0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 20.0}) grid.push_back(s * s);
    const SigmaSweepResult a =
        run_sigma_sweep(ProblemConfig::isotropic(100, 0, 0, 200, 100.0), grid, options(100, 100), 1005, 200, 0);
    const double best = std::sqrt(a.argmin_sigma_hat2);
    o.require(best >= 7.5 && best <= 12.5, fmt("pF=0 argmin sigma_hat=%g", best));
    const double optimum = std::sqrt(optimal_sigma_hat2(100, 100.0, 0.0, 100.0));
    o.require(optimum == 10.0, fmt("closed-form optimum sigma_hat=%g", optimum));
    const SigmaSweepResult b =
        run_sigma_sweep(ProblemConfig::isotropic(100, 0, 500, 200, 100.0), grid, options(100, 100), 1005, 200, 1);
    o.require(b.argmin_index == 0, fmt("pF=500 argmin sigma_hat=%g", std::sqrt(b.argmin_sigma_hat2)));
    return o;
}

Outcome sampled_moment_consistency() {
    Outcome o;
    for (Index pb : {50, 150, 300, 400}) {
        const AnalyticCell c{50, pb - 50, 200, 50.0, 0.0, 1.0};
        const SpectralMoments m = estimate_moments(200, pb, 1e-6, 50, 200, 1006 + pb);
        const ValueWithError t2 = mse_theorem2(c, m);
        const double z = std::abs(t2.value - *mse_theorem1(c)) / t2.stderr;
        o.require(z <= 3.0, fmt("p_bar=%g z=%.2f", static_cast<double>(pb), z));
    }
    return o;
}

Outcome rmt_suite() {
    Outcome o;
    const auto t0 = Clock::now();
    ValidationOptions vo;
    vo.seed = 1007;
    const ValidationReport rep = run_validation(vo);
    const double secs = seconds_since(t0);
    for (const CheckResult& c : rep.checks)
        o.require(c.pass, c.name + " " + c.statistic + "=" + fmt("%.3g", c.value));
    o.require(secs < 60.0, fmt("%.1fs", secs));
    return o;
}

Outcome ridge_and_interpolation() {
    Outcome o;
    const double ridge = ridge_identity_max_error(20, 1008);
    o.require(ridge <= 1e-8, fmt("route gap=%.2e", ridge));
    for (int n : {10, 50, 200}) {
        const double res = interpolation_residual(n, 1008);
        o.require(res < 1e-6, fmt("n=%g residual=%.2e", n, res));
    }
    return o;
}

Outcome output_decomposition() {
    Outcome o;
    CellOptions opts = options(100, 100);
    opts.test_points = kDefaultTestPoints;
    const SweepResult s =
        run_decomposition_sweep(ProblemConfig::isotropic(90, 10, 0, 200, 100.0), {20, 60, 300, 1000}, opts, 1009);
    for (const SweepPoint& pt : s.points) {
        const CellResult& c = pt.cell;
        const double z = std::abs(c.decomposition_gap->value) / c.decomposition_gap->stderr;
        o.require(z <= 3.0, fmt("pF=%g gap z=%.2f", pt.axis_value, z));
        const double za = std::abs(c.eps_y->value - *pt.analytic.breakdown.eps_y) / c.eps_y->stderr;
        o.require(za <= 3.0, fmt("pF=%g analytic z=%.2f", pt.axis_value, za));
    }
    return o;
}

Outcome covariance_property() {
    Outcome o;
    const std::vector<double> axis{20, 60, 300, 1000};
    const auto series = run_covariance_experiment({{0.0, 0.0}, {0.0, 20.0}},
                                                  ProblemConfig::isotropic(90, 10, 0, 200, 100.0), axis,
                                                  options(100, 100), 1010, 1010);
    for (std::size_t k = 0; k < axis.size(); ++k) {
        const SweepPoint& iso = series[0].sweep.points[k];
        const SweepPoint& fake = series[1].sweep.points[k];
        const double zt = std::abs(iso.cell.eps.value - iso.analytic.eps->value) / iso.cell.eps.stderr;
        o.require(zt <= 3.0, fmt("pF=%g (0,0) vs closed form z=%.2f", axis[k], zt));
        if (90 + axis[k] < 200) {
            const double zc = std::abs(iso.cell.eps.value - fake.cell.eps.value) / combined(iso.cell.eps, fake.cell.eps);
            o.require(zc <= 3.0, fmt("pF=%g (0,0) vs (0,20) z=%.2f", axis[k], zc));
        }
    }
    return o;
}

Outcome planted_double_descent() {
    Outcome o;
    const TabularDataset data = synthesize_planted({64, 500, 1.0, 1011});
    RealDataSweepPlan plan;
    plan.widths = default_width_axis(54, 500);
    plan.sigma_hat2s = {0.0};
    plan.seed = 1011;
    const RealDataResult r = run_realdata_sweep(data, plan);
    std::vector<double> errors;
    for (const RealDataPoint& p : r.points) errors.push_back(p.test_error.value);
    const DoubleDescentSummary s = summarize_double_descent(plan.widths, errors, 54);
    o.require(std::abs(s.peak_width - 54) <= 3, fmt("peak width=%g", static_cast<double>(s.peak_width)));
    o.require(s.global_min_width > 54, fmt("global min width=%g", static_cast<double>(s.global_min_width)));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "misspec");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "misspec_acceptance";
    fs::create_directories(dir);
    std::ofstream(dir / "mc.toml") << "[montecarlo]\np_S = 20\np_C = 5\nn = 40\np_F = [0, 10, 30, 80]\n"
                                      "sigma_v = 2\nM_r = 20\nM_u = 10\n";
    std::ofstream(dir / "rd.toml") << "[realdata]\nn = 30\nn_test = 10\nwidths = \"1:60:1\"\nrepeats = 20\n";
    const fs::path data = dir / "planted.csv";
    o.require(cli({"synthesize", "--rows", "40", "--cols", "60", "--out", data.string()}) == 0, "synthesize");

    struct Job {
        std::string name;
        std::vector<std::string> args;
    };
    const std::vector<Job> jobs{
        {"montecarlo", {"montecarlo", "--config", (dir / "mc.toml").string(), "--seed", "12"}},
        {"realdata", {"realdata", "--config", (dir / "rd.toml").string(), "--data", data.string()}},
        {"analytic", {"analytic"}},
    };
    for (const Job& job : jobs) {
        const fs::path first = dir / (job.name + "_1.csv");
        const fs::path again = dir / (job.name + "_2.csv");
        std::vector<std::string> a = job.args;
        a.insert(a.end(), {"--threads", "1", "--out", first.string()});
        const int c1 = cli(a);
        const int c2 = cli({job.args[0], "--config", first.string() + ".manifest.json", "--threads", "4", "--out",
                            again.string()});
        const bool same = c1 == 0 && c2 == 0 && slurp(first) == slurp(again) && !slurp(first).empty();
        o.require(same, job.name + " rerun from manifest byte-identical");
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"closed-form MSE vs Monte Carlo", closed_form_vs_monte_carlo},
        {"interpolation threshold peak", threshold_peak},
        {"limit of many fake features", pf_infinity_limit},
        {"output decomposition identity", decomposition_identity},
        {"optimal assumed noise", sigma_argmin},
        {"sampled-moment MSE consistency", sampled_moment_consistency},
        {"random-matrix identity suite", rmt_suite},
        {"ridge identity and interpolation", ridge_and_interpolation},
        {"held-out output decomposition", output_decomposition},
        {"regressor covariance property", covariance_property},
        {"planted-signal double descent", planted_double_descent},
        {"CLI determinism", cli_determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s %zu %s (%.1fs) %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    seconds_since(t0), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
