#include "misspec/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "misspec/analytic.hpp"
#include "misspec/config.hpp"
#include "misspec/csv.hpp"
#include "misspec/dataset.hpp"
#include "misspec/errors.hpp"
#include "misspec/montecarlo.hpp"
#include "misspec/rmt_moments.hpp"
#include "misspec/validate.hpp"

#ifndef MISSPEC_VERSION
#define MISSPEC_VERSION "0.0.0"
#endif

namespace misspec {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string out_path;
    bool quick = false;
};

struct Output {
    std::string csv;
    std::string resolved_config;
    std::uint64_t seed = 0;
    json summary = json::object();
    json extra = json::object();
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Loads --config; a manifest JSON is accepted and its embedded resolved config is used.
Config load_config(const std::string& path) {
    if (path.empty()) return Config::parse("", "<defaults>");
    const std::filesystem::path p(path);
    if (p.extension() == ".json") {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open config " + path);
        json m;
        try {
            m = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(path, 0, std::string("invalid manifest JSON: ") + e.what());
        }
        if (!m.contains("resolved_config") || !m["resolved_config"].is_string())
            throw ConfigError(path, 0, "manifest has no resolved_config");
        return Config::parse(m["resolved_config"].get<std::string>(), path + "#resolved_config");
    }
    return Config::load(p);
}

Index as_count(const ConfigTable& t, const std::string& key, double v) {
    if (v < 0.0 || v != std::floor(v) || v > 1e9) t.fail(key, "expected a non-negative integer count");
    return static_cast<Index>(v);
}

std::vector<Index> count_list(const ConfigTable& t, const std::string& key, const std::vector<double>& fallback) {
    std::vector<Index> out;
    for (double v : t.get_list(key, fallback)) out.push_back(as_count(t, key, v));
    return out;
}

std::vector<double> to_doubles(const std::vector<Index>& v) {
    return std::vector<double>(v.begin(), v.end());
}

// Variances given either directly (name2) or as standard deviations (name).
std::vector<double> variance_list(const ConfigTable& t, const std::string& name, const std::vector<double>& fallback) {
    const std::string sq = name + "2";
    if (t.has(name) && t.has(sq)) t.fail(name, "give either " + name + " or " + sq + ", not both");
    std::vector<double> out;
    if (t.has(name)) {
        for (double s : t.get_list(name, {})) {
            if (s < 0.0) t.fail(name, "standard deviations must be non-negative");
            out.push_back(s * s);
        }
        return out;
    }
    out = t.get_list(sq, fallback);
    for (double v : out)
        if (v < 0.0) t.fail(sq, "variances must be non-negative");
    return out;
}

std::uint64_t resolve_seed(const CommonFlags& f, const ConfigTable& t) {
    return f.seed ? *f.seed : t.get_u64("seed", 0);
}

std::int64_t i64(Index v) { return static_cast<std::int64_t>(v); }

// ---------------------------------------------------------------------------

Output cmd_analytic(const CommonFlags& flags, const Config& cfg) {
    const ConfigTable& t = cfg.section("analytic");
    t.require_known({"p_S", "p_C", "p_F", "n", "sigma_v", "sigma_v2", "sigma_hat", "sigma_hat2",
                     "x_S_scale", "x_C_scale", "num_spectra", "seed"});
    const auto p_S = count_list(t, "p_S", {100});
    const auto p_C = count_list(t, "p_C", {0});
    const auto p_F = count_list(t, "p_F", {0});
    const auto n = count_list(t, "n", {200});
    const auto sv2 = variance_list(t, "sigma_v", {1.0});
    const auto sh2 = variance_list(t, "sigma_hat", {0.0});
    const double x_S_scale = t.get_double("x_S_scale", 1.0);
    const double x_C_scale = t.get_double("x_C_scale", 1.0);
    if (!(x_S_scale > 0.0)) t.fail("x_S_scale", "must be positive");
    if (!(x_C_scale > 0.0)) t.fail("x_C_scale", "must be positive");
    for (Index v : n)
        if (v < 1) t.fail("n", "must be at least 1");
    Index num_spectra = as_count(t, "num_spectra", static_cast<double>(t.get_int("num_spectra", kDefaultNumSpectra)));
    if (flags.quick) num_spectra = std::min<Index>(num_spectra, 50);
    if (num_spectra < 2) t.fail("num_spectra", "must be at least 2");
    const std::uint64_t seed = resolve_seed(flags, t);

    ConfigWriter w;
    w.section("analytic");
    w.put("p_S", to_doubles(p_S));
    w.put("p_C", to_doubles(p_C));
    w.put("p_F", to_doubles(p_F));
    w.put("n", to_doubles(n));
    w.put("sigma_v2", sv2);
    w.put("sigma_hat2", sh2);
    w.put("x_S_scale", x_S_scale);
    w.put("x_C_scale", x_C_scale);
    w.put("num_spectra", i64(num_spectra));
    w.put_u64("seed", seed);

    std::ostringstream csv;
    CsvWriter out(csv);
    out.header({"p_S", "p_C", "p_F", "n", "sigma_v2", "sigma_hat2", "trace_x", "eps", "eps_stderr",
                "eps_normalized", "eps_F", "eps_y", "regime", "formula_id"});
    std::uint64_t row = 0;
    for (Index ps : p_S)
        for (Index pc : p_C)
            for (Index nn : n)
                for (double v2 : sv2)
                    for (double s2 : sh2)
                        for (Index pf : p_F) {
                            AnalyticCell c{ps, pf, nn, x_S_scale * static_cast<double>(ps),
                                           x_C_scale * static_cast<double>(pc), v2};
                            const double trace_x = c.trace_S + c.trace_C;
                            std::optional<double> eps, eps_se, eps_F, eps_y;
                            std::string formula = "none";
                            const Regime regime = classify(c.p_bar(), nn);
                            if (s2 == 0.0) {
                                const MseBreakdown b = breakdown_theorem1(c);
                                if (b.eps) {
                                    eps = b.eps;
                                    eps_se = 0.0;
                                    eps_F = b.eps_F;
                                    eps_y = b.eps_y;
                                    formula = "thm1";
                                }
                            } else if (c.p_bar() > 1) {
                                const SpectralMoments m = estimate_moments(nn, c.p_bar(), s2, ps, num_spectra,
                                                                           stream_id(seed, {row}), flags.threads);
                                const ValueWithError e = mse_theorem2(c, m);
                                eps = e.value;
                                eps_se = e.stderr;
                                formula = "thm2-sampled";
                            }
                            out.cell(static_cast<long long>(ps)).cell(static_cast<long long>(pc));
                            out.cell(static_cast<long long>(pf)).cell(static_cast<long long>(nn));
                            out.cell(v2).cell(s2).cell(trace_x).cell(eps).cell(eps_se);
                            out.cell(eps && trace_x > 0.0 ? std::optional<double>(*eps / trace_x) : std::nullopt);
                            out.cell(eps_F).cell(eps_y).cell(to_string(regime)).cell(formula);
                            out.end_row();
                            ++row;
                        }
    Output o;
    o.csv = csv.str();
    o.resolved_config = w.text();
    o.seed = seed;
    o.summary["rows"] = row;
    return o;
}

// ---------------------------------------------------------------------------

struct SeriesTag {
    std::optional<double> alpha, alpha_F;
};

void write_mc_header(CsvWriter& w) {
    w.header({"protocol", "series", "p_S", "p_C", "p_F", "n", "sigma_v2", "sigma_hat2", "alpha", "alpha_F",
              "M_r", "M_u", "mode", "test_points", "regime", "trace_x", "eps_hat", "eps_hat_stderr",
              "eps_hat_normalized", "eps_S_hat", "eps_S_stderr", "eps_C_hat", "eps_C_stderr", "eps_F_hat",
              "eps_F_stderr", "eps_y_hat", "eps_y_stderr", "decomp_gap", "decomp_gap_stderr", "eps_analytic",
              "eps_analytic_stderr", "eps_analytic_normalized", "eps_F_analytic", "eps_y_analytic",
              "formula_id"});
}

void write_mc_row(CsvWriter& w, const std::string& protocol, std::size_t series, const SweepPoint& pt,
                  const SeriesTag& tag) {
    const CellResult& c = pt.cell;
    const ProblemConfig& cfg = c.config;
    const double trace_x = cfg.cov_x_S.nominal_power() + cfg.cov_x_C.nominal_power();
    auto norm = [&](std::optional<double> v) -> std::optional<double> {
        if (!v || !(trace_x > 0.0)) return std::nullopt;
        return *v / trace_x;
    };
    w.cell(protocol).cell(static_cast<long long>(series));
    w.cell(static_cast<long long>(cfg.p_S)).cell(static_cast<long long>(cfg.p_C));
    w.cell(static_cast<long long>(cfg.p_F)).cell(static_cast<long long>(cfg.n));
    w.cell(cfg.sigma_v2).cell(cfg.sigma_hat2).cell(tag.alpha).cell(tag.alpha_F);
    w.cell(static_cast<long long>(c.options.M_r));
    if (c.options.mode == SamplingMode::FullSampling)
        w.cell(static_cast<long long>(c.options.M_u));
    else
        w.cell("");
    w.cell(to_string(c.options.mode)).cell(static_cast<long long>(c.options.test_points));
    w.cell(to_string(classify(cfg.p_bar(), cfg.n))).cell(trace_x);
    w.cell(c.eps.value).cell(c.eps.stderr).cell(norm(c.eps.value));
    w.cell(c.eps_S.value).cell(c.eps_S.stderr).cell(c.eps_C.value).cell(c.eps_C.stderr);
    w.cell(c.eps_F.value).cell(c.eps_F.stderr);
    if (c.eps_y) w.cell(c.eps_y->value).cell(c.eps_y->stderr);
    else w.cell("").cell("");
    if (c.decomposition_gap) w.cell(c.decomposition_gap->value).cell(c.decomposition_gap->stderr);
    else w.cell("").cell("");
    const AnalyticPrediction& a = pt.analytic;
    if (a.eps) w.cell(a.eps->value).cell(a.eps->stderr).cell(norm(a.eps->value));
    else w.cell("").cell("").cell("");
    w.cell(a.breakdown.eps_F).cell(a.breakdown.eps_y).cell(a.formula_id);
    w.end_row();
}

Output cmd_montecarlo(const CommonFlags& flags, const Config& cfg) {
    const ConfigTable& t = cfg.section("montecarlo");
    t.require_known({"protocol", "p_S", "p_C", "p_F", "n", "sigma_v", "sigma_v2", "sigma_hat", "sigma_hat2",
                     "x_S_scale", "x_C_scale", "M_r", "M_u", "mode", "test_points", "num_spectra", "seed",
                     "alpha", "alpha_F", "covariance_seed", "redraw_covariance"});
    const std::string protocol = t.get_string("protocol", "pf_sweep");
    if (protocol != "pf_sweep" && protocol != "sigma_sweep" && protocol != "decomposition" &&
        protocol != "covariance")
        t.fail("protocol", "expected pf_sweep, sigma_sweep, decomposition or covariance");

    const Index p_S = as_count(t, "p_S", t.get_double("p_S", 100));
    const Index p_C = as_count(t, "p_C", t.get_double("p_C", 0));
    const Index n = as_count(t, "n", t.get_double("n", 200));
    if (n < 1) t.fail("n", "must be at least 1");
    const auto p_F = count_list(t, "p_F", {0});
    const auto sv2 = variance_list(t, "sigma_v", {1.0});
    const auto sh2 = variance_list(t, "sigma_hat", {0.0});
    const double x_S_scale = t.get_double("x_S_scale", 1.0);
    const double x_C_scale = t.get_double("x_C_scale", 1.0);
    if (!(x_S_scale > 0.0)) t.fail("x_S_scale", "must be positive");
    if (!(x_C_scale > 0.0)) t.fail("x_C_scale", "must be positive");

    CellOptions opts;
    opts.M_r = as_count(t, "M_r", static_cast<double>(t.get_int("M_r", 100)));
    opts.M_u = as_count(t, "M_u", static_cast<double>(t.get_int("M_u", 100)));
    if (flags.quick) {
        opts.M_r = std::min<Index>(opts.M_r, 20);
        opts.M_u = std::min<Index>(opts.M_u, 20);
    }
    const std::string mode = t.get_string("mode", "full");
    if (mode == "full") opts.mode = SamplingMode::FullSampling;
    else if (mode == "conditional") opts.mode = SamplingMode::ConditionalTrace;
    else t.fail("mode", "expected full or conditional");
    opts.test_points = as_count(t, "test_points", static_cast<double>(t.get_int(
                                    "test_points", protocol == "decomposition" ? kDefaultTestPoints : 0)));
    opts.threads = flags.threads;
    Index num_spectra = as_count(t, "num_spectra", static_cast<double>(t.get_int("num_spectra", kDefaultNumSpectra)));
    if (flags.quick) num_spectra = std::min<Index>(num_spectra, 50);
    const std::uint64_t seed = resolve_seed(flags, t);

    std::vector<double> alpha = t.get_list("alpha", {0.0, 0.0, 1.0, 1.0});
    std::vector<double> alpha_F = t.get_list("alpha_F", {0.0, 20.0, 0.0, 20.0});
    const std::uint64_t covariance_seed = t.get_u64("covariance_seed", 0);
    const bool redraw = t.get_bool("redraw_covariance", false);
    if (protocol == "covariance") {
        if (alpha.size() != alpha_F.size()) t.fail("alpha_F", "alpha and alpha_F must have equal length");
        if (sv2.size() != 1) t.fail(t.has("sigma_v") ? "sigma_v" : "sigma_v2", "covariance protocol takes one noise level");
        if (sh2.size() != 1) t.fail(t.has("sigma_hat") ? "sigma_hat" : "sigma_hat2", "covariance protocol takes one sigma_hat2");
    } else if (t.has("alpha") || t.has("alpha_F")) {
        t.fail(t.has("alpha") ? "alpha" : "alpha_F", "only used by the covariance protocol");
    }
    if (protocol == "decomposition" && opts.test_points < 1)
        t.fail("test_points", "decomposition protocol needs test_points >= 1");
    if (protocol != "sigma_sweep" && protocol != "pf_sweep" && sh2.size() != 1)
        t.fail(t.has("sigma_hat") ? "sigma_hat" : "sigma_hat2", "this protocol takes one sigma_hat2");
    try {
        opts.validate();
    } catch (const InvalidSpec& e) {
        t.fail("M_r", e.what());
    }

    ConfigWriter w;
    w.section("montecarlo");
    w.put("protocol", protocol);
    w.put("p_S", i64(p_S));
    w.put("p_C", i64(p_C));
    w.put("n", i64(n));
    w.put("p_F", to_doubles(p_F));
    w.put("sigma_v2", sv2);
    w.put("sigma_hat2", sh2);
    w.put("x_S_scale", x_S_scale);
    w.put("x_C_scale", x_C_scale);
    w.put("M_r", i64(opts.M_r));
    w.put("M_u", i64(opts.M_u));
    w.put("mode", mode);
    w.put("test_points", i64(opts.test_points));
    w.put("num_spectra", i64(num_spectra));
    w.put_u64("seed", seed);
    if (protocol == "covariance") {
        w.put("alpha", alpha);
        w.put("alpha_F", alpha_F);
        w.put_u64("covariance_seed", covariance_seed);
        w.put("redraw_covariance", redraw);
    }

    auto base_for = [&](Index pf, double v2, double s2) {
        ProblemConfig c;
        c.p_S = p_S;
        c.p_C = p_C;
        c.p_F = pf;
        c.n = n;
        c.sigma_v2 = v2;
        c.sigma_hat2 = s2;
        c.cov_x_S = CovarianceSpec::isotropic(p_S, x_S_scale);
        c.cov_x_C = CovarianceSpec::isotropic(p_C, x_C_scale);
        c.validate();
        return c;
    };

    std::ostringstream csv;
    CsvWriter out(csv);
    write_mc_header(out);
    Output o;
    json series_summary = json::array();
    const std::vector<double> pf_axis = to_doubles(p_F);

    auto pf_peak = [](const SweepResult& r) {
        json s = json::object();
        if (r.points.empty()) return s;
        std::size_t peak = 0;
        for (std::size_t k = 1; k < r.points.size(); ++k)
            if (r.points[k].cell.eps.value > r.points[peak].cell.eps.value) peak = k;
        s["peak_p_F"] = r.points[peak].axis_value;
        s["peak_eps_hat"] = r.points[peak].cell.eps.value;
        return s;
    };

    if (protocol == "pf_sweep" || protocol == "decomposition") {
        std::size_t series = 0;
        for (double v2 : sv2)
            for (double s2 : sh2) {
                SweepPlan plan;
                plan.base = base_for(0, v2, s2);
                plan.axis = SweepAxis::FakeCount;
                plan.values = pf_axis;
                plan.options = opts;
                plan.master_seed = seed;
                plan.num_spectra = num_spectra;
                plan.cell_offset = series * pf_axis.size();
                const SweepResult r = run_sweep(plan);
                for (const SweepPoint& pt : r.points) write_mc_row(out, protocol, series, pt, {});
                json s = pf_peak(r);
                s["series"] = series;
                s["sigma_v2"] = v2;
                s["sigma_hat2"] = s2;
                series_summary.push_back(s);
                ++series;
            }
    } else if (protocol == "sigma_sweep") {
        std::size_t series = 0;
        for (double v2 : sv2)
            for (Index pf : p_F) {
                const SigmaSweepResult r =
                    run_sigma_sweep(base_for(pf, v2, 0.0), sh2, opts, seed, num_spectra, series);
                for (const SweepPoint& pt : r.sweep.points) write_mc_row(out, protocol, series, pt, {});
                json s;
                s["series"] = series;
                s["sigma_v2"] = v2;
                s["p_F"] = pf;
                s["argmin_sigma_hat2"] = r.argmin_sigma_hat2;
                s["argmin_sigma_hat"] = std::sqrt(r.argmin_sigma_hat2);
                s["closed_form_optimum_sigma_hat2"] = r.closed_form_optimum ? json(*r.closed_form_optimum) : json(nullptr);
                series_summary.push_back(s);
                ++series;
            }
    } else {
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t k = 0; k < alpha.size(); ++k) pairs.emplace_back(alpha[k], alpha_F[k]);
        CellOptions copts = opts;
        if (redraw) copts.feature_cov = FeatureCovarianceSpec{{}, {}, true};
        const auto results = run_covariance_experiment(pairs, base_for(0, sv2[0], sh2[0]), pf_axis, copts,
                                                       seed, covariance_seed);
        for (std::size_t s = 0; s < results.size(); ++s) {
            for (const SweepPoint& pt : results[s].sweep.points)
                write_mc_row(out, protocol, s, pt, {results[s].alpha, results[s].alpha_F});
            json js = pf_peak(results[s].sweep);
            js["series"] = s;
            js["alpha"] = results[s].alpha;
            js["alpha_F"] = results[s].alpha_F;
            series_summary.push_back(js);
        }
    }
    o.csv = csv.str();
    o.resolved_config = w.text();
    o.seed = seed;
    o.summary["series"] = series_summary;
    return o;
}

// ---------------------------------------------------------------------------

Output cmd_realdata(const CommonFlags& flags, const Config& cfg, const std::string& data_flag,
                    const std::string& response_flag) {
    const ConfigTable& t = cfg.section("realdata");
    t.require_known({"data", "response", "n", "n_test", "widths", "sigma_hat", "sigma_hat2", "repeats",
                     "column_order", "standardize", "seed"});
    const std::string data_path = data_flag.empty() ? t.get_string("data", "") : data_flag;
    if (data_path.empty()) t.fail("data", "no data file (set data = \"...\" or pass --data)");
    const std::string response = response_flag.empty() ? t.get_string("response", "y") : response_flag;

    const TabularDataset data = ingest_csv(data_path, response);

    RealDataSweepPlan plan;
    plan.train_count = as_count(t, "n", t.get_double("n", 54));
    plan.test_count = as_count(t, "n_test", t.get_double("n_test", 10));
    if (t.has("widths") && !t.entries().at("widths").is_array() && t.get_string("widths", "") == "auto") {
        plan.widths = default_width_axis(plan.train_count, data.cols());
    } else if (t.has("widths")) {
        plan.widths = count_list(t, "widths", {});
    } else {
        plan.widths = default_width_axis(plan.train_count, data.cols());
    }
    plan.sigma_hat2s = variance_list(t, "sigma_hat", {0.0});
    plan.repeats = as_count(t, "repeats", static_cast<double>(t.get_int("repeats", 1000)));
    if (flags.quick) plan.repeats = std::min<Index>(plan.repeats, 50);
    const std::string order = t.get_string("column_order", "as_is");
    if (order == "as_is") plan.column_order = ColumnOrder::AsIs;
    else if (order == "shuffled") plan.column_order = ColumnOrder::ShuffledPerExperiment;
    else t.fail("column_order", "expected as_is or shuffled");
    plan.standardize = t.get_bool("standardize", false);
    plan.seed = resolve_seed(flags, t);
    plan.threads = flags.threads;
    try {
        plan.validate(data);
    } catch (const InvalidSpec& e) {
        t.fail("n", e.what());
    }

    ConfigWriter w;
    w.section("realdata");
    w.put("data", data_path);
    w.put("response", response);
    w.put("n", i64(plan.train_count));
    w.put("n_test", i64(plan.test_count));
    w.put("widths", to_doubles(plan.widths));
    w.put("sigma_hat2", plan.sigma_hat2s);
    w.put("repeats", i64(plan.repeats));
    w.put("column_order", order);
    w.put("standardize", plan.standardize);
    w.put_u64("seed", plan.seed);

    const RealDataResult r = run_realdata_sweep(data, plan);
    std::ostringstream csv;
    CsvWriter out(csv);
    out.header({"sigma_hat2", "width", "regime", "test_error", "test_error_stderr", "train_residual"});
    for (const RealDataPoint& p : r.points) {
        out.cell(p.sigma_hat2).cell(static_cast<long long>(p.width));
        out.cell(to_string(classify(p.width, plan.train_count)));
        out.cell(p.test_error.value).cell(p.test_error.stderr).cell(p.train_residual);
        out.end_row();
    }

    json summaries = json::array();
    const std::size_t nw = plan.widths.size();
    for (std::size_t k = 0; k < plan.sigma_hat2s.size(); ++k) {
        json s;
        s["sigma_hat2"] = plan.sigma_hat2s[k];
        std::vector<double> errs;
        for (std::size_t i = 0; i < nw; ++i) errs.push_back(r.points[k * nw + i].test_error.value);
        try {
            const DoubleDescentSummary d = summarize_double_descent(plan.widths, errs, plan.train_count);
            s["peak_width"] = d.peak_width;
            s["global_min_width"] = d.global_min_width;
            s["min_error"] = d.min_error;
            s["underparam_min_error"] = d.underparam_min_error;
            s["min_overparameterized"] = d.min_overparameterized;
        } catch (const InvalidInput& e) {
            s["unavailable"] = e.what();
        }
        summaries.push_back(s);
    }

    Output o;
    o.csv = csv.str();
    o.resolved_config = w.text();
    o.seed = plan.seed;
    o.summary["double_descent"] = summaries;
    o.extra["data"] = {{"path", data_path},
                       {"sha256", data.content_hash},
                       {"rows", data.rows()},
                       {"feature_columns", data.cols()},
                       {"rejected_rows", data.rejected_rows},
                       {"dropped_columns", data.dropped_columns}};
    return o;
}

// ---------------------------------------------------------------------------

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << bytes;
    f.close();
    if (!f) throw IoError("write failed for " + path);
}

void emit(const std::string& command, const CommonFlags& flags, const Output& o, double seconds,
          std::ostream& out) {
    if (flags.out_path.empty()) {
        out << o.csv;
        return;
    }
    write_file(flags.out_path, o.csv);
    json m;
    m["tool"] = "misspec";
    m["version"] = MISSPEC_VERSION;
    m["command"] = command;
    m["master_seed"] = o.seed;
    m["threads"] = flags.threads;
    m["quick"] = flags.quick;
    m["resolved_config"] = o.resolved_config;
    m["timings"] = {{"total_seconds", seconds}};
    m["outputs"] = json::array({{{"path", std::filesystem::path(flags.out_path).filename().string()},
                                 {"sha256", sha256_hex(o.csv)},
                                 {"bytes", o.csv.size()}}});
    m["summary"] = o.summary;
    for (const auto& [k, v] : o.extra.items()) m[k] = v;
    write_file(flags.out_path + ".manifest.json", m.dump(2) + "\n");
}

void print_summary(const json& summary, std::ostream& os) {
    if (!summary.empty()) os << summary.dump(2) << "\n";
}

void add_common(CLI::App* sub, CommonFlags& f, bool wants_config) {
    if (wants_config) sub->add_option("--config", f.config_path, "Experiment config (TOML subset) or a run manifest");
    sub->add_option("--seed", f.seed, "Master seed (overrides the config)");
    sub->add_option("--threads", f.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--out", f.out_path, "Output CSV path; a manifest is written next to it");
    sub->add_flag("--quick", f.quick, "Reduced sample counts");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"LMMSE estimation under misspecification: closed forms, simulation and checks", "misspec"};
    app.set_version_flag("--version", MISSPEC_VERSION);
    app.require_subcommand(1);

    CommonFlags analytic_f, mc_f, real_f, val_f, syn_f;
    auto* analytic = app.add_subcommand("analytic", "Closed-form expected MSE over a parameter grid");
    add_common(analytic, analytic_f, true);
    auto* montecarlo = app.add_subcommand("montecarlo", "Empirical MSE sweeps paired with closed forms");
    add_common(montecarlo, mc_f, true);
    auto* realdata = app.add_subcommand("realdata", "Width sweep on a tabular dataset");
    add_common(realdata, real_f, true);
    std::string data_path, response;
    realdata->add_option("--data", data_path, "CSV with a header row");
    realdata->add_option("--response", response, "Response column name");
    auto* validate = app.add_subcommand("validate", "Run the identity and sampling-oracle checks");
    add_common(validate, val_f, false);
    std::string fault;
    validate->add_option("--inject-fault", fault, "Deliberately break a reference value")
        ->check(CLI::IsMember({"m_cross"}));
    auto* synthesize = app.add_subcommand("synthesize", "Write a planted-signal CSV drawn from the linear model");
    add_common(synthesize, syn_f, false);
    PlantedSpec planted;
    synthesize->add_option("--rows", planted.rows, "Rows N")->check(CLI::Range(2, 1000000));
    synthesize->add_option("--cols", planted.cols, "Feature columns P")->check(CLI::Range(1, 1000000));
    synthesize->add_option("--sigma-v2", planted.sigma_v2, "Noise variance")->check(CLI::NonNegativeNumber);

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    const auto t0 = Clock::now();
    try {
        if (analytic->parsed()) {
            const Output o = cmd_analytic(analytic_f, load_config(analytic_f.config_path));
            emit("analytic", analytic_f, o, seconds_since(t0), out);
        } else if (montecarlo->parsed()) {
            const Output o = cmd_montecarlo(mc_f, load_config(mc_f.config_path));
            emit("montecarlo", mc_f, o, seconds_since(t0), out);
            if (!mc_f.out_path.empty()) print_summary(o.summary, out);
        } else if (realdata->parsed()) {
            const Output o = cmd_realdata(real_f, load_config(real_f.config_path), data_path, response);
            emit("realdata", real_f, o, seconds_since(t0), out);
            print_summary(o.summary, real_f.out_path.empty() ? err : out);
        } else if (validate->parsed()) {
            ValidationOptions vo;
            vo.quick = val_f.quick;
            vo.seed = val_f.seed.value_or(0);
            vo.threads = val_f.threads;
            vo.inject_fault = fault;
            const ValidationReport rep = run_validation(vo);
            std::ostringstream csv;
            CsvWriter w(csv);
            w.header({"check", "statistic", "value", "tolerance", "verdict"});
            for (const CheckResult& c : rep.checks) {
                w.cell(c.name).cell(c.statistic).cell(c.value).cell(c.tolerance).cell(c.pass ? "PASS" : "FAIL");
                w.end_row();
                std::ostringstream line;
                line << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.statistic << "="
                     << format_number(c.value) << "  tol=" << format_number(c.tolerance) << "  ("
                     << std::fixed << std::setprecision(2) << c.seconds << " s)\n";
                (val_f.out_path.empty() ? err : out) << line.str();
            }
            Output o;
            o.csv = csv.str();
            o.seed = vo.seed;
            ConfigWriter cw;
            cw.section("validate");
            cw.put("quick", vo.quick);
            cw.put_u64("seed", vo.seed);
            o.resolved_config = cw.text();
            o.summary["all_pass"] = rep.all_pass();
            emit("validate", val_f, o, seconds_since(t0), out);
            (val_f.out_path.empty() ? err : out)
                << (rep.all_pass() ? "all checks passed\n" : "validation FAILED\n");
            return rep.all_pass() ? kExitOk : kExitValidationFailed;
        } else if (synthesize->parsed()) {
            if (syn_f.out_path.empty()) throw ConfigError("synthesize", 0, "--out is required");
            planted.seed = syn_f.seed.value_or(0);
            const TabularDataset d = synthesize_planted(planted);
            write_dataset_csv(d, syn_f.out_path);
            err << "wrote " << d.rows() << " x " << d.cols() << " planted table to " << syn_f.out_path << "\n";
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIoError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitIoError;
    } catch (const std::invalid_argument& e) {
        err << "invalid parameters: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::domain_error& e) {
        err << "unsupported: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}

}  // namespace misspec
