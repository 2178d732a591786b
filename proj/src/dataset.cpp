#include "misspec/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "misspec/csv.hpp"
#include "misspec/errors.hpp"
#include "misspec/estimator.hpp"
#include "misspec/parallel.hpp"
#include "misspec/stats.hpp"

namespace misspec {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return ss.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

enum class CellKind { Number, Empty, Text };

CellKind parse_cell(std::string_view raw, double& value) {
    std::string_view s = trim(raw);
    if (s.empty()) return CellKind::Empty;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return CellKind::Text;
    return CellKind::Number;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

TabularDataset parse_csv(std::string_view text, const std::string& response_column,
                         const std::string& source) {
    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 0;
    std::vector<std::size_t> line_of_row;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        if (!trim(line).empty() && trim(line) != "\r") {
            rows.push_back(split_csv_line(line));
            line_of_row.push_back(line_no);
        }
        pos = end + 1;
    }
    if (rows.empty()) throw DataError(source + ": no header row");

    const std::vector<std::string> header = rows.front();
    const std::size_t width = header.size();
    std::size_t response_idx = width;
    for (std::size_t c = 0; c < width; ++c)
        if (std::string(trim(header[c])) == response_column) response_idx = c;
    if (response_idx == width)
        throw DataError(source + ": response column '" + response_column + "' not found in header");

    const std::size_t body = rows.size() - 1;
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != width)
            throw DataError(source + ":" + std::to_string(line_of_row[r]) + ": expected " +
                            std::to_string(width) + " fields, found " + std::to_string(rows[r].size()));

    std::vector<double> values(body * width, 0.0);
    std::vector<CellKind> kinds(body * width, CellKind::Empty);
    std::vector<bool> numeric_col(width, true);
    for (std::size_t r = 0; r < body; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            double v = 0.0;
            const CellKind k = parse_cell(rows[r + 1][c], v);
            kinds[r * width + c] = k;
            values[r * width + c] = v;
            if (k == CellKind::Text) {
                if (c == response_idx)
                    throw DataError(source + ":" + std::to_string(line_of_row[r + 1]) +
                                    ": non-numeric response value '" + rows[r + 1][c] + "'");
                numeric_col[c] = false;
            }
        }
    }

    TabularDataset data;
    data.source_path = source;
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < width; ++c) {
        if (c == response_idx) continue;
        if (numeric_col[c]) {
            kept.push_back(c);
            data.column_names.emplace_back(trim(header[c]));
        } else {
            data.dropped_columns.emplace_back(trim(header[c]));
        }
    }
    if (kept.empty()) throw DataError(source + ": no numeric feature columns");

    std::vector<std::size_t> good;
    for (std::size_t r = 0; r < body; ++r) {
        bool ok = true;
        auto usable = [&](std::size_t c) {
            return kinds[r * width + c] == CellKind::Number && std::isfinite(values[r * width + c]);
        };
        ok = usable(response_idx);
        for (std::size_t c : kept) ok = ok && usable(c);
        if (ok) good.push_back(r);
    }
    data.rejected_rows = static_cast<Index>(body - good.size());
    if (good.empty()) throw DataError(source + ": no usable rows");

    data.features.resize(static_cast<Index>(good.size()), static_cast<Index>(kept.size()));
    data.response.resize(static_cast<Index>(good.size()));
    for (std::size_t i = 0; i < good.size(); ++i) {
        const std::size_t r = good[i];
        data.response[static_cast<Index>(i)] = values[r * width + response_idx];
        for (std::size_t j = 0; j < kept.size(); ++j)
            data.features(static_cast<Index>(i), static_cast<Index>(j)) = values[r * width + kept[j]];
    }
    data.content_hash = sha256_hex(text);
    return data;
}

TabularDataset ingest_csv(const std::filesystem::path& path, const std::string& response_column) {
    const std::string text = read_file(path);
    return parse_csv(text, response_column, path.string());
}

std::string_view to_string(ColumnOrder c) noexcept {
    return c == ColumnOrder::AsIs ? "as_is" : "shuffled";
}

void RealDataSweepPlan::validate(const TabularDataset& data) const {
    if (train_count < 1 || test_count < 1) throw InvalidSpec("train and test counts must be positive");
    if (train_count + test_count > data.rows())
        throw InvalidSpec("n + n* = " + std::to_string(train_count + test_count) + " exceeds " +
                          std::to_string(data.rows()) + " usable rows");
    if (repeats < 1) throw InvalidSpec("repeats must be at least 1");
    for (std::size_t k = 0; k < widths.size(); ++k) {
        if (widths[k] < 1 || widths[k] > data.cols())
            throw InvalidSpec("width " + std::to_string(widths[k]) + " outside [1, " +
                              std::to_string(data.cols()) + "]");
        if (k > 0 && widths[k] <= widths[k - 1]) throw InvalidSpec("widths must be strictly increasing");
    }
    for (double s : sigma_hat2s)
        if (!std::isfinite(s) || s < 0.0) throw InvalidSpec("sigma_hat2 values must be finite and >= 0");
}

namespace {

void fisher_yates(std::vector<Index>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng.engine())]);
    }
}

}  // namespace

SplitIndices draw_split(const RealDataSweepPlan& plan, Index rows, Index cols, std::uint64_t repeat) {
    Rng rng(plan.seed, {repeat});
    std::vector<Index> perm(static_cast<std::size_t>(rows));
    std::iota(perm.begin(), perm.end(), Index{0});
    fisher_yates(perm, rng);
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + plan.train_count);
    s.test.assign(perm.begin() + plan.train_count, perm.begin() + plan.train_count + plan.test_count);
    s.columns.resize(static_cast<std::size_t>(cols));
    std::iota(s.columns.begin(), s.columns.end(), Index{0});
    if (plan.column_order == ColumnOrder::ShuffledPerExperiment) fisher_yates(s.columns, rng);
    return s;
}

RealDataResult run_realdata_sweep(const TabularDataset& data, const RealDataSweepPlan& plan) {
    plan.validate(data);
    const std::size_t n_w = plan.widths.size();
    const std::size_t n_s = plan.sigma_hat2s.size();
    const std::size_t per_repeat = n_w * n_s;
    const std::size_t reps = static_cast<std::size_t>(plan.repeats);
    std::vector<double> test_err(reps * per_repeat);
    std::vector<double> train_res(reps * per_repeat);
    const Index max_w = n_w ? plan.widths.back() : 0;

    parallel_for(reps, plan.threads, [&](std::size_t rep) {
        const SplitIndices split = draw_split(plan, data.rows(), data.cols(), rep);
        const auto cols = std::vector<Index>(split.columns.begin(), split.columns.begin() + max_w);
        MatrixXd train = data.features(split.train, cols);
        MatrixXd test = data.features(split.test, cols);
        const VectorXd y = data.response(split.train);
        const VectorXd y_star = data.response(split.test);
        if (plan.standardize) {
            const double n = static_cast<double>(train.rows());
            for (Index c = 0; c < train.cols(); ++c) {
                const double mean = train.col(c).mean();
                double sd = std::sqrt((train.col(c).array() - mean).square().sum() / std::max(1.0, n - 1.0));
                if (!(sd > 0.0)) sd = 1.0;
                train.col(c) = (train.col(c).array() - mean) / sd;
                test.col(c) = (test.col(c).array() - mean) / sd;
            }
        }
        const double y_norm = y.norm();
        for (std::size_t w = 0; w < n_w; ++w) {
            const Index width = plan.widths[w];
            const auto a = train.leftCols(width);
            Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const VectorXd& s = svd.singularValues();
            const VectorXd uty = svd.matrixU().transpose() * y;
            const double cutoff = s.size() ? rank_tolerance(a.rows(), a.cols()) * s[0] : 0.0;
            for (std::size_t k = 0; k < n_s; ++k) {
                const double s2 = plan.sigma_hat2s[k];
                VectorXd coef(s.size());
                for (Index i = 0; i < s.size(); ++i)
                    coef[i] = (s2 == 0.0 && s[i] <= cutoff) ? 0.0 : s[i] / (s[i] * s[i] + s2);
                const VectorXd x_hat = svd.matrixV() * coef.cwiseProduct(uty);
                const std::size_t slot = rep * per_repeat + k * n_w + w;
                test_err[slot] = (y_star - test.leftCols(width) * x_hat).squaredNorm() /
                                 static_cast<double>(y_star.size());
                train_res[slot] = y_norm > 0.0 ? (a * x_hat - y).norm() / y_norm : 0.0;
            }
        }
    });

    RealDataResult out;
    for (std::size_t k = 0; k < n_s; ++k) {
        for (std::size_t w = 0; w < n_w; ++w) {
            RunningStats err, res;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                err.push(test_err[rep * per_repeat + k * n_w + w]);
                res.push(train_res[rep * per_repeat + k * n_w + w]);
            }
            RealDataPoint p;
            p.width = plan.widths[w];
            p.sigma_hat2 = plan.sigma_hat2s[k];
            p.test_error = {err.mean(), err.count() >= 2 ? err.stderr_mean()
                                                          : std::numeric_limits<double>::quiet_NaN()};
            p.train_residual = res.mean();
            out.points.push_back(p);
        }
    }
    return out;
}

DoubleDescentSummary summarize_double_descent(const std::vector<Index>& widths,
                                              const std::vector<double>& errors, Index n) {
    if (widths.size() != errors.size()) throw InvalidInput("widths and errors differ in length");
    if (widths.size() < 3) throw InvalidInput("double-descent summary needs at least 3 widths");
    const bool below = std::any_of(widths.begin(), widths.end(), [n](Index w) { return w < n; });
    const bool above = std::any_of(widths.begin(), widths.end(), [n](Index w) { return w > n; });
    if (!below || !above) throw InvalidInput("width axis must include widths below and above n");

    std::size_t peak = 0, best = 0;
    double under_best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < widths.size(); ++k) {
        if (errors[k] > errors[peak]) peak = k;
        if (errors[k] < errors[best]) best = k;
        if (widths[k] < n) under_best = std::min(under_best, errors[k]);
    }
    DoubleDescentSummary s;
    s.peak_width = widths[peak];
    s.global_min_width = widths[best];
    s.min_error = errors[best];
    s.underparam_min_error = under_best;
    s.min_overparameterized = widths[best] > n;
    return s;
}

TabularDataset synthesize_planted(const PlantedSpec& spec) {
    if (spec.rows < 2 || spec.cols < 1) throw InvalidSpec("planted table needs rows >= 2 and cols >= 1");
    if (!(spec.sigma_v2 >= 0.0)) throw InvalidSpec("sigma_v2 must be non-negative");
    Rng rng(spec.seed, {0x91a7ULL});
    TabularDataset d;
    d.features = rng.gaussian(spec.rows, spec.cols);
    const VectorXd x = rng.gaussian(spec.cols);
    d.response = d.features * x + std::sqrt(spec.sigma_v2) * rng.gaussian(spec.rows);
    for (Index c = 0; c < spec.cols; ++c) d.column_names.push_back("g" + std::to_string(c + 1));
    d.source_path = "planted";
    return d;
}

void write_dataset_csv(const TabularDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter w(out);
    std::vector<std::string> names = data.column_names;
    names.push_back("y");
    w.header(names);
    for (Index r = 0; r < data.rows(); ++r) {
        for (Index c = 0; c < data.cols(); ++c) w.cell(data.features(r, c));
        w.cell(data.response[r]);
        w.end_row();
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Index> default_width_axis(Index n, Index P) {
    std::vector<Index> w;
    const Index dense = std::min(P, 2 * n);
    for (Index k = 1; k <= dense; ++k) w.push_back(k);
    for (Index k = (dense / 10 + 1) * 10; k <= P; k += 10) w.push_back(k);
    if (w.empty() || w.back() != P) w.push_back(P);
    return w;
}

}  // namespace misspec
