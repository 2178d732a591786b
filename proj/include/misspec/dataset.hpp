#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "misspec/analytic.hpp"
#include "misspec/core_model.hpp"

namespace misspec {

struct TabularDataset {
    MatrixXd features;  // N x P
    VectorXd response;  // N
    std::vector<std::string> column_names;
    std::string source_path;
    std::string content_hash;  // hex SHA-256 of the file bytes
    Index rejected_rows = 0;
    std::vector<std::string> dropped_columns;  // non-numeric feature columns

    Index rows() const noexcept { return features.rows(); }
    Index cols() const noexcept { return features.cols(); }
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Comma-delimited text with a header row. Feature columns with any
/// non-numeric cell are dropped; rows with an empty or non-finite value in a
/// kept column or the response are rejected and counted.
TabularDataset ingest_csv(const std::filesystem::path& path, const std::string& response_column);

/// Parses already-loaded bytes; `source` only labels error messages.
TabularDataset parse_csv(std::string_view text, const std::string& response_column,
                         const std::string& source = "<memory>");

enum class ColumnOrder { AsIs, ShuffledPerExperiment };
std::string_view to_string(ColumnOrder c) noexcept;

struct RealDataSweepPlan {
    Index train_count = 54;
    Index test_count = 10;
    std::vector<Index> widths;
    std::vector<double> sigma_hat2s{0.0};
    Index repeats = 1000;
    ColumnOrder column_order = ColumnOrder::AsIs;
    bool standardize = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate(const TabularDataset& data) const;
};

struct RealDataPoint {
    Index width = 0;
    double sigma_hat2 = 0.0;
    ValueWithError test_error;    // (1/n*) ||y* - A* x_hat||^2 averaged over repeats
    double train_residual = 0.0;  // mean ||A x_hat - y|| / ||y||
};

struct RealDataResult {
    std::vector<RealDataPoint> points;  // sigma-major, widths ascending within
};

/// Train/test split and column order of one repeat; exposed for tests.
struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> test;
    std::vector<Index> columns;
};
SplitIndices draw_split(const RealDataSweepPlan& plan, Index rows, Index cols, std::uint64_t repeat);

RealDataResult run_realdata_sweep(const TabularDataset& data, const RealDataSweepPlan& plan);

struct DoubleDescentSummary {
    Index peak_width = 0;
    Index global_min_width = 0;
    double min_error = 0.0;
    double underparam_min_error = 0.0;  // best error over widths < n
    bool min_overparameterized = false;
};

/// Needs at least three widths with some below n and some above n.
DoubleDescentSummary summarize_double_descent(const std::vector<Index>& widths,
                                              const std::vector<double>& errors, Index n);

/// Table drawn from the underlying linear model: N rows of P i.i.d. N(0,1)
/// features, y = A x + v with x ~ N(0, I_P) and v ~ N(0, sigma_v2).
struct PlantedSpec {
    Index rows = 64;
    Index cols = 500;
    double sigma_v2 = 1.0;
    std::uint64_t seed = 0;
};
TabularDataset synthesize_planted(const PlantedSpec& spec);

/// Writes features then a final "y" column.
void write_dataset_csv(const TabularDataset& data, const std::filesystem::path& path);

/// Width axis dense around n: 1..min(P, 2n) step 1, then step 10 up to P.
std::vector<Index> default_width_axis(Index n, Index P);

}  // namespace misspec
