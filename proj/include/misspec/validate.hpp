#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace misspec {

struct ValidationOptions {
    bool quick = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string inject_fault;  // "" or "m_cross"
};

struct CheckResult {
    std::string name;
    std::string statistic;  // "z", "rel_err", "residual"
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double seconds = 0.0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const noexcept;
};

ValidationReport run_validation(const ValidationOptions& opts);

/// Largest relative gap between the two construction routes of W_bar over
/// `shapes` random shapes and sigma_hat2 in {0.1, 1, 10}.
double ridge_identity_max_error(int shapes, std::uint64_t seed);

/// ||A_bar W_bar y - y|| / ||y|| for a random square A_bar at sigma_hat2 = 0.
double interpolation_residual(int n, std::uint64_t seed);

/// Largest relative gap of eps + eps_F + sigma_v2 against eps_y over random
/// cells satisfying the regime hypotheses.
double decomposition_identity_max_error(int cells, std::uint64_t seed);

}  // namespace misspec
