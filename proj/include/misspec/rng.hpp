#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace misspec {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a stream id from a master seed and a path of counters, e.g.
/// (cell index, realization index). Order of the path matters; the order in
/// which streams are consumed does not.
constexpr std::uint64_t stream_id(std::uint64_t master_seed,
                                  std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(master_seed ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x517cc1b727220a95ULL));
    return h;
}

/// Seeded random stream. Each stream is owned by exactly one worker.
class Rng {
public:
    explicit Rng(std::uint64_t id) : engine_(id), id_(id) {}
    Rng(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path)
        : Rng(stream_id(master_seed, path)) {}

    std::uint64_t id() const noexcept { return id_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::mt19937_64& engine() noexcept { return engine_; }

    /// rows x cols matrix with i.i.d. N(0,1) entries, filled column-major.
    Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal();
        return m;
    }

    Eigen::VectorXd gaussian(Eigen::Index size) {
        Eigen::VectorXd v(size);
        for (Eigen::Index k = 0; k < size; ++k) v[k] = normal();
        return v;
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::uint64_t id_;
};

}  // namespace misspec
