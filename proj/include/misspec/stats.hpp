#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace misspec {

/// Welford running mean / variance.
class RunningStats {
public:
    void push(double x) noexcept {
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
    }

    std::size_t count() const noexcept { return count_; }
    double mean() const noexcept { return mean_; }

    /// Unbiased sample variance; NaN with fewer than two samples.
    double variance() const noexcept {
        if (count_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(count_ - 1);
    }

    /// Standard error of the mean; NaN with fewer than two samples.
    double stderr_mean() const noexcept {
        return std::sqrt(variance() / static_cast<double>(count_));
    }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline RunningStats summarize(std::span<const double> xs) noexcept {
    RunningStats s;
    for (double x : xs) s.push(x);
    return s;
}

/// Running covariance of two paired streams.
class RunningCovariance {
public:
    void push(double x, double y) noexcept {
        ++count_;
        const double n = static_cast<double>(count_);
        const double dx = x - mean_x_;
        mean_x_ += dx / n;
        mean_y_ += (y - mean_y_) / n;
        c_ += dx * (y - mean_y_);
    }
    double covariance() const noexcept {
        if (count_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return c_ / static_cast<double>(count_ - 1);
    }

private:
    std::size_t count_ = 0;
    double mean_x_ = 0.0;
    double mean_y_ = 0.0;
    double c_ = 0.0;
};

}  // namespace misspec
