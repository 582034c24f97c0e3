#pragma once

// Path-wise verification metrics for a posterior mean against the truth.

#include <algorithm>
#include <cmath>
#include <optional>

#include "qgda/grid.hpp"

namespace qgda {

enum class StdDivisor { population, sample };

inline double standard_deviation(const Vector& x, StdDivisor divisor = StdDivisor::population) {
    const double n = static_cast<double>(x.size());
    const double denom = divisor == StdDivisor::population ? n : n - 1.0;
    return std::sqrt((x.array() - x.mean()).square().sum() / denom);
}

/// Root-mean-square error normalised by the standard deviation of the truth.
inline double rmse(const Vector& mu, const Vector& truth, StdDivisor divisor = StdDivisor::population) {
    if (mu.size() != truth.size() || truth.size() < 2) throw ConfigError("rmse: need equal lengths >= 2");
    const double sd = standard_deviation(truth, divisor);
    if (!(sd > 0.0)) throw ConfigError("rmse: truth has zero standard deviation");
    return std::sqrt((mu - truth).squaredNorm() / static_cast<double>(truth.size())) / sd;
}

/// Pattern correlation (centred cosine similarity).
inline double corr(const Vector& mu, const Vector& truth) {
    if (mu.size() != truth.size() || truth.size() < 2) throw ConfigError("corr: need equal lengths >= 2");
    const Vector a = mu.array() - mu.mean();
    const Vector b = truth.array() - truth.mean();
    const double na2 = a.squaredNorm(), nb2 = b.squaredNorm();
    if (!(na2 > 0.0) || !(nb2 > 0.0)) throw ConfigError("corr: constant input");
    // One square root of the product keeps corr(x, x) and corr(-x, x) exact.
    return std::clamp(a.dot(b) / std::sqrt(na2 * nb2), -1.0, 1.0);
}

struct MetricSample {
    long step = 0;
    double rmse = 0.0;
    double corr = 0.0;
    double wall_seconds = 0.0;
    std::optional<double> normalized_time;  // wall / (N_t * n^2); absent for N_t = 0
};

inline std::optional<double> normalized_time(double wall_seconds, long n_steps, int n) {
    if (n_steps <= 0 || n <= 0) return std::nullopt;
    return wall_seconds / (static_cast<double>(n_steps) * n * n);
}

inline MetricSample timing_record(long step, const Vector& mu, const Vector& truth, double wall_seconds,
                                  long n_steps, int n) {
    return MetricSample{step, rmse(mu, truth), corr(mu, truth), wall_seconds,
                        normalized_time(wall_seconds, n_steps, n)};
}

}  // namespace qgda
