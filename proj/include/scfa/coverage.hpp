#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "scfa/rng.hpp"

namespace scfa {

// Probability that one specific frame of a T-frame video is never drawn
// across B independent with-replacement samplings of y frames:
// (1 - 1/T)^(B*y).
inline double coverage_probability(std::size_t T, std::size_t y, std::size_t B) {
    if (T == 0) throw std::invalid_argument("coverage_probability: T must be >= 1");
    const double exponent = static_cast<double>(B) * static_cast<double>(y);
    if (exponent == 0.0) return 1.0;
    return std::pow(1.0 - 1.0 / static_cast<double>(T), exponent);
}

struct CoverageEstimate {
    double p_hat = 0.0;      // fraction of trials where the frame never appeared
    double std_err = 0.0;    // binomial standard error of p_hat
    std::size_t trials = 0;
};

// Monte Carlo oracle for coverage_probability: simulates B with-replacement
// draws of y uniform indices per trial and counts the trials in which index 0
// never shows up. A trial stops as soon as index 0 appears; that leaves the
// hit/miss outcome unchanged.
inline CoverageEstimate monte_carlo_coverage(std::size_t T, std::size_t y, std::size_t B,
                                             std::size_t trials, std::uint64_t seed) {
    if (T == 0) throw std::invalid_argument("monte_carlo_coverage: T must be >= 1");
    if (trials == 0) throw std::invalid_argument("monte_carlo_coverage: trials must be >= 1");

    auto rng = make_rng(mix_seed(seed, 0x636f76ULL));
    std::uniform_int_distribution<std::size_t> dist(0, T - 1);
    const std::size_t draws = B * y;

    std::size_t missed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        bool seen = false;
        for (std::size_t d = 0; d < draws && !seen; ++d) seen = (dist(rng) == 0);
        if (!seen) ++missed;
    }

    CoverageEstimate est;
    est.trials = trials;
    est.p_hat = static_cast<double>(missed) / static_cast<double>(trials);
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(trials));
    return est;
}

}  // namespace scfa
