#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "scfa/rng.hpp"

namespace scfa {

enum class SampleMode { without_replacement, with_replacement };

inline const char* to_string(SampleMode m) {
    return m == SampleMode::without_replacement ? "without_replacement" : "with_replacement";
}

inline SampleMode sample_mode_from_string(const std::string& s) {
    if (s == "without_replacement") return SampleMode::without_replacement;
    if (s == "with_replacement") return SampleMode::with_replacement;
    throw std::invalid_argument("unknown sample mode: " + s);
}

// One temporal sampling recipe: how many frames per view, how to draw them,
// and the seed the draws derive from. A (plan, draw_id) pair fully determines
// the drawn indices, so two views of the same video use draw_id 0 and 1.
struct SamplingPlan {
    std::size_t y = 16;
    SampleMode mode = SampleMode::without_replacement;
    std::uint64_t seed = 0;
};

// Draws y frame indices from [0, T), sorted ascending. Pure function of
// (seed, draw_id, T, y, mode). In without_replacement mode with y > T all T
// indices are used and the last index is repeated to pad the view.
inline std::vector<std::size_t> sample_indices(std::size_t T, const SamplingPlan& plan,
                                               std::uint64_t draw_id) {
    if (T == 0) throw std::invalid_argument("sample_indices: T must be >= 1");
    if (plan.y == 0) throw std::invalid_argument("sample_indices: y must be >= 1");

    auto rng = make_rng(mix_seed(plan.seed, draw_id));
    std::vector<std::size_t> out;
    out.reserve(plan.y);

    if (plan.mode == SampleMode::with_replacement) {
        std::uniform_int_distribution<std::size_t> dist(0, T - 1);
        for (std::size_t i = 0; i < plan.y; ++i) out.push_back(dist(rng));
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::size_t k = std::min(plan.y, T);
    std::vector<std::size_t> pool(T);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> dist(i, T - 1);
        std::swap(pool[i], pool[dist(rng)]);
    }
    out.assign(pool.begin(), pool.begin() + k);
    std::sort(out.begin(), out.end());
    // short clip: pad to y by repeating the final frame
    while (out.size() < plan.y) out.push_back(out.back());
    return out;
}

}  // namespace scfa
