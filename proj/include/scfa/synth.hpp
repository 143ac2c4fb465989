#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/dataset.hpp"
#include "scfa/image.hpp"
#include "scfa/rng.hpp"

namespace scfa {

// ---------------------------------------------------------------------------
// Procedural toy videos: one bright shape sweeping over a dark noisy
// background with torus wraparound. Classes come in pairs that share a
// shape and a sweep axis and differ only in sweep direction, so no single
// frame can separate a pair; only temporal structure can. Start positions
// are quantized to a few lattice rows along the cross-track coordinate,
// which makes opposite-direction videos frequent near-duplicates in
// content and forces the contrastive learner to attend to frame order.
// A small clutter dot at an uncorrelated position per frame (part of the
// noise model, absent at noise 0) degrades static pixel statistics
// without disturbing the moving subject.
// ---------------------------------------------------------------------------
struct SynthConfig {
    std::size_t num_classes = 4;
    std::size_t videos_per_class = 50;
    std::size_t frames = 32;  // T
    std::size_t frame_h = 32;
    std::size_t frame_w = 32;
    double noise = 0.08;     // background noise amplitude, fraction of full scale
    std::size_t jitter = 1;  // bound on the per-video speed offset
    std::uint64_t seed = 7;

    void validate() const {
        if (num_classes < 2 || num_classes > 8) {
            throw std::invalid_argument("synth: num_classes must lie in [2, 8]");
        }
        if (videos_per_class == 0) {
            throw std::invalid_argument("synth: videos_per_class must be positive");
        }
        if (frames == 0) throw std::invalid_argument("synth: frames must be positive");
        if (frame_h < 16 || frame_w < 16) {
            throw std::invalid_argument("synth: frame dimensions must be at least 16");
        }
        if (noise < 0.0 || noise > 1.0) {
            throw std::invalid_argument("synth: noise must lie in [0, 1]");
        }
    }
};

enum class Shape { circle, square, triangle, cross };
enum class Axis { horizontal, vertical, diagonal, antidiagonal };

// Sweep axis plus sign along it. All four axes are linear, so at zero
// noise and zero jitter every video of a class is an exact torus
// translation of any other video of that class.
struct Motion {
    Axis axis;
    long dir;  // +1 or -1
};

// Classes 2k and 2k+1 share a shape and an axis and differ only in
// direction.
inline Shape shape_for_class(std::size_t c) { return static_cast<Shape>((c / 2) % 4); }
inline Motion motion_for_class(std::size_t c) {
    return {static_cast<Axis>((c / 2) % 4), (c % 2 == 0) ? 1L : -1L};
}

namespace detail {

inline bool in_shape(Shape s, long dx, long dy, long r) {
    switch (s) {
        case Shape::circle:
            return dx * dx + dy * dy <= r * r;
        case Shape::square:
            return std::labs(dx) <= r - 1 && std::labs(dy) <= r - 1;
        case Shape::triangle:  // apex up
            return dy >= -r && dy <= r && 2 * std::labs(dx) <= dy + r;
        case Shape::cross:
            return (std::labs(dx) <= 1 && std::labs(dy) <= r) ||
                   (std::labs(dy) <= 1 && std::labs(dx) <= r);
    }
    return false;
}

inline long wrap(long v, long limit) {
    v %= limit;
    return v < 0 ? v + limit : v;
}

inline std::string zero_pad(std::size_t v, std::size_t width) {
    std::string s = std::to_string(v);
    return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

// Per-step velocity of the subject center.
inline void velocity(Motion m, long speed, long& vx, long& vy) {
    const long s = speed * m.dir;
    switch (m.axis) {
        case Axis::horizontal:
            vx = s;
            vy = 0;
            break;
        case Axis::vertical:
            vx = 0;
            vy = s;
            break;
        case Axis::diagonal:
            vx = s;
            vy = s;
            break;
        case Axis::antidiagonal:
            vx = s;
            vy = -s;
            break;
    }
}

// Signed displacement folded to the nearest torus image. Valid while the
// painted extent stays below half the frame, which validate() guarantees.
inline long fold(long d, long limit) {
    if (d > limit / 2) d -= limit;
    if (d < -limit / 2) d += limit;
    return d;
}

}  // namespace detail

// Renders every video of the configured dataset under out_dir, one frame
// directory per video plus a manifest.csv, and returns the manifest
// entries. Layout matches what load_dataset consumes. Per-video streams
// are seeded independently, so output bytes depend only on the config.
inline std::vector<ManifestEntry> gen_synthetic_dataset(const SynthConfig& cfg,
                                                        const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw std::runtime_error("cannot create output directory: " + out_dir.string());
    }

    const long H = static_cast<long>(cfg.frame_h), W = static_cast<long>(cfg.frame_w);
    const long radius = std::min(H, W) / 6;  // subject radius, 5 px on 32x32 frames
    const long ring_spacing = H / 4, ring_offset = H / 16;
    const long dot_radius = 2;  // clutter dot, present whenever noise > 0
    const int amp = static_cast<int>(std::lround(cfg.noise * 255.0));
    std::vector<ManifestEntry> entries;

    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        const Shape shape = shape_for_class(c);
        const Motion motion = motion_for_class(c);
        for (std::size_t v = 0; v < cfg.videos_per_class; ++v) {
            const std::string name = "c" + std::to_string(c) + "_v" + detail::zero_pad(v, 3);
            const fs::path video_dir = out_dir / name;
            fs::create_directories(video_dir, ec);
            if (!fs::is_directory(video_dir)) {
                throw std::runtime_error("cannot create video directory: " + video_dir.string());
            }

            auto rng = make_rng(mix_seed(cfg.seed, c, v));
            // Start: lattice ring on the cross-track coordinate, dense
            // phase along the sweep. Opposite-direction classmates on the
            // same ring then traverse identical position sets.
            std::uniform_int_distribution<long> ring_dist(0, 3);
            std::uniform_int_distribution<long> phase_dist(
                0, (motion.axis == Axis::vertical ? H : W) - 1);
            const long ring = ring_dist(rng) * ring_spacing + ring_offset;
            const long phase = phase_dist(rng);
            long x0 = 0, y0 = 0;
            switch (motion.axis) {
                case Axis::horizontal:
                    x0 = phase;
                    y0 = ring;
                    break;
                case Axis::vertical:
                    x0 = ring;
                    y0 = phase;
                    break;
                case Axis::diagonal:  // ring = y - x stays constant
                    x0 = phase;
                    y0 = detail::wrap(phase + ring, H);
                    break;
                case Axis::antidiagonal:  // ring = y + x stays constant
                    x0 = phase;
                    y0 = detail::wrap(ring - phase, H);
                    break;
            }
            long speed = 2;
            if (cfg.jitter > 0) {
                std::uniform_int_distribution<long> dj(-static_cast<long>(cfg.jitter),
                                                       static_cast<long>(cfg.jitter));
                speed += dj(rng);
            }
            if (speed < 1) speed = 1;
            long vx = 0, vy = 0;
            detail::velocity(motion, speed, vx, vy);

            auto noise_rng = make_rng(mix_seed(cfg.seed, c, v, 0x6e6fULL));
            std::uniform_int_distribution<int> noise_dist(-amp, amp);
            std::uniform_int_distribution<long> dot_x_dist(0, W - 1), dot_y_dist(0, H - 1);
            for (std::size_t k = 0; k < cfg.frames; ++k) {
                const long kk = static_cast<long>(k);
                const long scx = detail::wrap(x0 + vx * kk, W);
                const long scy = detail::wrap(y0 + vy * kk, H);
                long dot_x = 0, dot_y = 0;
                if (amp > 0) {
                    dot_x = dot_x_dist(noise_rng);
                    dot_y = dot_y_dist(noise_rng);
                }
                Image img(cfg.frame_h, cfg.frame_w);
                for (std::size_t y = 0; y < cfg.frame_h; ++y) {
                    for (std::size_t x = 0; x < cfg.frame_w; ++x) {
                        int val = 30 + (amp > 0 ? noise_dist(noise_rng) : 0);
                        if (amp > 0) {
                            const long ddx = detail::fold(static_cast<long>(x) - dot_x, W);
                            const long ddy = detail::fold(static_cast<long>(y) - dot_y, H);
                            if (ddx * ddx + ddy * ddy <= dot_radius * dot_radius) val = 100;
                        }
                        const long sdx = detail::fold(static_cast<long>(x) - scx, W);
                        const long sdy = detail::fold(static_cast<long>(y) - scy, H);
                        if (detail::in_shape(shape, sdx, sdy, radius)) val = 230;
                        const std::uint8_t px = static_cast<std::uint8_t>(std::clamp(val, 0, 255));
                        for (std::size_t ch = 0; ch < 3; ++ch) img.at(y, x, ch) = px;
                    }
                }
                write_ppm(video_dir / (detail::zero_pad(k, 4) + ".ppm"), img);
            }
            entries.push_back({name, static_cast<int>(c), name});
        }
    }
    write_manifest(out_dir / "manifest.csv", entries);
    return entries;
}

}  // namespace scfa
