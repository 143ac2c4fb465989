#include "scfa/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "scfa/dataset.hpp"

namespace {

namespace fs = std::filesystem;

using scfa::FrameSequence;
using scfa::Image;
using scfa::SynthConfig;

class TempDir {
  public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("scfa_synth_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

  private:
    static inline int counter_ = 0;
    fs::path path_;
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.videos_per_class = 3;
    cfg.frames = 8;
    cfg.frame_h = 16;
    cfg.frame_w = 16;
    cfg.seed = 11;
    return cfg;
}

// True when `b` equals `a` cyclically shifted by (sx, sy) on the frame torus.
bool is_torus_shift(const Image& a, const Image& b, long sx, long sy) {
    const long H = static_cast<long>(a.height), W = static_cast<long>(a.width);
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            const long yy = (y + sy % H + H) % H;
            const long xx = (x + sx % W + W) % W;
            for (std::size_t c = 0; c < 3; ++c) {
                if (a.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) !=
                    b.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c)) {
                    return false;
                }
            }
        }
    }
    return true;
}

TEST(SynthTest, GeneratesExpectedLayoutAndManifest) {
    TempDir tmp;
    const SynthConfig cfg = small_config();
    const auto entries = scfa::gen_synthetic_dataset(cfg, tmp.path());
    ASSERT_EQ(entries.size(), 12u);

    std::size_t dirs = 0;
    for (const auto& e : entries) {
        const fs::path d = tmp.path() / e.path;
        ASSERT_TRUE(fs::is_directory(d)) << d;
        ++dirs;
        std::size_t frames = 0;
        for (const auto& f : fs::directory_iterator(d)) {
            if (f.path().extension() == ".ppm") ++frames;
        }
        EXPECT_EQ(frames, cfg.frames) << d;
    }
    EXPECT_EQ(dirs, 12u);
    EXPECT_TRUE(fs::is_regular_file(tmp.path() / "manifest.csv"));

    const auto loaded = scfa::load_dataset(tmp.path() / "manifest.csv");
    ASSERT_EQ(loaded.size(), 12u);
    std::set<int> labels;
    for (const auto& seq : loaded) {
        labels.insert(seq.label);
        EXPECT_EQ(seq.frame_count(), cfg.frames);
        EXPECT_EQ(seq.frames[0].height, cfg.frame_h);
        EXPECT_EQ(seq.frames[0].width, cfg.frame_w);
    }
    EXPECT_EQ(labels, (std::set<int>{0, 1, 2, 3}));
}

TEST(SynthTest, SameSeedProducesIdenticalBytes) {
    TempDir a, b;
    const SynthConfig cfg = small_config();
    const auto ea = scfa::gen_synthetic_dataset(cfg, a.path());
    const auto eb = scfa::gen_synthetic_dataset(cfg, b.path());
    ASSERT_EQ(ea.size(), eb.size());
    for (const auto& e : ea) {
        for (std::size_t k = 0; k < cfg.frames; ++k) {
            char name[16];
            std::snprintf(name, sizeof(name), "%04zu.ppm", k);
            EXPECT_EQ(file_bytes(a.path() / e.path / name), file_bytes(b.path() / e.path / name))
                << e.path << "/" << name;
        }
    }
    EXPECT_EQ(file_bytes(a.path() / "manifest.csv"), file_bytes(b.path() / "manifest.csv"));
}

TEST(SynthTest, DifferentSeedChangesPixels) {
    TempDir a, b;
    SynthConfig cfg = small_config();
    const auto ea = scfa::gen_synthetic_dataset(cfg, a.path());
    cfg.seed = 12;
    const auto eb = scfa::gen_synthetic_dataset(cfg, b.path());
    bool any_diff = false;
    for (std::size_t i = 0; i < ea.size() && !any_diff; ++i) {
        any_diff = file_bytes(a.path() / ea[i].path / "0000.ppm") !=
                   file_bytes(b.path() / eb[i].path / "0000.ppm");
    }
    EXPECT_TRUE(any_diff);
}

// At zero noise and zero jitter the only per-video variation is the start
// position, so any two videos of one class are exact torus translations of
// each other, frame by frame with a single common shift.
TEST(SynthTest, ZeroNoiseClassmatesAreTorusTranslations) {
    TempDir tmp;
    SynthConfig cfg = small_config();
    cfg.num_classes = 8;  // cover every sweep axis in both directions
    cfg.noise = 0.0;
    cfg.jitter = 0;
    scfa::gen_synthetic_dataset(cfg, tmp.path());
    const auto videos = scfa::load_dataset(tmp.path() / "manifest.csv");
    ASSERT_EQ(videos.size(), 24u);

    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        const FrameSequence* first = nullptr;
        const FrameSequence* second = nullptr;
        for (const auto& v : videos) {
            if (v.label != static_cast<int>(c)) continue;
            if (!first) first = &v;
            else if (!second) second = &v;
        }
        ASSERT_NE(first, nullptr);
        ASSERT_NE(second, nullptr);

        // Search frame 0 for the shift, then demand it holds for all frames.
        const long H = static_cast<long>(cfg.frame_h), W = static_cast<long>(cfg.frame_w);
        long found_sx = -1, found_sy = -1;
        for (long sy = 0; sy < H && found_sx < 0; ++sy) {
            for (long sx = 0; sx < W; ++sx) {
                if (is_torus_shift(first->frames[0], second->frames[0], sx, sy)) {
                    found_sx = sx;
                    found_sy = sy;
                    break;
                }
            }
        }
        ASSERT_GE(found_sx, 0) << "class " << c << ": no shift aligns frame 0";
        for (std::size_t k = 1; k < cfg.frames; ++k) {
            EXPECT_TRUE(is_torus_shift(first->frames[k], second->frames[k], found_sx, found_sy))
                << "class " << c << " frame " << k;
        }
    }
}

TEST(SynthTest, ConsecutiveClassPairsShareShapeAndAxisButNotDirection) {
    for (std::size_t c = 0; c + 1 < 8; c += 2) {
        EXPECT_EQ(scfa::shape_for_class(c), scfa::shape_for_class(c + 1));
        EXPECT_EQ(scfa::motion_for_class(c).axis, scfa::motion_for_class(c + 1).axis);
        EXPECT_EQ(scfa::motion_for_class(c).dir, -scfa::motion_for_class(c + 1).dir);
    }
    // All eight (shape, axis, direction) combinations are distinct.
    std::set<std::tuple<int, int, long>> combos;
    for (std::size_t c = 0; c < 8; ++c) {
        const auto m = scfa::motion_for_class(c);
        EXPECT_TRUE(m.dir == 1 || m.dir == -1);
        combos.insert({static_cast<int>(scfa::shape_for_class(c)), static_cast<int>(m.axis), m.dir});
    }
    EXPECT_EQ(combos.size(), 8u);
}

// The hardness mechanism of the benchmark: with quantized rings, a video
// and some opposite-direction video of the paired class visit the exact
// same positions, just in a different order. Frame multisets then match
// while frame sequences never do.
TEST(SynthTest, DirectionPairsTraverseSamePositionSets) {
    TempDir tmp;
    SynthConfig cfg = small_config();
    cfg.num_classes = 2;
    cfg.videos_per_class = 8;
    cfg.noise = 0.0;
    cfg.jitter = 0;
    scfa::gen_synthetic_dataset(cfg, tmp.path());
    const auto videos = scfa::load_dataset(tmp.path() / "manifest.csv");

    auto frame_key = [](const Image& f) {
        return std::string(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
    };
    bool any_twin = false;
    for (const auto& a : videos) {
        if (a.label != 0) continue;
        for (const auto& b : videos) {
            if (b.label != 1) continue;
            std::vector<std::string> fa, fb;
            for (const auto& f : a.frames) fa.push_back(frame_key(f));
            for (const auto& f : b.frames) fb.push_back(frame_key(f));
            EXPECT_NE(fa, fb) << a.video_id << " vs " << b.video_id
                              << ": opposite directions cannot agree frame by frame";
            std::sort(fa.begin(), fa.end());
            std::sort(fb.begin(), fb.end());
            if (fa == fb) any_twin = true;
        }
    }
    EXPECT_TRUE(any_twin) << "no cross-class pair shares its position set";
}

// The clutter dot rides the noise stream: present (as exact value-100
// pixels, distinct from background noise and subject) only at nonzero
// noise.
TEST(SynthTest, ClutterDotAppearsOnlyWithNoise) {
    auto count_dot_pixels = [](const Image& f) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < f.pixels.size(); i += 3) {
            if (f.pixels[i] == 100) ++n;
        }
        return n;
    };

    TempDir noisy;
    SynthConfig cfg = small_config();
    cfg.num_classes = 2;
    cfg.videos_per_class = 1;
    scfa::gen_synthetic_dataset(cfg, noisy.path());
    std::size_t max_dot = 0;
    for (const auto& v : scfa::load_dataset(noisy.path() / "manifest.csv")) {
        for (const auto& f : v.frames) max_dot = std::max(max_dot, count_dot_pixels(f));
    }
    EXPECT_GE(max_dot, 8u) << "dot should cover most of its 13-pixel disc in some frame";
    EXPECT_LE(max_dot, 13u);

    TempDir clean;
    cfg.noise = 0.0;
    scfa::gen_synthetic_dataset(cfg, clean.path());
    for (const auto& v : scfa::load_dataset(clean.path() / "manifest.csv")) {
        for (const auto& f : v.frames) EXPECT_EQ(count_dot_pixels(f), 0u);
    }
}

// Mean-frame centroids carry class signal above chance, concentrated at
// the sweep-axis level; directions within a pair stay ambiguous by
// construction, which caps this static baseline far below perfect.
TEST(SynthTest, NearestCentroidOnMeanFramesBeatsChance) {
    TempDir tmp;
    SynthConfig cfg = small_config();
    // Full benchmark scale: smaller renders shrink the subject into the
    // noise, and partial sweeps blur the axis bands.
    cfg.frame_h = 32;
    cfg.frame_w = 32;
    cfg.frames = 32;
    cfg.videos_per_class = 50;
    scfa::gen_synthetic_dataset(cfg, tmp.path());
    const auto videos = scfa::load_dataset(tmp.path() / "manifest.csv");

    const std::size_t dim = cfg.frame_h * cfg.frame_w;
    auto mean_frame = [&](const FrameSequence& v) {
        std::vector<double> m(dim, 0.0);
        for (const auto& f : v.frames) {
            for (std::size_t i = 0; i < dim; ++i) {
                m[i] += f.pixels[i * 3];  // grayscale content, channel 0 suffices
            }
        }
        for (double& x : m) x /= static_cast<double>(v.frames.size());
        return m;
    };

    // First half of each class forms the centroid, second half is scored.
    std::vector<std::vector<double>> centroids(cfg.num_classes, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(cfg.num_classes, 0);
    std::vector<std::pair<std::vector<double>, int>> held_out;
    std::vector<std::size_t> seen(cfg.num_classes, 0);
    for (const auto& v : videos) {
        const auto lbl = static_cast<std::size_t>(v.label);
        const auto m = mean_frame(v);
        if (seen[lbl]++ < cfg.videos_per_class / 2) {
            for (std::size_t i = 0; i < dim; ++i) centroids[lbl][i] += m[i];
            ++counts[lbl];
        } else {
            held_out.emplace_back(m, v.label);
        }
    }
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        for (double& x : centroids[c]) x /= static_cast<double>(counts[c]);
    }

    std::size_t correct = 0, axis_correct = 0;
    for (const auto& [m, lbl] : held_out) {
        double best = 1e300;
        int arg = -1;
        for (std::size_t c = 0; c < cfg.num_classes; ++c) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = m[i] - centroids[c][i];
                d2 += d * d;
            }
            if (d2 < best) {
                best = d2;
                arg = static_cast<int>(c);
            }
        }
        if (arg == lbl) ++correct;
        if (arg / 2 == lbl / 2) ++axis_correct;
    }
    const double n = static_cast<double>(held_out.size());
    const double acc = static_cast<double>(correct) / n;
    const double axis_acc = static_cast<double>(axis_correct) / n;
    EXPECT_GT(acc, 0.25) << "chance is 0.25";
    EXPECT_LT(acc, 1.0) << "static appearance must not fully separate direction pairs";
    EXPECT_GT(axis_acc, 0.60) << "the static signal lives at the axis level; chance is 0.5";
}

TEST(SynthTest, ValidateRejectsBadConfigs) {
    auto broken = [](auto mutate) {
        SynthConfig cfg;
        mutate(cfg);
        return cfg;
    };
    EXPECT_THROW(broken([](SynthConfig& c) { c.num_classes = 1; }).validate(),
                 std::invalid_argument);
    EXPECT_THROW(broken([](SynthConfig& c) { c.num_classes = 9; }).validate(),
                 std::invalid_argument);
    EXPECT_THROW(broken([](SynthConfig& c) { c.videos_per_class = 0; }).validate(),
                 std::invalid_argument);
    EXPECT_THROW(broken([](SynthConfig& c) { c.frames = 0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](SynthConfig& c) { c.frame_h = 8; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](SynthConfig& c) { c.noise = 1.5; }).validate(), std::invalid_argument);
    EXPECT_NO_THROW(SynthConfig{}.validate());
}

TEST(SynthTest, ShapesRenderWithDistinctMasks) {
    // Rasterized at the same radius, the four shapes cover different pixel
    // sets, so no two classes collapse to the same appearance.
    const long r = 5;
    std::set<std::vector<int>> masks;
    for (int s = 0; s < 4; ++s) {
        std::vector<int> mask;
        for (long dy = -r; dy <= r; ++dy) {
            for (long dx = -r; dx <= r; ++dx) {
                mask.push_back(
                    scfa::detail::in_shape(static_cast<scfa::Shape>(s), dx, dy, r) ? 1 : 0);
            }
        }
        masks.insert(mask);
    }
    EXPECT_EQ(masks.size(), 4u);
}

}  // namespace
