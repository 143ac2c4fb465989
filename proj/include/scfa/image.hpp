#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfa {

// 8-bit RGB raster, interleaved row-major (y, x, channel).
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::uint8_t fill = 0)
        : height(h), width(w), pixels(h * w * 3, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }

    bool empty() const { return pixels.empty(); }

    bool operator==(const Image& o) const {
        return height == o.height && width == o.width && pixels == o.pixels;
    }
};

// ---------------------------------------------------------------------------
// Lossless raster I/O. Frames are stored as binary PPM (P6, maxval 255):
// trivially lossless, bit-exact on round trip, and dependency free.
// ---------------------------------------------------------------------------

namespace detail {
inline int ppm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment runs to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) return 0;
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok.empty() ? EOF : 0;
}
}  // namespace detail

inline Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open raster file: " + path.string());

    std::string tok;
    auto next = [&](const char* what) {
        if (detail::ppm_next_token(in, tok) == EOF) {
            throw std::runtime_error("truncated PPM header (" + std::string(what) + "): " +
                                     path.string());
        }
        return tok;
    };
    if (next("magic") != "P6") {
        throw std::runtime_error("not a binary PPM (P6) file: " + path.string());
    }
    const long w = std::stol(next("width"));
    const long h = std::stol(next("height"));
    const long maxval = std::stol(next("maxval"));
    if (w <= 0 || h <= 0) throw std::runtime_error("invalid PPM dimensions: " + path.string());
    if (maxval != 255) {
        throw std::runtime_error("unsupported PPM maxval (want 255): " + path.string());
    }

    Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw std::runtime_error("truncated PPM pixel data: " + path.string());
    }
    return img;
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) throw std::invalid_argument("write_ppm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write raster file: " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Bilinear resize, half-pixel-center convention with edge clamping. Channel
// values round half-up back to 8 bit, so the mapping is bit-exact and an
// identity resize returns an identical image.
// ---------------------------------------------------------------------------
inline Image resize_frame(const Image& src, std::size_t out_h, std::size_t out_w) {
    if (src.empty()) throw std::invalid_argument("resize_frame: empty source frame");
    if (out_h == 0 || out_w == 0) {
        throw std::invalid_argument("resize_frame: target dimensions must be positive");
    }

    Image dst(out_h, out_w);
    const double sy_scale = static_cast<double>(src.height) / static_cast<double>(out_h);
    const double sx_scale = static_cast<double>(src.width) / static_cast<double>(out_w);

    for (std::size_t oy = 0; oy < out_h; ++oy) {
        double sy = (static_cast<double>(oy) + 0.5) * sy_scale - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(src.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double fy = sy - static_cast<double>(y0);

        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double sx = (static_cast<double>(ox) + 0.5) * sx_scale - 0.5;
            sx = std::min(std::max(sx, 0.0), static_cast<double>(src.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double fx = sx - static_cast<double>(x0);

            for (std::size_t c = 0; c < 3; ++c) {
                const double v = (1.0 - fy) * (1.0 - fx) * src.at(y0, x0, c) +
                                 (1.0 - fy) * fx * src.at(y0, x1, c) +
                                 fy * (1.0 - fx) * src.at(y1, x0, c) +
                                 fy * fx * src.at(y1, x1, c);
                dst.at(oy, ox, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
            }
        }
    }
    return dst;
}

// Side-by-side composition with a separator gap, used by the montage command.
inline Image hstack(const Image& a, const Image& b, std::size_t gap = 2,
                    std::uint8_t gap_value = 255) {
    if (a.height != b.height) throw std::invalid_argument("hstack: height mismatch");
    Image out(a.height, a.width + gap + b.width, gap_value);
    for (std::size_t y = 0; y < a.height; ++y) {
        for (std::size_t x = 0; x < a.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = a.at(y, x, c);
        for (std::size_t x = 0; x < b.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(y, a.width + gap + x, c) = b.at(y, x, c);
    }
    return out;
}

}  // namespace scfa
