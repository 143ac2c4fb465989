#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/image.hpp"

namespace scfa {

// n x m grid of fixed-size cells. The canvas is exactly rows*cell_h by
// cols*cell_w, so cell boundaries partition it with no slack.
struct GridLayout {
    std::size_t rows = 4;
    std::size_t cols = 4;
    std::size_t cell_h = 8;
    std::size_t cell_w = 8;

    std::size_t canvas_h() const { return rows * cell_h; }
    std::size_t canvas_w() const { return cols * cell_w; }
    std::size_t cell_count() const { return rows * cols; }

    void validate() const {
        if (rows == 0 || cols == 0 || cell_h == 0 || cell_w == 0) {
            throw std::invalid_argument("GridLayout: all dimensions must be positive");
        }
    }
};

// A single composite raster holding one temporal sampling of a video:
// sampled frames tiled row-major, unused cells left black.
struct AggregatedImage {
    Image pixels;
    std::string source_video_id;
    std::vector<std::size_t> source_indices;
    int label = 0;
};

// Tiles the resized frames into the canvas left-to-right, top-to-bottom.
// Frame k lands in cell (k / cols, k % cols); cells beyond the last frame
// stay zero.
inline AggregatedImage aggregate_to_grid(const std::vector<Image>& frames,
                                         const GridLayout& layout,
                                         std::string video_id = {},
                                         std::vector<std::size_t> source_indices = {},
                                         int label = 0) {
    layout.validate();
    if (frames.size() > layout.cell_count()) {
        throw std::invalid_argument("aggregate_to_grid: " + std::to_string(frames.size()) +
                                    " frames exceed " + std::to_string(layout.cell_count()) +
                                    " grid cells");
    }

    AggregatedImage agg;
    agg.pixels = Image(layout.canvas_h(), layout.canvas_w(), 0);
    agg.source_video_id = std::move(video_id);
    agg.source_indices = std::move(source_indices);
    agg.label = label;

    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Image& f = frames[k];
        if (f.height != layout.cell_h || f.width != layout.cell_w) {
            throw std::invalid_argument(
                "aggregate_to_grid: frame " + std::to_string(k) + " is " +
                std::to_string(f.height) + "x" + std::to_string(f.width) + ", cell is " +
                std::to_string(layout.cell_h) + "x" + std::to_string(layout.cell_w));
        }
        const std::size_t y0 = (k / layout.cols) * layout.cell_h;
        const std::size_t x0 = (k % layout.cols) * layout.cell_w;
        for (std::size_t y = 0; y < layout.cell_h; ++y) {
            for (std::size_t x = 0; x < layout.cell_w; ++x) {
                for (std::size_t c = 0; c < 3; ++c) {
                    agg.pixels.at(y0 + y, x0 + x, c) = f.at(y, x, c);
                }
            }
        }
    }
    return agg;
}

// Slices cell k back out of a canvas. Inverse of the placement above.
inline Image extract_cell(const Image& canvas, const GridLayout& layout, std::size_t k) {
    layout.validate();
    if (k >= layout.cell_count()) {
        throw std::out_of_range("extract_cell: cell " + std::to_string(k) + " of " +
                                std::to_string(layout.cell_count()));
    }
    if (canvas.height != layout.canvas_h() || canvas.width != layout.canvas_w()) {
        throw std::invalid_argument("extract_cell: canvas does not match layout");
    }
    Image cell(layout.cell_h, layout.cell_w);
    const std::size_t y0 = (k / layout.cols) * layout.cell_h;
    const std::size_t x0 = (k % layout.cols) * layout.cell_w;
    for (std::size_t y = 0; y < layout.cell_h; ++y)
        for (std::size_t x = 0; x < layout.cell_w; ++x)
            for (std::size_t c = 0; c < 3; ++c) cell.at(y, x, c) = canvas.at(y0 + y, x0 + x, c);
    return cell;
}

}  // namespace scfa
