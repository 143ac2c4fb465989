#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/image.hpp"

namespace scfa {

// An ordered sequence of equally sized frames plus its class label.
struct FrameSequence {
    std::vector<Image> frames;
    int label = 0;
    std::string video_id;

    std::size_t frame_count() const { return frames.size(); }
};

namespace detail {
inline bool numeric_stem(const std::string& stem, long& value) {
    if (stem.empty()) return false;
    for (char c : stem)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    value = std::stol(stem);
    return true;
}
}  // namespace detail

// Loads every frame raster in a directory, ordered by numeric filename
// (0000.ppm, 0001.ppm, ...). All frames must share one resolution.
inline FrameSequence load_frame_sequence(const std::filesystem::path& dir, int label,
                                         std::string video_id = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("frame directory not found: " + dir.string());
    }

    std::vector<std::pair<long, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() != ".ppm") continue;
        long idx = 0;
        if (!detail::numeric_stem(entry.path().stem().string(), idx)) continue;
        files.emplace_back(idx, entry.path());
    }
    if (files.empty()) {
        throw std::runtime_error("no frame files (NNNN.ppm) in directory: " + dir.string());
    }
    std::sort(files.begin(), files.end());

    FrameSequence seq;
    seq.label = label;
    seq.video_id = video_id.empty() ? dir.filename().string() : std::move(video_id);
    seq.frames.reserve(files.size());
    for (const auto& [idx, path] : files) {
        Image img = read_ppm(path);
        if (!seq.frames.empty() && (img.height != seq.frames.front().height ||
                                    img.width != seq.frames.front().width)) {
            throw std::runtime_error("frame dimension mismatch in " + path.string() + ": " +
                                     std::to_string(img.height) + "x" + std::to_string(img.width) +
                                     " vs " + std::to_string(seq.frames.front().height) + "x" +
                                     std::to_string(seq.frames.front().width));
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

// One manifest row: frame directory (relative to the manifest), label, id.
struct ManifestEntry {
    std::string path;
    int label = 0;
    std::string video_id;
};

// Manifest format: one comma-separated line per video, "path,label,video_id".
// Blank lines and '#' comments are skipped.
inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ManifestEntry e;
        std::string label_str;
        if (!std::getline(ss, e.path, ',') || !std::getline(ss, label_str, ',') ||
            !std::getline(ss, e.video_id)) {
            throw std::runtime_error("malformed manifest line " + std::to_string(line_no) + " in " +
                                     manifest_path.string() + ": " + line);
        }
        e.label = std::stoi(label_str);
        if (e.label < 0) {
            throw std::runtime_error("negative label at manifest line " + std::to_string(line_no));
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) {
        throw std::runtime_error("manifest has no entries: " + manifest_path.string());
    }
    return entries;
}

inline void write_manifest(const std::filesystem::path& manifest_path,
                           const std::vector<ManifestEntry>& entries) {
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path.string());
    for (const auto& e : entries) out << e.path << "," << e.label << "," << e.video_id << "\n";
}

// Loads every video named by a manifest into memory. Paths resolve relative
// to the manifest's own directory.
inline std::vector<FrameSequence> load_dataset(const std::filesystem::path& manifest_path) {
    const auto base = manifest_path.parent_path();
    std::vector<FrameSequence> videos;
    for (const auto& e : load_manifest(manifest_path)) {
        std::filesystem::path dir(e.path);
        if (dir.is_relative()) dir = base / dir;
        videos.push_back(load_frame_sequence(dir, e.label, e.video_id));
    }
    return videos;
}

inline std::size_t num_classes_in(const std::vector<FrameSequence>& videos) {
    int max_label = -1;
    for (const auto& v : videos) max_label = std::max(max_label, v.label);
    return static_cast<std::size_t>(max_label + 1);
}

}  // namespace scfa
