#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "scfa/model.hpp"
#include "scfa/tensor.hpp"

namespace scfa {

// Checkpoint layout, all integers and floats little-endian:
//   magic "SCFACKPT" (8 bytes), u32 format version, u32 tensor count,
//   then per tensor: u32 name length, name bytes, u32 rank, u64 per dim,
//   row-major f64 payload. Tensors are written in map (name) order, so a
//   parameter set serializes to one exact byte sequence.
inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'F', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw std::runtime_error("truncated checkpoint (" + what + ")");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw std::runtime_error("truncated checkpoint (" + what + ")");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in, const std::string& what) {
    const std::uint64_t bits = get_u64(in, what);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());

    out.write(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape) detail::put_u64(out, d);
        for (double v : t.data) detail::put_f64(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    const std::uint32_t version = detail::get_u32(in, "version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 ": " + path.string());
    }
    const std::uint32_t count = detail::get_u32(in, "tensor count");

    ModelParams params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::get_u32(in, "name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) {
            throw std::runtime_error("truncated checkpoint (tensor name): " + path.string());
        }
        const std::uint32_t rank = detail::get_u32(in, "rank of " + name);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::get_u64(in, "dims of " + name));
        Tensor t(shape);
        for (auto& v : t.data) v = detail::get_f64(in, "payload of " + name);
        params[name] = std::move(t);
    }
    return params;
}

}  // namespace scfa
