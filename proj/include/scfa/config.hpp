#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/grid.hpp"
#include "scfa/model.hpp"
#include "scfa/sampling.hpp"

namespace scfa {

// Shortest representation that parses back to the identical double, so a
// serialized config reloads bit-exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// One flat configuration drives training, probing, and fine-tuning. Every
// field has a key=value form; file values override defaults and command-line
// flags override file values.
// ---------------------------------------------------------------------------
struct TrainConfig {
    // paths
    std::string manifest;
    std::string out_dir = "runs/scfa";
    std::string init_checkpoint;

    // view sampling and grid geometry
    std::size_t y = 16;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 4;
    std::size_t cell_h = 8;
    std::size_t cell_w = 8;
    SampleMode sample_mode = SampleMode::without_replacement;

    // model
    std::vector<std::size_t> conv_channels = {8, 16, 32};
    std::size_t projection_hidden = 64;
    std::size_t projection_dim = 128;
    bool two_layer_projection = true;
    std::size_t num_classes = 0;  // 0 infers the count from the dataset

    // optimization
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    double lr = 0.001;
    double lr_min = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double tau = 0.07;

    // evaluation
    std::size_t eval_seeds = 5;
    std::size_t probe_epochs = 300;
    double probe_lr = 0.05;
    std::size_t finetune_epochs = 10;
    double finetune_lr = 0.0005;

    std::uint64_t seed = 42;

    GridLayout layout() const { return GridLayout{grid_rows, grid_cols, cell_h, cell_w}; }

    // Encoder geometry implied by the grid; num_classes must be resolved
    // (nonzero) by the caller when 0 was configured.
    EncoderConfig encoder(std::size_t resolved_classes) const {
        EncoderConfig e;
        e.canvas_h = grid_rows * cell_h;
        e.canvas_w = grid_cols * cell_w;
        e.conv_channels = conv_channels;
        e.projection_hidden = projection_hidden;
        e.projection_dim = projection_dim;
        e.two_layer_projection = two_layer_projection;
        e.num_classes = resolved_classes;
        return e;
    }

    void validate() const {
        layout().validate();
        if (y == 0) throw std::invalid_argument("config: y must be positive");
        if (y > grid_rows * grid_cols) {
            throw std::invalid_argument("config: y exceeds grid cell count (" +
                                        std::to_string(grid_rows * grid_cols) + ")");
        }
        if (batch_size < 2) {
            throw std::invalid_argument("config: batch_size must be at least 2");
        }
        if (epochs == 0) throw std::invalid_argument("config: epochs must be at least 1");
        if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
        if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
        if (lr_min < 0.0 || lr_min > lr) {
            throw std::invalid_argument("config: lr_min must lie in [0, lr]");
        }
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw std::invalid_argument("config: Adam betas must lie in [0, 1)");
        }
        if (adam_eps <= 0.0) throw std::invalid_argument("config: adam_eps must be positive");
        if (eval_seeds < 3) {
            throw std::invalid_argument("config: eval_seeds must be at least 3");
        }
        if (num_classes == 1) {
            throw std::invalid_argument("config: num_classes must be 0 (infer) or >= 2");
        }
        if (conv_channels.empty()) {
            throw std::invalid_argument("config: conv_channels must not be empty");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw std::invalid_argument("config: invalid value for " + key + ": " + v);
    }
    return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw std::invalid_argument("config: invalid value for " + key + ": " + v);
    }
    return out;
}

inline double parse_dbl(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: invalid value for " + key + ": " + v);
    }
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
    if (out.empty()) throw std::invalid_argument("config: invalid value for " + key + ": " + v);
    return out;
}

inline std::string size_list_string(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

}  // namespace detail

// Applies one key=value assignment; unknown keys and malformed values are
// rejected so a typo cannot silently fall back to a default.
inline void apply_config_kv(TrainConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_dbl;
    using detail::parse_size;
    if (key == "manifest") c.manifest = value;
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "init_checkpoint") c.init_checkpoint = value;
    else if (key == "y") c.y = parse_size(key, value);
    else if (key == "grid_rows") c.grid_rows = parse_size(key, value);
    else if (key == "grid_cols") c.grid_cols = parse_size(key, value);
    else if (key == "cell_h") c.cell_h = parse_size(key, value);
    else if (key == "cell_w") c.cell_w = parse_size(key, value);
    else if (key == "sample_mode") c.sample_mode = sample_mode_from_string(value);
    else if (key == "conv_channels") c.conv_channels = detail::parse_size_list(key, value);
    else if (key == "projection_hidden") c.projection_hidden = parse_size(key, value);
    else if (key == "projection_dim") c.projection_dim = parse_size(key, value);
    else if (key == "projection") {
        if (value == "mlp") c.two_layer_projection = true;
        else if (value == "linear") c.two_layer_projection = false;
        else throw std::invalid_argument("config: invalid value for projection: " + value);
    } else if (key == "num_classes") c.num_classes = parse_size(key, value);
    else if (key == "batch_size") c.batch_size = parse_size(key, value);
    else if (key == "epochs") c.epochs = parse_size(key, value);
    else if (key == "lr") c.lr = parse_dbl(key, value);
    else if (key == "lr_min") c.lr_min = parse_dbl(key, value);
    else if (key == "beta1") c.beta1 = parse_dbl(key, value);
    else if (key == "beta2") c.beta2 = parse_dbl(key, value);
    else if (key == "adam_eps") c.adam_eps = parse_dbl(key, value);
    else if (key == "tau") c.tau = parse_dbl(key, value);
    else if (key == "eval_seeds") c.eval_seeds = parse_size(key, value);
    else if (key == "probe_epochs") c.probe_epochs = parse_size(key, value);
    else if (key == "probe_lr") c.probe_lr = parse_dbl(key, value);
    else if (key == "finetune_epochs") c.finetune_epochs = parse_size(key, value);
    else if (key == "finetune_lr") c.finetune_lr = parse_dbl(key, value);
    else if (key == "seed") c.seed = detail::parse_u64(key, value);
    else throw std::invalid_argument("config: unknown key: " + key);
}

// Full key=value listing in fixed order; reloading it reproduces the
// configuration exactly, which is what the effective-config echo relies on.
inline std::string serialize_config(const TrainConfig& c) {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("manifest", c.manifest);
    kv("out_dir", c.out_dir);
    kv("init_checkpoint", c.init_checkpoint);
    kv("y", std::to_string(c.y));
    kv("grid_rows", std::to_string(c.grid_rows));
    kv("grid_cols", std::to_string(c.grid_cols));
    kv("cell_h", std::to_string(c.cell_h));
    kv("cell_w", std::to_string(c.cell_w));
    kv("sample_mode", to_string(c.sample_mode));
    kv("conv_channels", detail::size_list_string(c.conv_channels));
    kv("projection_hidden", std::to_string(c.projection_hidden));
    kv("projection_dim", std::to_string(c.projection_dim));
    kv("projection", c.two_layer_projection ? "mlp" : "linear");
    kv("num_classes", std::to_string(c.num_classes));
    kv("batch_size", std::to_string(c.batch_size));
    kv("epochs", std::to_string(c.epochs));
    kv("lr", format_double(c.lr));
    kv("lr_min", format_double(c.lr_min));
    kv("beta1", format_double(c.beta1));
    kv("beta2", format_double(c.beta2));
    kv("adam_eps", format_double(c.adam_eps));
    kv("tau", format_double(c.tau));
    kv("eval_seeds", std::to_string(c.eval_seeds));
    kv("probe_epochs", std::to_string(c.probe_epochs));
    kv("probe_lr", format_double(c.probe_lr));
    kv("finetune_epochs", std::to_string(c.finetune_epochs));
    kv("finetune_lr", format_double(c.finetune_lr));
    kv("seed", std::to_string(c.seed));
    return s;
}

// Reads key=value lines into `c`. Blank lines and full-line # comments are
// skipped; errors carry the file name and line number.
inline void apply_config_file(TrainConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                        ": expected key=value, found: " + t);
        }
        try {
            apply_config_kv(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " +
                                        e.what());
        }
    }
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
    TrainConfig c;
    apply_config_file(c, path);
    return c;
}

}  // namespace scfa
