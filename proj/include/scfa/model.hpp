#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scfa/image.hpp"
#include "scfa/loss.hpp"
#include "scfa/rng.hpp"
#include "scfa/tensor.hpp"

namespace scfa {

// All trainable tensors addressable by name. std::map keeps a fixed
// lexicographic order, which pins every deterministic iteration: optimizer
// updates, checkpoint serialization, gradient checks.
using ModelParams = std::map<std::string, Tensor>;

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------
struct EncoderConfig {
    std::size_t canvas_h = 32;
    std::size_t canvas_w = 32;
    std::vector<std::size_t> conv_channels = {8, 16, 32};  // 3x3 kernels, stride 2
    std::size_t projection_hidden = 64;
    std::size_t projection_dim = 128;
    bool two_layer_projection = true;  // false selects the single linear map
    std::size_t num_classes = 4;

    std::size_t feature_dim() const { return conv_channels.back(); }

    // Spatial dims entering each stage; the final entry is the map that
    // global average pooling consumes. Stride 2 with padding 1 halves each
    // axis rounding up, so dimensions never reach zero.
    std::vector<std::pair<std::size_t, std::size_t>> stage_dims() const {
        std::vector<std::pair<std::size_t, std::size_t>> dims;
        std::size_t h = canvas_h, w = canvas_w;
        dims.emplace_back(h, w);
        for (std::size_t s = 0; s < conv_channels.size(); ++s) {
            h = (h - 1) / 2 + 1;
            w = (w - 1) / 2 + 1;
            dims.emplace_back(h, w);
        }
        return dims;
    }

    void validate() const {
        if (canvas_h == 0 || canvas_w == 0) {
            throw std::invalid_argument("EncoderConfig: canvas dimensions must be positive");
        }
        if (conv_channels.empty()) {
            throw std::invalid_argument("EncoderConfig: at least one conv stage required");
        }
        for (std::size_t c : conv_channels) {
            if (c == 0) throw std::invalid_argument("EncoderConfig: conv channels must be positive");
        }
        if (projection_dim == 0) {
            throw std::invalid_argument("EncoderConfig: projection dim must be positive");
        }
        if (two_layer_projection && projection_hidden == 0) {
            throw std::invalid_argument("EncoderConfig: projection hidden dim must be positive");
        }
        if (num_classes < 2) {
            throw std::invalid_argument("EncoderConfig: num_classes must be at least 2");
        }
    }
};

namespace detail {

inline std::string conv_w_name(std::size_t s) { return "conv" + std::to_string(s) + ".weight"; }
inline std::string conv_b_name(std::size_t s) { return "conv" + std::to_string(s) + ".bias"; }

inline const Tensor& param(const ModelParams& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw std::invalid_argument("missing parameter tensor: " + name);
    return it->second;
}

// Gradient accumulation slot, allocated as zeros on first touch.
inline Tensor& grad_slot(ModelParams& grads, const std::string& name,
                         const std::vector<std::size_t>& shape) {
    auto it = grads.find(name);
    if (it == grads.end()) it = grads.emplace(name, Tensor(shape)).first;
    return it->second;
}

}  // namespace detail

// Expected name -> shape table for a configuration; validation and
// checkpoint loading both compare against it.
inline std::map<std::string, std::vector<std::size_t>> param_shapes(const EncoderConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::vector<std::size_t>> shapes;
    std::size_t c_in = 3;
    for (std::size_t s = 0; s < cfg.conv_channels.size(); ++s) {
        const std::size_t c_out = cfg.conv_channels[s];
        shapes[detail::conv_w_name(s)] = {c_out, c_in, 3, 3};
        shapes[detail::conv_b_name(s)] = {c_out};
        c_in = c_out;
    }
    const std::size_t f = cfg.feature_dim();
    if (cfg.two_layer_projection) {
        shapes["proj.w1"] = {cfg.projection_hidden, f};
        shapes["proj.b1"] = {cfg.projection_hidden};
        shapes["proj.w2"] = {cfg.projection_dim, cfg.projection_hidden};
        shapes["proj.b2"] = {cfg.projection_dim};
    } else {
        shapes["proj.w"] = {cfg.projection_dim, f};
        shapes["proj.b"] = {cfg.projection_dim};
    }
    shapes["cls.weight"] = {cfg.num_classes, f};
    shapes["cls.bias"] = {cfg.num_classes};
    return shapes;
}

inline void validate_params(const ModelParams& p, const EncoderConfig& cfg) {
    const auto want = param_shapes(cfg);
    for (const auto& [name, shape] : want) {
        require_shape(detail::param(p, name), shape, "parameter " + name);
        for (double v : p.at(name).data) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("parameter " + name + " contains non-finite values");
            }
        }
    }
    for (const auto& [name, t] : p) {
        (void)t;
        if (!want.count(name)) {
            throw std::invalid_argument("unexpected parameter tensor: " + name);
        }
    }
}

// He-style uniform fan-in initialization for all weight matrices, zero
// biases. Draw order is fixed (conv stages, projection, classifier), so one
// seed reproduces the parameter set bit-exactly.
inline ModelParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto rng = make_rng(mix_seed(seed, 0x6d6f64656cULL));
    auto he_uniform = [&rng](Tensor& t, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& v : t.data) v = dist(rng);
    };

    ModelParams p;
    std::size_t c_in = 3;
    for (std::size_t s = 0; s < cfg.conv_channels.size(); ++s) {
        const std::size_t c_out = cfg.conv_channels[s];
        Tensor w({c_out, c_in, 3, 3});
        he_uniform(w, c_in * 9);
        p[detail::conv_w_name(s)] = std::move(w);
        p[detail::conv_b_name(s)] = Tensor({c_out});
        c_in = c_out;
    }
    const std::size_t f = cfg.feature_dim();
    if (cfg.two_layer_projection) {
        Tensor w1({cfg.projection_hidden, f});
        he_uniform(w1, f);
        Tensor w2({cfg.projection_dim, cfg.projection_hidden});
        he_uniform(w2, cfg.projection_hidden);
        p["proj.w1"] = std::move(w1);
        p["proj.b1"] = Tensor({cfg.projection_hidden});
        p["proj.w2"] = std::move(w2);
        p["proj.b2"] = Tensor({cfg.projection_dim});
    } else {
        Tensor w({cfg.projection_dim, f});
        he_uniform(w, f);
        p["proj.w"] = std::move(w);
        p["proj.b"] = Tensor({cfg.projection_dim});
    }
    Tensor wc({cfg.num_classes, f});
    he_uniform(wc, f);
    p["cls.weight"] = std::move(wc);
    p["cls.bias"] = Tensor({cfg.num_classes});
    return p;
}

// ---------------------------------------------------------------------------
// Input conversion: interleaved 8-bit rasters to a planar [B, 3, H, W]
// tensor scaled to [0, 1].
// ---------------------------------------------------------------------------
inline Tensor images_to_tensor(const std::vector<Image>& images) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const std::size_t h = images[0].height, w = images[0].width;
    Tensor x({images.size(), 3, h, w});
    for (std::size_t b = 0; b < images.size(); ++b) {
        const Image& img = images[b];
        if (img.height != h || img.width != w) {
            throw std::invalid_argument("images_to_tensor: image " + std::to_string(b) +
                                        " has mismatched dimensions");
        }
        for (std::size_t c = 0; c < 3; ++c) {
            double* plane = x.data.data() + ((b * 3 + c) * h) * w;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t xx = 0; xx < w; ++xx) {
                    plane[y * w + xx] = static_cast<double>(img.at(y, xx, c)) / 255.0;
                }
            }
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Layer primitives
// ---------------------------------------------------------------------------
namespace detail {

// 3x3 convolution, stride 2, zero padding 1. x: [B, C_in, H, W].
inline Tensor conv3x3s2_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t B = x.shape[0], CI = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t CO = w.shape[0];
    const std::size_t OH = (H - 1) / 2 + 1, OW = (W - 1) / 2 + 1;
    Tensor out({B, CO, OH, OW});
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t co = 0; co < CO; ++co) {
            double* op = out.data.data() + ((bi * CO + co) * OH) * OW;
            const double bias = b.data[co];
            for (std::size_t i = 0; i < OH * OW; ++i) op[i] = bias;
            for (std::size_t ci = 0; ci < CI; ++ci) {
                const double* xp = x.data.data() + ((bi * CI + ci) * H) * W;
                const double* wp = w.data.data() + (co * CI + ci) * 9;
                for (std::size_t oy = 0; oy < OH; ++oy) {
                    for (std::size_t ox = 0; ox < OW; ++ox) {
                        double acc = 0.0;
                        for (int ky = 0; ky < 3; ++ky) {
                            const long iy = static_cast<long>(oy) * 2 + ky - 1;
                            if (iy < 0 || iy >= static_cast<long>(H)) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const long ix = static_cast<long>(ox) * 2 + kx - 1;
                                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                acc += wp[ky * 3 + kx] * xp[iy * W + ix];
                            }
                        }
                        op[oy * OW + ox] += acc;
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients and writes the input gradient.
inline Tensor conv3x3s2_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                                 Tensor& gw, Tensor& gb) {
    const std::size_t B = x.shape[0], CI = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t CO = w.shape[0];
    const std::size_t OH = gout.shape[2], OW = gout.shape[3];
    Tensor gx({B, CI, H, W});
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t co = 0; co < CO; ++co) {
            const double* gp = gout.data.data() + ((bi * CO + co) * OH) * OW;
            double bias_acc = 0.0;
            for (std::size_t i = 0; i < OH * OW; ++i) bias_acc += gp[i];
            gb.data[co] += bias_acc;
            for (std::size_t ci = 0; ci < CI; ++ci) {
                const double* xp = x.data.data() + ((bi * CI + ci) * H) * W;
                double* gxp = gx.data.data() + ((bi * CI + ci) * H) * W;
                const double* wp = w.data.data() + (co * CI + ci) * 9;
                double* gwp = gw.data.data() + (co * CI + ci) * 9;
                for (std::size_t oy = 0; oy < OH; ++oy) {
                    for (std::size_t ox = 0; ox < OW; ++ox) {
                        const double g = gp[oy * OW + ox];
                        for (int ky = 0; ky < 3; ++ky) {
                            const long iy = static_cast<long>(oy) * 2 + ky - 1;
                            if (iy < 0 || iy >= static_cast<long>(H)) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const long ix = static_cast<long>(ox) * 2 + kx - 1;
                                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                gwp[ky * 3 + kx] += g * xp[iy * W + ix];
                                gxp[iy * W + ix] += g * wp[ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

inline Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

// y = x W^T + b with W stored [out, in]; x: [B, in].
inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t B = x.rows(), I = x.cols(), O = w.shape[0];
    require_shape(w, {O, I}, "affine weight");
    Tensor y({B, O});
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t o = 0; o < O; ++o) {
            double acc = b.data[o];
            const double* wp = w.data.data() + o * I;
            const double* xp = x.data.data() + bi * I;
            for (std::size_t i = 0; i < I; ++i) acc += wp[i] * xp[i];
            y.at(bi, o) = acc;
        }
    }
    return y;
}

// Accumulates gw/gb, returns the gradient at x.
inline Tensor affine_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor& gw,
                              Tensor& gb) {
    const std::size_t B = x.rows(), I = x.cols(), O = w.shape[0];
    Tensor gx({B, I});
    for (std::size_t bi = 0; bi < B; ++bi) {
        const double* xp = x.data.data() + bi * I;
        double* gxp = gx.data.data() + bi * I;
        for (std::size_t o = 0; o < O; ++o) {
            const double g = gy.at(bi, o);
            gb.data[o] += g;
            const double* wp = w.data.data() + o * I;
            double* gwp = gw.data.data() + o * I;
            for (std::size_t i = 0; i < I; ++i) {
                gwp[i] += g * xp[i];
                gxp[i] += g * wp[i];
            }
        }
    }
    return gx;
}

}  // namespace detail

// Mean over the spatial axes of a [B, C, H, W] activation map.
inline Tensor global_average_pool(const Tensor& act) {
    if (act.rank() != 4) throw std::invalid_argument("global_average_pool: expected rank-4 input");
    const std::size_t B = act.shape[0], C = act.shape[1], HW = act.shape[2] * act.shape[3];
    Tensor out({B, C});
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* p = act.data.data() + (b * C + c) * HW;
            double acc = 0.0;
            for (std::size_t i = 0; i < HW; ++i) acc += p[i];
            out.at(b, c) = acc * inv;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward passes. The cache captures every activation backward needs; a
// null cache runs inference only.
// ---------------------------------------------------------------------------
struct ForwardCache {
    std::vector<Tensor> stage_in;   // input to each conv stage
    std::vector<Tensor> stage_pre;  // stage output before ReLU
    Tensor features;                // post-pooling feature rows
    Tensor proj_pre_hidden;         // hidden rows before ReLU (two-layer only)
    Tensor proj_hidden;             // hidden rows after ReLU
    bool encoder_ready = false;
    bool projection_ready = false;
};

inline Tensor encoder_forward(const Tensor& x, const ModelParams& p, const EncoderConfig& cfg,
                              ForwardCache* cache = nullptr) {
    cfg.validate();
    if (x.rank() != 4 || x.shape[1] != 3 || x.shape[2] != cfg.canvas_h ||
        x.shape[3] != cfg.canvas_w) {
        throw std::invalid_argument("encoder_forward: expected input shape (Bx3x" +
                                    std::to_string(cfg.canvas_h) + "x" +
                                    std::to_string(cfg.canvas_w) + "), found " +
                                    shape_string(x.shape));
    }
    Tensor cur = x;
    for (std::size_t s = 0; s < cfg.conv_channels.size(); ++s) {
        const Tensor& w = detail::param(p, detail::conv_w_name(s));
        const Tensor& b = detail::param(p, detail::conv_b_name(s));
        Tensor pre = detail::conv3x3s2_forward(cur, w, b);
        if (cache) {
            cache->stage_in.push_back(std::move(cur));
            cache->stage_pre.push_back(pre);
        }
        cur = detail::relu(pre);
    }
    Tensor r = global_average_pool(cur);
    if (cache) {
        cache->features = r;
        cache->encoder_ready = true;
    }
    return r;
}

// Projection output before row normalization; this is the tensor the
// contrastive gradient is taken with respect to.
inline Tensor projection_raw(const Tensor& r, const ModelParams& p, const EncoderConfig& cfg,
                             ForwardCache* cache = nullptr) {
    require_shape(r, {r.rows(), cfg.feature_dim()}, "projection input");
    if (cfg.two_layer_projection) {
        Tensor pre = detail::affine(r, detail::param(p, "proj.w1"), detail::param(p, "proj.b1"));
        Tensor h = detail::relu(pre);
        Tensor u = detail::affine(h, detail::param(p, "proj.w2"), detail::param(p, "proj.b2"));
        if (cache) {
            cache->proj_pre_hidden = std::move(pre);
            cache->proj_hidden = std::move(h);
            cache->projection_ready = true;
        }
        return u;
    }
    Tensor u = detail::affine(r, detail::param(p, "proj.w"), detail::param(p, "proj.b"));
    if (cache) cache->projection_ready = true;
    return u;
}

inline Tensor projection_forward(const Tensor& r, const ModelParams& p, const EncoderConfig& cfg) {
    return l2_normalize_rows(projection_raw(r, p, cfg));
}

inline Tensor classifier_forward(const Tensor& r, const ModelParams& p, const EncoderConfig& cfg) {
    require_shape(r, {r.rows(), cfg.feature_dim()}, "classifier input");
    return detail::affine(r, detail::param(p, "cls.weight"), detail::param(p, "cls.bias"));
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over class logits, mean reduction.
// ---------------------------------------------------------------------------
struct SoftmaxCE {
    double loss = 0.0;
    Tensor grad_logits;  // same shape as logits, already scaled by 1/B
};

inline SoftmaxCE softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t B = logits.rows(), K = logits.cols();
    if (labels.size() != B) {
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    }
    SoftmaxCE out;
    out.grad_logits = Tensor({B, K});
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= K) {
            throw std::invalid_argument("softmax_cross_entropy: label " +
                                        std::to_string(labels[b]) + " outside [0, " +
                                        std::to_string(K) + ")");
        }
        double m = logits.at(b, 0);
        for (std::size_t k = 1; k < K; ++k) m = std::max(m, logits.at(b, k));
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += std::exp(logits.at(b, k) - m);
        const double lse = m + std::log(denom);
        out.loss += (lse - logits.at(b, static_cast<std::size_t>(labels[b]))) * inv_b;
        for (std::size_t k = 0; k < K; ++k) {
            const double soft = std::exp(logits.at(b, k) - lse);
            out.grad_logits.at(b, k) =
                (soft - (k == static_cast<std::size_t>(labels[b]) ? 1.0 : 0.0)) * inv_b;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward passes. Parameter gradients accumulate into `grads`, so the two
// sibling views of a dual batch sum into one gradient per shared tensor.
// ---------------------------------------------------------------------------
inline Tensor projection_backward(const Tensor& grad_u, const ForwardCache& cache,
                                  const ModelParams& p, const EncoderConfig& cfg,
                                  ModelParams& grads) {
    if (!cache.projection_ready || !cache.encoder_ready) {
        throw std::logic_error("projection_backward: forward cache missing");
    }
    if (cfg.two_layer_projection) {
        const Tensor& w2 = detail::param(p, "proj.w2");
        Tensor gh = detail::affine_backward(
            cache.proj_hidden, w2, grad_u, detail::grad_slot(grads, "proj.w2", w2.shape),
            detail::grad_slot(grads, "proj.b2", {cfg.projection_dim}));
        for (std::size_t i = 0; i < gh.size(); ++i) {
            if (cache.proj_pre_hidden.data[i] <= 0.0) gh.data[i] = 0.0;
        }
        const Tensor& w1 = detail::param(p, "proj.w1");
        return detail::affine_backward(cache.features, w1, gh,
                                       detail::grad_slot(grads, "proj.w1", w1.shape),
                                       detail::grad_slot(grads, "proj.b1", {cfg.projection_hidden}));
    }
    const Tensor& w = detail::param(p, "proj.w");
    return detail::affine_backward(cache.features, w, grad_u,
                                   detail::grad_slot(grads, "proj.w", w.shape),
                                   detail::grad_slot(grads, "proj.b", {cfg.projection_dim}));
}

inline Tensor classifier_backward(const Tensor& grad_logits, const Tensor& features,
                                  const ModelParams& p, const EncoderConfig& cfg,
                                  ModelParams& grads) {
    const Tensor& w = detail::param(p, "cls.weight");
    return detail::affine_backward(features, w, grad_logits,
                                   detail::grad_slot(grads, "cls.weight", w.shape),
                                   detail::grad_slot(grads, "cls.bias", {cfg.num_classes}));
}

inline Tensor encoder_backward(const Tensor& grad_r, const ForwardCache& cache,
                               const ModelParams& p, const EncoderConfig& cfg,
                               ModelParams& grads) {
    if (!cache.encoder_ready) throw std::logic_error("encoder_backward: forward cache missing");
    const Tensor& last_pre = cache.stage_pre.back();
    const std::size_t H = last_pre.shape[2], W = last_pre.shape[3];

    // pooling spreads each feature gradient evenly over the spatial cells
    Tensor grad_act({last_pre.shape[0], last_pre.shape[1], H, W});
    const double inv = 1.0 / static_cast<double>(H * W);
    for (std::size_t b = 0; b < grad_act.shape[0]; ++b) {
        for (std::size_t c = 0; c < grad_act.shape[1]; ++c) {
            const double g = grad_r.at(b, c) * inv;
            double* gp = grad_act.data.data() + (b * grad_act.shape[1] + c) * H * W;
            for (std::size_t i = 0; i < H * W; ++i) gp[i] = g;
        }
    }

    for (std::size_t si = cfg.conv_channels.size(); si-- > 0;) {
        const Tensor& pre = cache.stage_pre[si];
        for (std::size_t i = 0; i < grad_act.size(); ++i) {
            if (pre.data[i] <= 0.0) grad_act.data[i] = 0.0;
        }
        const Tensor& w = detail::param(p, detail::conv_w_name(si));
        grad_act = detail::conv3x3s2_backward(
            cache.stage_in[si], w, grad_act, detail::grad_slot(grads, detail::conv_w_name(si), w.shape),
            detail::grad_slot(grads, detail::conv_b_name(si), {cfg.conv_channels[si]}));
    }
    return grad_act;  // gradient at the input pixels
}

// ---------------------------------------------------------------------------
// Dual pathway: both views through one parameter set, outputs interleaved
// into sibling rows 2j / 2j+1.
// ---------------------------------------------------------------------------
struct DualForwardResult {
    EmbeddingBatch batch;  // normalized rows with sibling metadata
    Tensor raw;            // pre-normalization projections, same row order
    ForwardCache cache1, cache2;
};

inline DualForwardResult dual_forward(const Tensor& x1, const Tensor& x2, const ModelParams& p,
                                      const EncoderConfig& cfg, const std::vector<int>& labels,
                                      const std::vector<std::string>& video_ids) {
    if (x1.shape != x2.shape) {
        throw std::invalid_argument("dual_forward: view batches differ in shape (" +
                                    shape_string(x1.shape) + " vs " + shape_string(x2.shape) +
                                    ")");
    }
    const std::size_t n = x1.shape[0];
    if (labels.size() != n || video_ids.size() != n) {
        throw std::invalid_argument("dual_forward: metadata length mismatch");
    }

    DualForwardResult res;
    Tensor r1 = encoder_forward(x1, p, cfg, &res.cache1);
    Tensor u1 = projection_raw(r1, p, cfg, &res.cache1);
    Tensor r2 = encoder_forward(x2, p, cfg, &res.cache2);
    Tensor u2 = projection_raw(r2, p, cfg, &res.cache2);

    const std::size_t d = u1.cols();
    res.raw = Tensor({2 * n, d});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            res.raw.at(2 * j, k) = u1.at(j, k);
            res.raw.at(2 * j + 1, k) = u2.at(j, k);
        }
        res.batch.labels.push_back(labels[j]);
        res.batch.labels.push_back(labels[j]);
        res.batch.video_ids.push_back(video_ids[j]);
        res.batch.video_ids.push_back(video_ids[j]);
        res.batch.view_ids.push_back(0);
        res.batch.view_ids.push_back(1);
    }
    res.batch.z = l2_normalize_rows(res.raw);
    res.batch.validate();
    return res;
}

// Routes the interleaved contrastive gradient back through both views.
inline void dual_backward(const Tensor& grad_raw, const DualForwardResult& fwd,
                          const ModelParams& p, const EncoderConfig& cfg, ModelParams& grads) {
    const std::size_t n = grad_raw.rows() / 2, d = grad_raw.cols();
    Tensor g1({n, d}), g2({n, d});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            g1.at(j, k) = grad_raw.at(2 * j, k);
            g2.at(j, k) = grad_raw.at(2 * j + 1, k);
        }
    }
    Tensor gr1 = projection_backward(g1, fwd.cache1, p, cfg, grads);
    encoder_backward(gr1, fwd.cache1, p, cfg, grads);
    Tensor gr2 = projection_backward(g2, fwd.cache2, p, cfg, grads);
    encoder_backward(gr2, fwd.cache2, p, cfg, grads);
}

// ---------------------------------------------------------------------------
// Full-model gradient check: central finite differences of the contrastive
// objective against the analytic backward pass, over every parameter that
// the objective touches. Returns the max relative error.
// ---------------------------------------------------------------------------
inline double gradcheck_contrastive(const EncoderConfig& cfg, std::size_t n_videos,
                                    std::uint64_t seed, double tau = 0.2, double step = 1e-5) {
    if (n_videos < 2) throw std::invalid_argument("gradcheck_contrastive: need at least 2 videos");
    ModelParams p = init_params(cfg, seed);
    auto rng = make_rng(mix_seed(seed, 0x67636b03ULL));
    std::uniform_real_distribution<double> pix(0.0, 1.0);

    Tensor x1({n_videos, 3, cfg.canvas_h, cfg.canvas_w});
    Tensor x2({n_videos, 3, cfg.canvas_h, cfg.canvas_w});
    for (auto& v : x1.data) v = pix(rng);
    for (auto& v : x2.data) v = pix(rng);

    std::vector<int> labels;
    std::vector<std::string> vids;
    for (std::size_t j = 0; j < n_videos; ++j) {
        labels.push_back(static_cast<int>(j % cfg.num_classes));
        vids.push_back("v" + std::to_string(j));
    }

    auto eval = [&](const ModelParams& q) {
        DualForwardResult f = dual_forward(x1, x2, q, cfg, labels, vids);
        return scfa_loss(f.batch.z, f.batch.labels, f.batch.video_ids, f.batch.view_ids, tau);
    };

    DualForwardResult fwd = dual_forward(x1, x2, p, cfg, labels, vids);
    LossResult lr = scfa_loss_grad(fwd.raw, fwd.batch.labels, fwd.batch.video_ids,
                                   fwd.batch.view_ids, tau);
    ModelParams grads;
    dual_backward(lr.grad, fwd, p, cfg, grads);

    double max_rel = 0.0;
    for (const auto& [name, g] : grads) {
        Tensor& target = p.at(name);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double keep = target.data[i];
            target.data[i] = keep + step;
            const double lp = eval(p);
            target.data[i] = keep - step;
            const double lm = eval(p);
            target.data[i] = keep;
            const double fd = (lp - lm) / (2.0 * step);
            const double rel =
                std::abs(fd - g.data[i]) / std::max({std::abs(fd), std::abs(g.data[i]), 1e-6});
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

}  // namespace scfa
