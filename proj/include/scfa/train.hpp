#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/checkpoint.hpp"
#include "scfa/config.hpp"
#include "scfa/dataset.hpp"
#include "scfa/grid.hpp"
#include "scfa/loss.hpp"
#include "scfa/model.hpp"
#include "scfa/optim.hpp"
#include "scfa/rng.hpp"
#include "scfa/sampling.hpp"

namespace scfa {

// ---------------------------------------------------------------------------
// In-memory dataset. Frames are resized to the grid cell once at load; a
// view is then assembled by sampling cell images and tiling them.
// ---------------------------------------------------------------------------
struct LoadedVideo {
    std::string video_id;
    int label = 0;
    std::size_t frame_count = 0;  // T of the source sequence
    std::vector<Image> cells;     // frames pre-resized to cell dims
};

struct TrainDataset {
    std::vector<LoadedVideo> videos;
    std::size_t num_classes = 0;
};

inline TrainDataset load_train_dataset(const std::filesystem::path& manifest,
                                       const GridLayout& layout) {
    layout.validate();
    TrainDataset ds;
    for (FrameSequence& seq : load_dataset(manifest)) {
        LoadedVideo v;
        v.video_id = seq.video_id;
        v.label = seq.label;
        v.frame_count = seq.frame_count();
        v.cells.reserve(seq.frames.size());
        for (const Image& f : seq.frames) v.cells.push_back(resize_frame(f, layout.cell_h, layout.cell_w));
        ds.videos.push_back(std::move(v));
    }
    if (ds.videos.empty()) throw std::runtime_error("dataset is empty: " + manifest.string());
    int max_label = 0;
    for (const auto& v : ds.videos) {
        if (v.label < 0) throw std::runtime_error("negative label for video " + v.video_id);
        max_label = std::max(max_label, v.label);
    }
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

// One temporal view: sample frame indices, tile the matching cells.
inline AggregatedImage aggregate_view(const LoadedVideo& video, const GridLayout& layout,
                                      const SamplingPlan& plan, std::uint64_t draw_id) {
    const std::vector<std::size_t> idx = sample_indices(video.frame_count, plan, draw_id);
    std::vector<Image> frames;
    frames.reserve(idx.size());
    for (std::size_t i : idx) frames.push_back(video.cells[i]);
    return aggregate_to_grid(frames, layout, video.video_id, idx, video.label);
}

// ---------------------------------------------------------------------------
// Dual-view batches. Sampling seeds derive from (run seed, epoch, step,
// video id) with the view index as the draw id, so the full batch stream
// is a pure function of the configuration.
// ---------------------------------------------------------------------------
struct DualImageBatch {
    std::vector<Image> x1, x2;
    std::vector<int> labels;
    std::vector<std::string> video_ids;
};

inline DualImageBatch build_dual_batch(const TrainDataset& ds,
                                       const std::vector<std::size_t>& video_indices,
                                       const TrainConfig& cfg, std::uint64_t epoch,
                                       std::uint64_t step) {
    const GridLayout layout = cfg.layout();
    DualImageBatch batch;
    for (std::size_t vi : video_indices) {
        const LoadedVideo& video = ds.videos[vi];
        SamplingPlan plan;
        plan.y = cfg.y;
        plan.mode = cfg.sample_mode;
        plan.seed = mix_seed(cfg.seed, mix_seed(epoch, step), hash_string(video.video_id));
        batch.x1.push_back(aggregate_view(video, layout, plan, 0).pixels);
        batch.x2.push_back(aggregate_view(video, layout, plan, 1).pixels);
        batch.labels.push_back(video.label);
        batch.video_ids.push_back(video.video_id);
    }
    return batch;
}

namespace detail {

// Per-epoch video order, then contiguous chunks of batch_size. A trailing
// single video is merged into the previous chunk so every batch holds at
// least one negative video.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_videos,
                                                           std::size_t batch_size,
                                                           std::uint64_t seed,
                                                           std::uint64_t epoch) {
    std::vector<std::size_t> order(n_videos);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(mix_seed(seed, 0x6f72646572ULL, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n_videos; i += batch_size) {
        const std::size_t end = std::min(i + batch_size, n_videos);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back()[0]);
        batches.pop_back();
    }
    return batches;
}

inline double grad_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Contrastive pre-training
// ---------------------------------------------------------------------------
struct TrainResult {
    std::vector<double> epoch_losses;
    double best_loss = 0.0;
    std::size_t best_epoch = 0;  // 1-based
    std::filesystem::path final_checkpoint;
    std::filesystem::path best_checkpoint;
    std::filesystem::path metrics_path;
};

inline TrainResult train_contrastive(const TrainConfig& cfg, const TrainDataset& ds) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (ds.videos.size() < 2) {
        throw std::invalid_argument("training requires at least 2 videos, found " +
                                    std::to_string(ds.videos.size()));
    }
    if (cfg.batch_size > ds.videos.size()) {
        throw std::invalid_argument("batch_size " + std::to_string(cfg.batch_size) +
                                    " exceeds dataset size " + std::to_string(ds.videos.size()));
    }
    const std::size_t classes = cfg.num_classes ? cfg.num_classes : ds.num_classes;
    const EncoderConfig enc = cfg.encoder(classes);
    enc.validate();

    ModelParams params;
    if (!cfg.init_checkpoint.empty()) {
        params = load_checkpoint(cfg.init_checkpoint);
        validate_params(params, enc);
    } else {
        params = init_params(enc, mix_seed(cfg.seed, 0x696e6974ULL));
    }

    fs::create_directories(cfg.out_dir);
    TrainResult result;
    result.final_checkpoint = fs::path(cfg.out_dir) / "final.ckpt";
    result.best_checkpoint = fs::path(cfg.out_dir) / "best.ckpt";
    result.metrics_path = fs::path(cfg.out_dir) / "metrics.csv";

    std::ofstream metrics(result.metrics_path);
    if (!metrics) {
        throw std::runtime_error("cannot write metrics file: " + result.metrics_path.string());
    }
    metrics << "epoch,mean_loss,lr\n";

    AdamState adam;
    AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.adam_eps};
    ModelParams best_params = params;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, global_step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr, cfg.lr_min);
        const auto batches = detail::epoch_batches(ds.videos.size(), cfg.batch_size, cfg.seed, epoch);

        double loss_sum = 0.0;
        for (std::size_t step = 0; step < batches.size(); ++step) {
            DualImageBatch b = build_dual_batch(ds, batches[step], cfg, epoch, step);
            DualForwardResult fwd = dual_forward(images_to_tensor(b.x1), images_to_tensor(b.x2),
                                                 params, enc, b.labels, b.video_ids);
            LossResult lres = scfa_loss_grad(fwd.raw, fwd.batch.labels, fwd.batch.video_ids,
                                             fwd.batch.view_ids, cfg.tau);
            ModelParams grads;
            dual_backward(lres.grad, fwd, params, enc, grads);

            bool finite = std::isfinite(lres.value);
            for (const auto& [name, g] : grads) {
                (void)name;
                for (double v : g.data) {
                    if (!std::isfinite(v)) {
                        finite = false;
                        break;
                    }
                }
            }
            if (!finite) {
                std::string diag = "non-finite loss or gradient at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step) +
                                   "; grad norms:";
                for (const auto& [name, g] : grads) {
                    diag += " " + name + "=" + format_double(detail::grad_norm(g));
                }
                throw std::runtime_error(diag);
            }

            adam_step(params, grads, adam, ++global_step, lr, adam_cfg);
            loss_sum += lres.value;
        }

        const double mean_loss = loss_sum / static_cast<double>(batches.size());
        result.epoch_losses.push_back(mean_loss);
        metrics << epoch << "," << format_double(mean_loss) << "," << format_double(lr) << "\n";
        metrics.flush();

        if (mean_loss < best_loss) {
            best_loss = mean_loss;
            best_epoch = epoch;
            best_params = params;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "epoch " << epoch << "/" << cfg.epochs << " mean_loss="
                  << format_double(mean_loss) << " lr=" << format_double(lr) << " ("
                  << format_double(secs) << "s)\n";
    }

    save_checkpoint(result.final_checkpoint, params);
    save_checkpoint(result.best_checkpoint, best_params);
    result.best_loss = best_loss;
    result.best_epoch = best_epoch;
    return result;
}

inline TrainResult train_contrastive(const TrainConfig& cfg) {
    if (cfg.manifest.empty()) throw std::invalid_argument("config: manifest path not set");
    return train_contrastive(cfg, load_train_dataset(cfg.manifest, cfg.layout()));
}

// ---------------------------------------------------------------------------
// Evaluation: linear probe and softmax fine-tuning
// ---------------------------------------------------------------------------
struct EvalResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_seed;
};

namespace detail {

inline EvalResult summarize(std::vector<double> accs) {
    EvalResult r;
    r.per_seed = std::move(accs);
    for (double a : r.per_seed) r.mean += a;
    r.mean /= static_cast<double>(r.per_seed.size());
    if (r.per_seed.size() > 1) {
        double ss = 0.0;
        for (double a : r.per_seed) ss += (a - r.mean) * (a - r.mean);
        r.stddev = std::sqrt(ss / static_cast<double>(r.per_seed.size() - 1));
    }
    return r;
}

// Stratified 80/20 split over video indices. Every class keeps at least
// one video on each side; a class too small to split is a hard error,
// while a bad random draw (possible only if labels arrive unstratified)
// is re-drawn with a diagnostic.
struct Split {
    std::vector<std::size_t> train, test;
};

inline Split stratified_split(const std::vector<int>& labels, std::size_t num_classes,
                              std::uint64_t seed) {
    for (int attempt = 0;; ++attempt) {
        std::vector<std::vector<std::size_t>> by_class(num_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            by_class[static_cast<std::size_t>(labels[i])].push_back(i);
        }
        Split split;
        auto rng = make_rng(mix_seed(seed, 0x73706c6974ULL, static_cast<std::uint64_t>(attempt)));
        for (std::size_t c = 0; c < num_classes; ++c) {
            auto& idx = by_class[c];
            if (idx.size() < 2) {
                throw std::invalid_argument("class " + std::to_string(c) +
                                            " has fewer than 2 videos; cannot split 80/20");
            }
            std::shuffle(idx.begin(), idx.end(), rng);
            std::size_t n_train = (idx.size() * 8 + 5) / 10;  // round(0.8 n)
            n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
            split.train.insert(split.train.end(), idx.begin(),
                               idx.begin() + static_cast<std::ptrdiff_t>(n_train));
            split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                              idx.end());
        }
        std::vector<char> seen(num_classes, 0);
        for (std::size_t i : split.train) seen[static_cast<std::size_t>(labels[i])] = 1;
        bool all = true;
        for (char s : seen) all = all && s;
        if (all) {
            std::sort(split.train.begin(), split.train.end());
            std::sort(split.test.begin(), split.test.end());
            return split;
        }
        std::cerr << "warning: class missing from training split, re-drawing (attempt "
                  << attempt + 1 << ")\n";
    }
}

inline Tensor select_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
    Tensor out({rows.size(), m.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out.at(i, j) = m.at(rows[i], j);
    }
    return out;
}

template <typename T>
inline std::vector<T> select(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

inline double accuracy(const Tensor& logits, const std::vector<int>& labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < logits.cols(); ++k) {
            if (logits.at(i, k) > logits.at(i, arg)) arg = k;
        }
        hits += (static_cast<int>(arg) == labels[i]);
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

// Fresh classifier head trained with full-batch Adam on fixed features.
// Returns the trained head; the caller owns evaluation.
inline ModelParams train_head(const Tensor& feats, const std::vector<int>& labels,
                              const EncoderConfig& enc, const TrainConfig& cfg,
                              std::uint64_t head_seed, std::size_t epochs) {
    ModelParams head;
    {
        ModelParams full = init_params(enc, head_seed);
        head["cls.weight"] = full.at("cls.weight");
        head["cls.bias"] = full.at("cls.bias");
    }
    AdamState adam;
    AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.adam_eps};
    for (std::size_t t = 1; t <= epochs; ++t) {
        Tensor logits = detail::affine(feats, head.at("cls.weight"), head.at("cls.bias"));
        SoftmaxCE ce = softmax_cross_entropy(logits, labels);
        ModelParams grads;
        affine_backward(feats, head.at("cls.weight"), ce.grad_logits,
                        grad_slot(grads, "cls.weight", head.at("cls.weight").shape),
                        grad_slot(grads, "cls.bias", head.at("cls.bias").shape));
        adam_step(head, grads, adam, t, cfg.probe_lr, adam_cfg);
    }
    return head;
}

}  // namespace detail

// Deterministic per-seed feature extraction: one sampled view per video.
inline Tensor extract_features(const ModelParams& params, const EncoderConfig& enc,
                               const TrainDataset& ds, const TrainConfig& cfg,
                               std::uint64_t seed) {
    const GridLayout layout = cfg.layout();
    Tensor feats({ds.videos.size(), enc.feature_dim()});
    std::vector<Image> chunk;
    std::vector<std::size_t> chunk_rows;
    auto flush = [&]() {
        if (chunk.empty()) return;
        Tensor r = encoder_forward(images_to_tensor(chunk), params, enc);
        for (std::size_t i = 0; i < chunk_rows.size(); ++i) {
            for (std::size_t j = 0; j < enc.feature_dim(); ++j) {
                feats.at(chunk_rows[i], j) = r.at(i, j);
            }
        }
        chunk.clear();
        chunk_rows.clear();
    };
    for (std::size_t vi = 0; vi < ds.videos.size(); ++vi) {
        SamplingPlan plan;
        plan.y = cfg.y;
        plan.mode = cfg.sample_mode;
        plan.seed = mix_seed(seed, 0x66656174ULL, hash_string(ds.videos[vi].video_id));
        chunk.push_back(aggregate_view(ds.videos[vi], layout, plan, 0).pixels);
        chunk_rows.push_back(vi);
        if (chunk.size() == 64) flush();
    }
    flush();
    return feats;
}

// Split, train a fresh linear head on frozen features, report held-out
// accuracy. Shared by the probe path and the feature-file path.
inline double probe_features_once(const Tensor& feats, const std::vector<int>& labels,
                                  const EncoderConfig& enc, const TrainConfig& cfg,
                                  std::uint64_t seed) {
    if (feats.rows() != labels.size()) {
        throw std::invalid_argument("probe: feature rows and labels disagree (" +
                                    std::to_string(feats.rows()) + " vs " +
                                    std::to_string(labels.size()) + ")");
    }
    const detail::Split split = detail::stratified_split(labels, enc.num_classes, seed);
    const Tensor train_x = detail::select_rows(feats, split.train);
    const std::vector<int> train_y = detail::select(labels, split.train);
    const ModelParams head = detail::train_head(train_x, train_y, enc, cfg,
                                                mix_seed(seed, 0x636c73ULL), cfg.probe_epochs);
    const Tensor test_x = detail::select_rows(feats, split.test);
    const Tensor logits =
        detail::affine(test_x, head.at("cls.weight"), head.at("cls.bias"));
    return detail::accuracy(logits, detail::select(labels, split.test));
}

inline EvalResult linear_probe(const ModelParams& params, const TrainDataset& ds,
                               const TrainConfig& cfg, std::size_t n_seeds) {
    if (n_seeds < 3) throw std::invalid_argument("probe: need at least 3 seeds");
    const std::size_t classes = cfg.num_classes ? cfg.num_classes : ds.num_classes;
    const EncoderConfig enc = cfg.encoder(classes);
    validate_params(params, enc);

    std::vector<int> labels;
    for (const auto& v : ds.videos) labels.push_back(v.label);

    std::vector<double> accs;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = mix_seed(cfg.seed, 0x70726f6265ULL, s);
        const Tensor feats = extract_features(params, enc, ds, cfg, seed);
        accs.push_back(probe_features_once(feats, labels, enc, cfg, seed));
    }
    return detail::summarize(std::move(accs));
}

// Fine-tuning: same split and head initialization as the probe, but the
// whole network trains. Zero epochs therefore reproduces the zero-epoch
// probe exactly.
inline EvalResult finetune_classifier(const ModelParams& params, const TrainDataset& ds,
                                      const TrainConfig& cfg, std::size_t n_seeds) {
    if (n_seeds < 3) throw std::invalid_argument("finetune: need at least 3 seeds");
    const std::size_t classes = cfg.num_classes ? cfg.num_classes : ds.num_classes;
    const EncoderConfig enc = cfg.encoder(classes);
    validate_params(params, enc);
    const GridLayout layout = cfg.layout();

    std::vector<int> labels;
    for (const auto& v : ds.videos) labels.push_back(v.label);

    std::vector<double> accs;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = mix_seed(cfg.seed, 0x70726f6265ULL, s);
        const detail::Split split = detail::stratified_split(labels, enc.num_classes, seed);

        ModelParams model = params;
        {
            ModelParams fresh = init_params(enc, mix_seed(seed, 0x636c73ULL));
            model["cls.weight"] = fresh.at("cls.weight");
            model["cls.bias"] = fresh.at("cls.bias");
        }

        // one fixed sampled view per video, matching the probe extraction
        std::vector<Image> views(ds.videos.size());
        for (std::size_t vi = 0; vi < ds.videos.size(); ++vi) {
            SamplingPlan plan;
            plan.y = cfg.y;
            plan.mode = cfg.sample_mode;
            plan.seed = mix_seed(seed, 0x66656174ULL, hash_string(ds.videos[vi].video_id));
            views[vi] = aggregate_view(ds.videos[vi], layout, plan, 0).pixels;
        }

        AdamState adam;
        AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.adam_eps};
        std::size_t t = 0;
        for (std::size_t epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
            std::vector<std::size_t> order = split.train;
            auto rng = make_rng(mix_seed(seed, 0x66746f72ULL, epoch));
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
                const std::size_t end = std::min(i + cfg.batch_size, order.size());
                std::vector<Image> xs;
                std::vector<int> ys;
                for (std::size_t k = i; k < end; ++k) {
                    xs.push_back(views[order[k]]);
                    ys.push_back(labels[order[k]]);
                }
                ForwardCache cache;
                Tensor r = encoder_forward(images_to_tensor(xs), model, enc, &cache);
                Tensor logits = classifier_forward(r, model, enc);
                SoftmaxCE ce = softmax_cross_entropy(logits, ys);
                ModelParams grads;
                Tensor gr = classifier_backward(ce.grad_logits, r, model, enc, grads);
                encoder_backward(gr, cache, model, enc, grads);
                adam_step(model, grads, adam, ++t, cfg.finetune_lr, adam_cfg);
            }
        }

        std::vector<Image> test_xs;
        for (std::size_t vi : split.test) test_xs.push_back(views[vi]);
        Tensor r = encoder_forward(images_to_tensor(test_xs), model, enc);
        Tensor logits = classifier_forward(r, model, enc);
        accs.push_back(detail::accuracy(logits, detail::select(labels, split.test)));
    }
    return detail::summarize(std::move(accs));
}

// ---------------------------------------------------------------------------
// Feature files: checkpoint tensor container holding a feature matrix and
// a label row, the exchange point for externally computed backbones.
// ---------------------------------------------------------------------------
inline void export_features(const std::filesystem::path& path, const Tensor& feats,
                            const std::vector<int>& labels) {
    if (feats.rank() != 2 || feats.rows() != labels.size()) {
        throw std::invalid_argument("export_features: need a 2-D matrix with one label per row");
    }
    ModelParams bundle;
    bundle["features"] = feats;
    Tensor lab({labels.size()});
    for (std::size_t i = 0; i < labels.size(); ++i) lab.data[i] = static_cast<double>(labels[i]);
    bundle["labels"] = std::move(lab);
    save_checkpoint(path, bundle);
}

struct FeatureFile {
    Tensor features;
    std::vector<int> labels;
};

// expected_dim 0 skips the width check.
inline FeatureFile import_features(const std::filesystem::path& path,
                                   std::size_t expected_dim = 0) {
    ModelParams bundle = load_checkpoint(path);
    if (!bundle.count("features") || !bundle.count("labels")) {
        throw std::runtime_error("feature file missing features/labels tensors: " + path.string());
    }
    FeatureFile out;
    out.features = bundle.at("features");
    if (out.features.rank() != 2) {
        throw std::runtime_error("feature tensor must be rank 2: " + path.string());
    }
    if (expected_dim != 0 && out.features.cols() != expected_dim) {
        throw std::invalid_argument("feature file " + path.string() + ": expected dim " +
                                    std::to_string(expected_dim) + ", found " +
                                    std::to_string(out.features.cols()));
    }
    const Tensor& lab = bundle.at("labels");
    if (lab.size() != out.features.rows()) {
        throw std::runtime_error("feature file label count mismatch: " + path.string());
    }
    for (double v : lab.data) out.labels.push_back(static_cast<int>(v));
    return out;
}

}  // namespace scfa
