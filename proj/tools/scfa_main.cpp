// Command-line entry point for the full pipeline: dataset generation,
// aggregation, pre-training, evaluation, and the self-check subcommands.
//
// Contract shared by every subcommand:
//   - the resolved configuration is echoed as key=value lines before any work,
//   - failures print one "error: ..." line to stderr,
//   - exit 2 flags configuration or file problems, exit 1 a failed check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "scfa/scfa.hpp"

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Flag plumbing. TrainConfig flags funnel through the same key=value applier
// as config files, so flag semantics and file semantics cannot drift apart.
// Application order: defaults, then the --config file, then flags.
// ---------------------------------------------------------------------------
struct KvFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> kvs;
};

void add_train_flags(CLI::App* sub, KvFlags& kv) {
    sub->add_option("--config", kv.config_path, "key=value config file; flags override it");
    static const std::vector<std::pair<const char*, const char*>> keys = {
        {"manifest", "dataset manifest path"},
        {"out_dir", "directory for run artifacts"},
        {"init_checkpoint", "checkpoint to warm-start training from"},
        {"y", "frames sampled per view"},
        {"grid_rows", "grid rows"},
        {"grid_cols", "grid columns"},
        {"cell_h", "cell height in pixels"},
        {"cell_w", "cell width in pixels"},
        {"sample_mode", "without_replacement or with_replacement"},
        {"conv_channels", "comma-separated conv widths, e.g. 8,16,32"},
        {"projection_hidden", "projection hidden width"},
        {"projection_dim", "projection output dimension"},
        {"projection", "mlp or linear"},
        {"num_classes", "class count; 0 infers from the dataset"},
        {"batch_size", "videos per batch"},
        {"epochs", "training epochs"},
        {"lr", "peak learning rate"},
        {"lr_min", "cosine floor learning rate"},
        {"beta1", "Adam beta1"},
        {"beta2", "Adam beta2"},
        {"adam_eps", "Adam epsilon"},
        {"tau", "contrastive temperature"},
        {"eval_seeds", "evaluation seeds"},
        {"probe_epochs", "linear probe epochs"},
        {"probe_lr", "linear probe learning rate"},
        {"finetune_epochs", "fine-tune epochs"},
        {"finetune_lr", "fine-tune learning rate"},
        {"seed", "master seed for every stochastic component"},
    };
    for (const auto& [key, desc] : keys) {
        sub->add_option_function<std::string>(
               std::string("--") + key,
               [&kv, k = std::string(key)](const std::string& v) { kv.kvs.emplace_back(k, v); },
               desc)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

scfa::TrainConfig resolve_train_config(const KvFlags& kv) {
    scfa::TrainConfig c;
    if (!kv.config_path.empty()) scfa::apply_config_file(c, kv.config_path);
    for (const auto& [k, v] : kv.kvs) scfa::apply_config_kv(c, k, v);
    return c;
}

void echo_config(const scfa::TrainConfig& c) {
    std::cout << "# effective config\n" << scfa::serialize_config(c) << std::flush;
}

// SynthConfig mirrors the same scheme with its own key set.
void apply_synth_kv(scfa::SynthConfig& c, const std::string& key, const std::string& value) {
    using scfa::detail::parse_dbl;
    using scfa::detail::parse_size;
    if (key == "num_classes") c.num_classes = parse_size(key, value);
    else if (key == "videos_per_class") c.videos_per_class = parse_size(key, value);
    else if (key == "frames") c.frames = parse_size(key, value);
    else if (key == "frame_h") c.frame_h = parse_size(key, value);
    else if (key == "frame_w") c.frame_w = parse_size(key, value);
    else if (key == "noise") c.noise = parse_dbl(key, value);
    else if (key == "jitter") c.jitter = parse_size(key, value);
    else if (key == "seed") c.seed = scfa::detail::parse_u64(key, value);
    else throw std::invalid_argument("config: unknown key: " + key);
}

void echo_synth_config(const scfa::SynthConfig& c, const std::string& out_dir) {
    std::cout << "# effective config\n";
    std::cout << "out=" << out_dir << "\n";
    std::cout << "num_classes=" << c.num_classes << "\n";
    std::cout << "videos_per_class=" << c.videos_per_class << "\n";
    std::cout << "frames=" << c.frames << "\n";
    std::cout << "frame_h=" << c.frame_h << "\n";
    std::cout << "frame_w=" << c.frame_w << "\n";
    std::cout << "noise=" << scfa::format_double(c.noise) << "\n";
    std::cout << "jitter=" << c.jitter << "\n";
    std::cout << "seed=" << c.seed << "\n" << std::flush;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each returns the process exit status.
// ---------------------------------------------------------------------------

int run_gen_synth(const KvFlags& kv, const std::string& out_dir) {
    scfa::SynthConfig cfg;
    if (!kv.config_path.empty()) {
        std::ifstream in(kv.config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + kv.config_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = scfa::detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument(kv.config_path + ":" + std::to_string(lineno) +
                                            ": expected key=value, found: " + t);
            }
            apply_synth_kv(cfg, scfa::detail::trim(t.substr(0, eq)),
                           scfa::detail::trim(t.substr(eq + 1)));
        }
    }
    for (const auto& [k, v] : kv.kvs) apply_synth_kv(cfg, k, v);
    echo_synth_config(cfg, out_dir);

    const auto entries = scfa::gen_synthetic_dataset(cfg, out_dir);
    std::cout << "wrote " << entries.size() << " videos (" << cfg.num_classes << " classes, "
              << cfg.frames << " frames each) to " << out_dir << "\n";
    std::cout << "manifest: " << (fs::path(out_dir) / "manifest.csv").string() << "\n";
    return 0;
}

int run_aggregate(const KvFlags& kv, const std::string& out_dir) {
    const scfa::TrainConfig cfg = resolve_train_config(kv);
    echo_config(cfg);
    if (cfg.manifest.empty()) throw std::invalid_argument("config: manifest path not set");
    cfg.layout().validate();
    const scfa::TrainDataset ds = scfa::load_train_dataset(cfg.manifest, cfg.layout());

    fs::create_directories(out_dir);
    std::size_t written = 0;
    for (const auto& video : ds.videos) {
        scfa::SamplingPlan plan;
        plan.y = cfg.y;
        plan.mode = cfg.sample_mode;
        plan.seed = scfa::mix_seed(cfg.seed, 0x616767ULL, scfa::hash_string(video.video_id));
        for (std::uint64_t draw = 0; draw < 2; ++draw) {
            const scfa::AggregatedImage agg =
                scfa::aggregate_view(video, cfg.layout(), plan, draw);
            std::string name = video.video_id + "_d" + std::to_string(draw) + "_i";
            for (std::size_t k = 0; k < agg.source_indices.size(); ++k) {
                if (k) name += "-";
                name += std::to_string(agg.source_indices[k]);
            }
            scfa::write_ppm(fs::path(out_dir) / (name + ".ppm"), agg.pixels);
            ++written;
        }
    }
    std::cout << "wrote " << written << " aggregated views to " << out_dir << "\n";
    return 0;
}

int run_train(const KvFlags& kv) {
    const scfa::TrainConfig cfg = resolve_train_config(kv);
    echo_config(cfg);
    const scfa::TrainResult r = scfa::train_contrastive(cfg);
    std::cout << "best_epoch=" << r.best_epoch << " best_loss=" << scfa::format_double(r.best_loss)
              << "\n";
    std::cout << "final_checkpoint=" << r.final_checkpoint.string() << "\n";
    std::cout << "best_checkpoint=" << r.best_checkpoint.string() << "\n";
    std::cout << "metrics=" << r.metrics_path.string() << "\n";
    return 0;
}

void print_eval(const char* what, const scfa::EvalResult& r) {
    std::cout << what << " seeds=" << r.per_seed.size() << " mean=" << scfa::format_double(r.mean)
              << " std=" << scfa::format_double(r.stddev) << " per_seed=";
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
        if (i) std::cout << ",";
        std::cout << scfa::format_double(r.per_seed[i]);
    }
    std::cout << "\n";
}

int run_probe(const KvFlags& kv, const std::string& checkpoint, const std::string& features) {
    const scfa::TrainConfig cfg = resolve_train_config(kv);
    echo_config(cfg);
    if (checkpoint.empty() == features.empty()) {
        throw std::invalid_argument("probe: exactly one of --checkpoint or --features is required");
    }

    if (!features.empty()) {
        const scfa::FeatureFile f = scfa::import_features(features);
        std::size_t classes = cfg.num_classes;
        if (classes == 0) {
            int max_label = -1;
            for (int l : f.labels) max_label = std::max(max_label, l);
            classes = static_cast<std::size_t>(max_label) + 1;
        }
        if (classes < 2) throw std::invalid_argument("probe: need at least 2 classes");
        scfa::TrainConfig head_cfg = cfg;
        head_cfg.conv_channels = {f.features.cols()};  // head width = stored feature dim
        const scfa::EncoderConfig enc = head_cfg.encoder(classes);
        std::vector<double> accs;
        for (std::size_t s = 0; s < cfg.eval_seeds; ++s) {
            const std::uint64_t seed = scfa::mix_seed(cfg.seed, 0x70726f6265ULL, s);
            accs.push_back(scfa::probe_features_once(f.features, f.labels, enc, head_cfg, seed));
        }
        print_eval("linear_probe", scfa::detail::summarize(std::move(accs)));
        return 0;
    }

    if (cfg.manifest.empty()) throw std::invalid_argument("config: manifest path not set");
    const scfa::TrainDataset ds = scfa::load_train_dataset(cfg.manifest, cfg.layout());
    const scfa::ModelParams params = scfa::load_checkpoint(checkpoint);
    print_eval("linear_probe", scfa::linear_probe(params, ds, cfg, cfg.eval_seeds));
    return 0;
}

int run_finetune(const KvFlags& kv, const std::string& checkpoint) {
    const scfa::TrainConfig cfg = resolve_train_config(kv);
    echo_config(cfg);
    if (checkpoint.empty()) throw std::invalid_argument("finetune: --checkpoint is required");
    if (cfg.manifest.empty()) throw std::invalid_argument("config: manifest path not set");
    const scfa::TrainDataset ds = scfa::load_train_dataset(cfg.manifest, cfg.layout());
    const scfa::ModelParams params = scfa::load_checkpoint(checkpoint);
    print_eval("finetune", scfa::finetune_classifier(params, ds, cfg, cfg.eval_seeds));
    return 0;
}

int run_coverage(std::vector<std::size_t> Ts, std::vector<std::size_t> ys,
                 std::vector<std::size_t> Bs, std::size_t trials, std::uint64_t seed) {
    if (Ts.empty()) Ts = {2, 4, 16};
    if (ys.empty()) ys = {1, 4, 16};
    if (Bs.empty()) Bs = {1, 5, 10};
    std::cout << "# effective config\n";
    std::cout << "T=" << join_sizes(Ts) << "\n";
    std::cout << "y=" << join_sizes(ys) << "\n";
    std::cout << "B=" << join_sizes(Bs) << "\n";
    std::cout << "trials=" << trials << "\n";
    std::cout << "seed=" << seed << "\n";

    std::cout << "T y B closed_form monte_carlo std_err within_4se\n";
    bool all_ok = true;
    for (std::size_t T : Ts) {
        for (std::size_t y : ys) {
            for (std::size_t B : Bs) {
                const double p = scfa::coverage_probability(T, y, B);
                const scfa::CoverageEstimate est =
                    scfa::monte_carlo_coverage(T, y, B, trials, seed);
                // Standard error at the known p guards the tiny-p regime where
                // the empirical estimate (and its SE) collapse to zero.
                const double se0 =
                    std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
                const double se = std::max(est.std_err, se0);
                const bool ok = std::abs(est.p_hat - p) <= 4.0 * se;
                all_ok = all_ok && ok;
                std::cout << T << " " << y << " " << B << " " << scfa::format_double(p) << " "
                          << scfa::format_double(est.p_hat) << " " << scfa::format_double(se)
                          << " " << (ok ? "yes" : "no") << "\n";
            }
        }
    }
    if (!all_ok) {
        std::cerr << "error: coverage: monte carlo estimate outside 4 standard errors\n";
        return 1;
    }
    return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t batches, double step, double tol) {
    std::cout << "# effective config\n";
    std::cout << "seed=" << seed << "\n";
    std::cout << "batches=" << batches << "\n";
    std::cout << "step=" << scfa::format_double(step) << "\n";
    std::cout << "tol=" << scfa::format_double(tol) << "\n";

    double max_rel = 0.0;
    std::uint64_t case_id = 0;
    for (std::size_t n_videos : {2u, 4u, 8u}) {
        for (std::size_t dim : {4u, 16u}) {
            for (double tau : {0.07, 0.5, 1.0}) {
                for (std::size_t b = 0; b < batches; ++b) {
                    std::mt19937_64 rng(scfa::mix_seed(seed, ++case_id));
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    std::uniform_int_distribution<int> label_dist(0, 1);

                    scfa::Tensor p({2 * n_videos, dim});
                    for (auto& v : p.data) v = gauss(rng);
                    std::vector<int> labels;
                    std::vector<std::string> video_ids;
                    std::vector<int> view_ids;
                    for (std::size_t v = 0; v < n_videos; ++v) {
                        const int label = label_dist(rng);
                        for (int view = 0; view < 2; ++view) {
                            labels.push_back(label);
                            video_ids.push_back("v" + std::to_string(v));
                            view_ids.push_back(view);
                        }
                    }

                    const scfa::LossResult res =
                        scfa::scfa_loss_grad(p, labels, video_ids, view_ids, tau);

                    scfa::Tensor fd(p.shape);
                    scfa::Tensor probe = p;
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        const double saved = probe.data[i];
                        probe.data[i] = saved + step;
                        const double hi = scfa::scfa_loss(scfa::l2_normalize_rows(probe), labels,
                                                          video_ids, view_ids, tau);
                        probe.data[i] = saved - step;
                        const double lo = scfa::scfa_loss(scfa::l2_normalize_rows(probe), labels,
                                                          video_ids, view_ids, tau);
                        probe.data[i] = saved;
                        fd.data[i] = (hi - lo) / (2.0 * step);
                    }

                    double diff = 0.0, na = 0.0, nb = 0.0;
                    for (std::size_t i = 0; i < fd.size(); ++i) {
                        const double d = res.grad.data[i] - fd.data[i];
                        diff += d * d;
                        na += res.grad.data[i] * res.grad.data[i];
                        nb += fd.data[i] * fd.data[i];
                    }
                    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-30});
                    max_rel = std::max(max_rel, std::sqrt(diff) / denom);
                }
            }
        }
    }
    const bool pass = max_rel <= tol;
    std::cout << "max_rel_err=" << scfa::format_double(max_rel) << (pass ? " PASS" : " FAIL")
              << "\n";
    return pass ? 0 : 1;
}

int run_montage(const KvFlags& kv, const std::string& video_id, const std::string& out_path) {
    const scfa::TrainConfig cfg = resolve_train_config(kv);
    echo_config(cfg);
    std::cout << "video=" << video_id << "\n";
    std::cout << "out=" << out_path << "\n";
    if (cfg.manifest.empty()) throw std::invalid_argument("config: manifest path not set");
    const scfa::TrainDataset ds = scfa::load_train_dataset(cfg.manifest, cfg.layout());

    const scfa::LoadedVideo* video = nullptr;
    if (video_id.empty()) {
        video = &ds.videos.front();
    } else {
        for (const auto& v : ds.videos) {
            if (v.video_id == video_id) {
                video = &v;
                break;
            }
        }
        if (!video) throw std::invalid_argument("montage: video id not in manifest: " + video_id);
    }

    scfa::SamplingPlan plan;
    plan.y = cfg.y;
    plan.mode = cfg.sample_mode;
    plan.seed = scfa::mix_seed(cfg.seed, 0x616767ULL, scfa::hash_string(video->video_id));
    const scfa::Image a = scfa::aggregate_view(*video, cfg.layout(), plan, 0).pixels;
    const scfa::Image b = scfa::aggregate_view(*video, cfg.layout(), plan, 1).pixels;

    const std::size_t gutter = 2;  // white separator between the two views
    scfa::Image side(a.height, a.width + gutter + b.width, 255);
    for (std::size_t y = 0; y < a.height; ++y) {
        for (std::size_t x = 0; x < a.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) side.at(y, x, c) = a.at(y, x, c);
        for (std::size_t x = 0; x < b.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                side.at(y, a.width + gutter + x, c) = b.at(y, x, c);
    }
    if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    scfa::write_ppm(out_path, side);
    std::cout << "wrote montage of " << video->video_id << " (" << side.height << "x" << side.width
              << ") to " << out_path << "\n";
    return 0;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Supervised contrastive frame aggregation pipeline"};
    app.require_subcommand(1);

    KvFlags gen_kv;
    std::string gen_out = "data/synth";
    CLI::App* gen = app.add_subcommand("gen-synth", "generate the synthetic video dataset");
    gen->add_option("--config", gen_kv.config_path, "key=value config file; flags override it");
    gen->add_option("--out", gen_out, "output dataset directory");
    for (const char* key : {"num_classes", "videos_per_class", "frames", "frame_h", "frame_w",
                            "noise", "jitter", "seed"}) {
        gen->add_option_function<std::string>(
               std::string("--") + key,
               [&gen_kv, k = std::string(key)](const std::string& v) {
                   gen_kv.kvs.emplace_back(k, v);
               },
               "")
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

    KvFlags agg_kv;
    std::string agg_out = "aggregated";
    CLI::App* agg = app.add_subcommand("aggregate", "write two sampled grid views per video");
    add_train_flags(agg, agg_kv);
    agg->add_option("--out", agg_out, "output image directory");

    KvFlags train_kv;
    CLI::App* train = app.add_subcommand("train", "contrastive pre-training");
    add_train_flags(train, train_kv);

    KvFlags probe_kv;
    std::string probe_ckpt, probe_feats;
    CLI::App* probe = app.add_subcommand("probe", "linear probe of frozen features");
    add_train_flags(probe, probe_kv);
    probe->add_option("--checkpoint", probe_ckpt, "encoder checkpoint to evaluate");
    probe->add_option("--features", probe_feats, "pre-extracted feature file to evaluate");

    KvFlags ft_kv;
    std::string ft_ckpt;
    CLI::App* ft = app.add_subcommand("finetune", "softmax fine-tuning from a checkpoint");
    add_train_flags(ft, ft_kv);
    ft->add_option("--checkpoint", ft_ckpt, "encoder checkpoint to start from");

    std::vector<std::size_t> cov_T, cov_y, cov_B;
    std::size_t cov_trials = 100000;
    std::uint64_t cov_seed = 42;
    CLI::App* cov = app.add_subcommand("coverage", "frame coverage: closed form vs Monte Carlo");
    cov->add_option("--T", cov_T, "video lengths (repeatable)");
    cov->add_option("--y", cov_y, "frames per view (repeatable)");
    cov->add_option("--B", cov_B, "batch counts (repeatable)");
    cov->add_option("--trials", cov_trials, "Monte Carlo trials per cell");
    cov->add_option("--seed", cov_seed, "Monte Carlo seed");

    std::uint64_t gc_seed = 1;
    std::size_t gc_batches = 3;
    double gc_step = 1e-5, gc_tol = 1e-3;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradient");
    gc->add_option("--seed", gc_seed, "batch generation seed");
    gc->add_option("--batches", gc_batches, "batches per (N, D, tau) combination");
    gc->add_option("--step", gc_step, "central difference step");
    gc->add_option("--tol", gc_tol, "max relative error to pass");

    KvFlags mon_kv;
    std::string mon_video, mon_out = "montage.ppm";
    CLI::App* mon = app.add_subcommand("montage", "side-by-side image of two views of one video");
    add_train_flags(mon, mon_kv);
    mon->add_option("--video", mon_video, "video id; defaults to the manifest's first entry");
    mon->add_option("--out", mon_out, "output image path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (gen->parsed()) return guarded([&] { return run_gen_synth(gen_kv, gen_out); });
    if (agg->parsed()) return guarded([&] { return run_aggregate(agg_kv, agg_out); });
    if (train->parsed()) return guarded([&] { return run_train(train_kv); });
    if (probe->parsed()) return guarded([&] { return run_probe(probe_kv, probe_ckpt, probe_feats); });
    if (ft->parsed()) return guarded([&] { return run_finetune(ft_kv, ft_ckpt); });
    if (cov->parsed()) {
        return guarded([&] { return run_coverage(cov_T, cov_y, cov_B, cov_trials, cov_seed); });
    }
    if (gc->parsed()) {
        return guarded([&] { return run_gradcheck(gc_seed, gc_batches, gc_step, gc_tol); });
    }
    if (mon->parsed()) return guarded([&] { return run_montage(mon_kv, mon_video, mon_out); });
    std::cerr << "error: no subcommand given\n";
    return 2;
}
