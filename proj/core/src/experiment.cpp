#include "hazebridge/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hazebridge/image_io.hpp"
#include "hazebridge/metrics.hpp"

namespace hazebridge {

namespace fs = std::filesystem;

namespace {

std::string run_command(const std::string& cmd) {
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return "";
    char buf[256];
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
}

std::string csv_real(real v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(v));
    return buf;
}

// Tiny scatter rendering for the 2-D experiments.
Tensor render_scatter(const Tensor& points, int64_t side, real extent) {
    std::vector<real> img(3 * side * side, real(1));
    auto pv = points.data();
    const int64_t n = points.shape()[0];
    for (int64_t i = 0; i < n; ++i) {
        const real x = pv[2 * i], y = pv[2 * i + 1];
        const int64_t px = static_cast<int64_t>((x + extent) / (2 * extent) * (side - 1));
        const int64_t py = static_cast<int64_t>((extent - y) / (2 * extent) * (side - 1));
        if (px < 0 || px >= side || py < 0 || py >= side) continue;
        img[(0 * side + py) * side + px] = real(0.1);
        img[(1 * side + py) * side + px] = real(0.2);
        img[(2 * side + py) * side + px] = real(0.6);
    }
    return Tensor::from_data({3, side, side}, std::move(img));
}

TrainerOptions trainer_options_from(const ExperimentConfig& cfg) {
    TrainerOptions opt;
    opt.schedule = BridgeSchedule(cfg.n_intervals, cfg.tau);
    opt.weights = {cfg.lambda_sb, cfg.lambda_p, cfg.lambda_nce, cfg.lambda_phy, cfg.lambda_hfd};
    opt.lr = cfg.lr;
    opt.adam_beta1 = cfg.adam_beta1;
    opt.adam_beta2 = cfg.adam_beta2;
    opt.seed = cfg.seed;
    opt.nce_locations = cfg.nce_locations;
    opt.nce_temperature = cfg.nce_temperature;
    opt.dcp = {cfg.dcp_omega, cfg.dcp_patch, cfg.dcp_t_min};
    opt.prompt_loss_both_terms = cfg.prompt_loss_both_terms;
    opt.generator.channels = cfg.gen_channels;
    opt.generator.res_blocks = cfg.gen_res_blocks;
    opt.disc_channels = cfg.disc_channels;
    opt.point_hidden = cfg.point_hidden;
    return opt;
}

struct LossCsv {
    std::ofstream os;
    explicit LossCsv(const std::string& path) : os(path, std::ios::trunc) {
        if (!os) throw IoError("cannot write " + path);
        os << "step,i,d_loss,g_adv,sb,p,nce,phy,hfd,entropy,total,wall_ms\n";
    }
    void row(const StepStats& s, real wall_ms) {
        os << s.step << "," << s.time_index << "," << csv_real(s.d_loss) << ","
           << csv_real(s.g_adv) << "," << csv_real(s.sb) << "," << csv_real(s.p) << ","
           << csv_real(s.nce) << "," << csv_real(s.phy) << "," << csv_real(s.hfd) << ","
           << csv_real(s.entropy) << "," << csv_real(s.total) << "," << csv_real(wall_ms)
           << "\n";
    }
};

void write_run_info(const fs::path& dir, const ExperimentConfig& cfg) {
    cfg.save((dir / "config.snapshot.txt").string());
    std::ofstream info(dir / "run_info.txt", std::ios::trunc);
    info << "seed " << cfg.seed << "\n";
    info << "git " << run_command("git describe --always --dirty 2>/dev/null") << "\n";
}

// Mean PSNR/SSIM of dehazed test images against ground truth at one NFE.
std::pair<real, real> evaluate_pairs(const TrainState& state,
                                     const std::vector<Tensor>& test_hazy,
                                     const std::vector<Tensor>& test_gt, int64_t nfe,
                                     int64_t batch, int64_t limit, uint64_t seed) {
    const int64_t n = std::min<int64_t>(limit, static_cast<int64_t>(test_hazy.size()));
    real psnr_acc = 0, ssim_acc = 0;
    int64_t done = 0;
    while (done < n) {
        const int64_t take = std::min<int64_t>(batch, n - done);
        std::vector<Tensor> chunk(test_hazy.begin() + done, test_hazy.begin() + done + take);
        Rng rng = Rng::substream(seed, 0xe7a1, static_cast<uint64_t>(done) * 131 + nfe);
        Tensor dehazed = infer(stack(chunk), nfe, state, rng);
        for (int64_t k = 0; k < take; ++k) {
            Tensor img = reshape(slice(dehazed, 0, k, k + 1), test_gt[done + k].shape());
            psnr_acc += psnr(clamp(img, 0, 1), test_gt[done + k]);
            ssim_acc += ssim_metric(clamp(img, 0, 1), test_gt[done + k]);
        }
        done += take;
    }
    return {psnr_acc / static_cast<real>(n), ssim_acc / static_cast<real>(n)};
}

ExperimentResult run_toy2d(const ExperimentConfig& cfg, const fs::path& dir) {
    ExperimentResult result;
    Tensor source = toy2d_dataset(cfg.toy_source, cfg.toy_n, cfg.seed);
    Tensor target = toy2d_dataset(cfg.toy_target, cfg.toy_n, cfg.seed + 1);

    TrainerOptions opt = trainer_options_from(cfg);
    TrainState state = TrainState::make_point(opt);

    const int64_t eval_n = std::min<int64_t>(1024, cfg.toy_n);
    Tensor eval_source = slice(source, 0, 0, eval_n);
    Tensor eval_target = slice(target, 0, 0, eval_n);
    auto eval_energy = [&](uint64_t tag) {
        Rng rng = Rng::substream(cfg.seed, 0xe44, tag);
        Tensor generated = infer(eval_source, cfg.n_intervals, state, rng);
        return energy_distance(generated, eval_target);
    };
    result.initial_energy = eval_energy(0);

    LossCsv loss_csv((dir / "loss.csv").string());
    std::ofstream metrics_csv(dir / "metrics.csv", std::ios::trunc);
    metrics_csv << "step,energy_distance\n";
    metrics_csv << 0 << "," << csv_real(result.initial_energy) << "\n";

    save_png((dir / "samples_source.png").string(), render_scatter(eval_source, 256, real(2)));
    save_png((dir / "samples_target.png").string(), render_scatter(eval_target, 256, real(2)));

    for (int64_t s = 0; s < cfg.steps; ++s) {
        Rng rng = Rng::substream(cfg.seed, static_cast<uint64_t>(s), 0xba7c);
        std::vector<int64_t> src_idx(cfg.toy_batch), tgt_idx(cfg.toy_batch);
        for (auto& ix : src_idx) ix = rng.uniform_int(cfg.toy_n);
        for (auto& ix : tgt_idx) ix = rng.uniform_int(cfg.toy_n);
        Tensor hazy_batch = index_select(source, 0, src_idx);
        Tensor clear_batch = index_select(target, 0, tgt_idx);
        const auto t0 = std::chrono::steady_clock::now();
        StepStats stats = train_step(state, hazy_batch, clear_batch);
        const auto t1 = std::chrono::steady_clock::now();
        loss_csv.row(stats, std::chrono::duration<real, std::milli>(t1 - t0).count());
        if (cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0 && s + 1 < cfg.steps) {
            metrics_csv << (s + 1) << "," << csv_real(eval_energy(s + 1)) << "\n";
        }
    }

    result.final_energy = eval_energy(0xffff);
    metrics_csv << cfg.steps << "," << csv_real(result.final_energy) << "\n";
    {
        Rng rng = Rng::substream(cfg.seed, 0xe44, 0x5a);
        Tensor generated = infer(eval_source, cfg.n_intervals, state, rng);
        save_png((dir / "samples_generated.png").string(),
                 render_scatter(generated, 256, real(2)));
    }
    save_checkpoint((dir / "ckpt_final.bin").string(), state);
    return result;
}

ExperimentResult run_image_mode(const ExperimentConfig& cfg, const fs::path& dir) {
    ExperimentResult result;
    UnpairedDataset data = build_dataset(cfg);

    // prompt learning comes first, then stays frozen
    auto encoder = std::make_shared<const EmbeddingEncoder>(cfg.seed);
    const int64_t prompt_pool = std::min<int64_t>(128, static_cast<int64_t>(data.hazy.size()));
    std::vector<Tensor> prompt_hazy(data.hazy.begin(), data.hazy.begin() + prompt_pool);
    std::vector<Tensor> prompt_clear(
        data.clear.begin(),
        data.clear.begin() + std::min<int64_t>(prompt_pool, static_cast<int64_t>(data.clear.size())));
    PromptState prompt = train_prompt(prompt_hazy, prompt_clear, *encoder, cfg.prompt_steps,
                                      cfg.prompt_lr, cfg.seed);
    result.prompt_accuracy = prompt_pair_accuracy(prompt_hazy, prompt_clear, prompt, *encoder);

    TrainerOptions opt = trainer_options_from(cfg);
    TrainState state = TrainState::make_image(opt, encoder, std::move(prompt));
    if (cfg.refiner_pretrain_steps > 0) {
        Rng rng = Rng::substream(cfg.seed, 0x4ef1);
        pretrain_refiner_identity(*state.refiner, cfg.refiner_pretrain_steps, real(1e-3), rng,
                                  cfg.image_size);
    }

    const auto nfes = parse_nfe_list(cfg.eval_nfes);
    const bool have_pairs = !data.test_hazy.empty();
    if (have_pairs) {
        real base = 0;
        for (size_t k = 0; k < data.test_hazy.size(); ++k)
            base += psnr(data.test_hazy[k], data.test_gt[k]);
        result.baseline_psnr = base / static_cast<real>(data.test_hazy.size());
    }

    LossCsv loss_csv((dir / "loss.csv").string());
    std::ofstream metrics_csv(dir / "metrics.csv", std::ios::trunc);
    metrics_csv << "step,nfe,psnr,ssim,baseline_psnr\n";

    const int64_t eval_limit = 64;
    auto eval_and_log = [&](int64_t step, int64_t limit) {
        if (!have_pairs) return;
        for (int64_t nfe : nfes) {
            auto [p, s] = evaluate_pairs(state, data.test_hazy, data.test_gt, nfe,
                                         cfg.batch_size, limit, cfg.seed);
            result.psnr_by_nfe[nfe] = p;
            result.ssim_by_nfe[nfe] = s;
            metrics_csv << step << "," << nfe << "," << csv_real(p) << "," << csv_real(s) << ","
                        << csv_real(result.baseline_psnr) << "\n";
        }
        metrics_csv.flush();
    };

    for (int64_t s = 0; s < cfg.steps; ++s) {
        BatchPair batch = sample_unpaired_batch(data, cfg.batch_size, cfg.seed,
                                                static_cast<uint64_t>(s));
        const auto t0 = std::chrono::steady_clock::now();
        StepStats stats = train_step(state, batch.hazy, batch.clear);
        const auto t1 = std::chrono::steady_clock::now();
        loss_csv.row(stats, std::chrono::duration<real, std::milli>(t1 - t0).count());
        if (cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0 && s + 1 < cfg.steps)
            eval_and_log(s + 1, eval_limit);
        if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0)
            save_checkpoint((dir / ("ckpt_step" + std::to_string(s + 1) + ".bin")).string(),
                            state);
    }
    eval_and_log(cfg.steps, static_cast<int64_t>(data.test_hazy.size()));
    save_checkpoint((dir / "ckpt_final.bin").string(), state);

    // sample grid: hazy / dehazed / (gt when available)
    {
        const int64_t show = std::min<int64_t>(8, static_cast<int64_t>(data.hazy.size()));
        std::vector<Tensor> tiles;
        std::vector<Tensor> chunk(data.hazy.begin(), data.hazy.begin() + show);
        Rng rng = Rng::substream(cfg.seed, 0x919d);
        Tensor dehazed = infer(stack(chunk), cfg.n_intervals, state, rng);
        for (int64_t k = 0; k < show; ++k) tiles.push_back(data.hazy[k]);
        for (int64_t k = 0; k < show; ++k)
            tiles.push_back(reshape(slice(dehazed, 0, k, k + 1), data.hazy[k].shape()));
        if (have_pairs)
            for (int64_t k = 0; k < show; ++k) tiles.push_back(data.test_gt[k]);
        save_image_grid((dir / "samples.png").string(), tiles, show);
    }
    return result;
}

}  // namespace

std::vector<int64_t> parse_nfe_list(const std::string& text) {
    std::vector<int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw ConfigError("bad NFE list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty NFE list");
    return out;
}

UnpairedDataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.kind == ExperimentKind::SynthHaze) {
        auto clear = procedural_clear_images(cfg.n_clear_images, cfg.image_size, cfg.seed);
        return synth_haze_dataset(clear, cfg.a_min, cfg.a_max, cfg.t_mean_min, cfg.t_mean_max,
                                  cfg.seed);
    }
    if (cfg.kind == ExperimentKind::ImageDir) {
        UnpairedDataset data;
        for (const auto& f : list_image_files(cfg.hazy_dir)) {
            data.hazy.push_back(load_image(f));
            data.hazy_source.push_back(-1);
        }
        for (const auto& f : list_image_files(cfg.clear_dir)) {
            data.clear.push_back(load_image(f));
            data.clear_source.push_back(-2);
        }
        if (data.hazy.empty() || data.clear.empty())
            throw IoError("image-dir: no images found in " + cfg.hazy_dir + " or " +
                          cfg.clear_dir);
        data.unpaired_guarantee = true;  // distinct directories by contract
        return data;
    }
    throw ConfigError("build_dataset: toy2d has no image dataset");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("run_experiment: cannot create " + cfg.out_dir + ": " + ec.message());
    write_run_info(dir, cfg);

    ExperimentResult result;
    if (cfg.kind == ExperimentKind::Toy2d) {
        result = run_toy2d(cfg, dir);
    } else {
        result = run_image_mode(cfg, dir);
    }
    result.run_dir = dir.string();
    return result;
}

int eval_dirs(const std::string& pred_dir, const std::string& gt_dir,
              const std::string& out_csv) {
    auto preds = list_image_files(pred_dir);
    std::ofstream os(out_csv, std::ios::trunc);
    if (!os) throw IoError("eval_dirs: cannot write " + out_csv);
    os << "file,psnr,ssim\n";
    int64_t matched = 0;
    bool missing = false;
    real psnr_acc = 0, ssim_acc = 0;
    for (const auto& p : preds) {
        const auto name = fs::path(p).filename();
        const auto gt_path = fs::path(gt_dir) / name;
        if (!fs::exists(gt_path)) {
            std::fprintf(stderr, "eval: missing ground truth for %s\n", name.string().c_str());
            missing = true;
            continue;
        }
        Tensor pred = load_image(p);
        Tensor gt = load_image(gt_path.string());
        const real pv = psnr(pred, gt);
        const real sv = ssim_metric(pred, gt);
        os << name.string() << "," << csv_real(pv) << "," << csv_real(sv) << "\n";
        psnr_acc += pv;
        ssim_acc += sv;
        ++matched;
    }
    if (matched == 0) {
        std::fprintf(stderr, "eval: no matching files between %s and %s\n", pred_dir.c_str(),
                     gt_dir.c_str());
        return 1;
    }
    os << "mean," << csv_real(psnr_acc / static_cast<real>(matched)) << ","
       << csv_real(ssim_acc / static_cast<real>(matched)) << "\n";
    return missing ? 1 : 0;
}

}  // namespace hazebridge
