// Command-line front end: train, infer, eval, oracle-check, synth-data,
// train-prompt. Exit codes: 0 success, 1 validation problem, 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "hazebridge/checkpoint.hpp"
#include "hazebridge/config.hpp"
#include "hazebridge/dataset.hpp"
#include "hazebridge/experiment.hpp"
#include "hazebridge/image_io.hpp"
#include "hazebridge/metrics.hpp"
#include "hazebridge/selfcheck.hpp"
#include "hazebridge/trainer.hpp"

namespace fs = std::filesystem;
using namespace hazebridge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string checkpoint;
    uint64_t seed = 0;
    bool seed_set = false;
    int64_t nfe = 0;
    bool nfe_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file");
    cmd->add_option("--out", flags.out, "output directory or file");
    cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
    cmd->add_option("--seed", flags.seed, "seed override")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--nfe", flags.nfe, "function evaluations for sampling")
        ->each([&](const std::string&) { flags.nfe_set = true; });
}

ExperimentConfig load_config(const CommonFlags& flags, bool required = true) {
    if (flags.config_path.empty()) {
        if (required) throw ConfigError("--config is required for this command");
        return ExperimentConfig{};
    }
    ExperimentConfig cfg = ExperimentConfig::load(flags.config_path);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    return cfg;
}

TrainerOptions options_from(const ExperimentConfig& cfg) {
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

int cmd_train(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);
    ExperimentResult result = run_experiment(cfg);
    std::printf("run directory: %s\n", result.run_dir.c_str());
    if (cfg.kind == ExperimentKind::Toy2d) {
        std::printf("energy distance: initial %.6f -> final %.6f\n",
                    static_cast<double>(result.initial_energy),
                    static_cast<double>(result.final_energy));
    } else if (!result.psnr_by_nfe.empty()) {
        std::printf("baseline PSNR (hazy vs gt): %.3f dB\n",
                    static_cast<double>(result.baseline_psnr));
        for (const auto& [nfe, p] : result.psnr_by_nfe)
            std::printf("nfe=%lld: PSNR %.3f dB, SSIM %.4f\n", static_cast<long long>(nfe),
                        static_cast<double>(p), static_cast<double>(result.ssim_by_nfe.at(nfe)));
    }
    return kExitOk;
}

int cmd_infer(const CommonFlags& flags, const std::string& input) {
    if (flags.checkpoint.empty()) throw ConfigError("infer: --checkpoint is required");
    if (flags.out.empty()) throw ConfigError("infer: --out is required");
    ExperimentConfig cfg = load_config(flags);
    if (cfg.kind == ExperimentKind::Toy2d) throw ConfigError("infer: image modes only");

    auto encoder = std::make_shared<const EmbeddingEncoder>(cfg.seed);
    Rng prompt_rng = Rng::substream(cfg.seed, 0xaa);
    TrainState state = TrainState::make_image(options_from(cfg), encoder,
                                              init_prompt(*encoder, prompt_rng));
    load_checkpoint(flags.checkpoint, state);

    const int64_t nfe = flags.nfe_set ? flags.nfe : cfg.n_intervals;
    std::vector<std::string> files;
    if (fs::is_directory(input)) {
        files = list_image_files(input);
    } else {
        files.push_back(input);
    }
    if (files.empty()) throw IoError("infer: no input images at " + input);
    fs::create_directories(flags.out);
    for (size_t k = 0; k < files.size(); ++k) {
        Tensor img = load_image(files[k]);
        Rng rng = Rng::substream(cfg.seed, 0x1f, k);
        Tensor batch = reshape(img, {1, 3, img.shape()[1], img.shape()[2]});
        Tensor dehazed = infer(batch, nfe, state, rng);
        const auto name = fs::path(files[k]).stem().string() + ".png";
        save_png((fs::path(flags.out) / name).string(),
                 reshape(clamp(dehazed, 0, 1), img.shape()));
    }
    std::printf("wrote %zu dehazed images to %s\n", files.size(), flags.out.c_str());
    return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& pred_dir, const std::string& gt_dir) {
    const std::string out_csv = flags.out.empty() ? "eval.csv" : flags.out;
    const int status = eval_dirs(pred_dir, gt_dir, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
    return status == 0 ? kExitOk : kExitRuntime;
}

int cmd_oracle_check(const CommonFlags& flags) {
    const uint64_t seed = flags.seed_set ? flags.seed : 7;
    SelfCheckReport report = run_oracle_checks(seed);
    for (const auto& item : report.items)
        std::printf("[%s] %s: %s\n", item.pass ? "PASS" : "FAIL", item.name.c_str(),
                    item.detail.c_str());
    return report.all_pass() ? kExitOk : kExitRuntime;
}

int cmd_synth_data(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);
    if (cfg.kind != ExperimentKind::SynthHaze)
        throw ConfigError("synth-data: config kind must be synth-haze");
    cfg.validate();
    UnpairedDataset data = build_dataset(cfg);
    const fs::path root = cfg.out_dir;
    fs::create_directories(root / "hazy");
    fs::create_directories(root / "clear");
    fs::create_directories(root / "test_gt");
    auto write_all = [&](const std::vector<Tensor>& imgs, const fs::path& dir) {
        char name[32];
        for (size_t k = 0; k < imgs.size(); ++k) {
            std::snprintf(name, sizeof(name), "%05zu.png", k);
            save_png((dir / name).string(), imgs[k]);
        }
    };
    write_all(data.hazy, root / "hazy");
    write_all(data.clear, root / "clear");
    write_all(data.test_gt, root / "test_gt");
    std::printf("wrote %zu hazy / %zu clear / %zu gt images under %s\n", data.hazy.size(),
                data.clear.size(), data.test_gt.size(), root.string().c_str());
    return kExitOk;
}

int cmd_train_prompt(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);
    if (cfg.kind == ExperimentKind::Toy2d)
        throw ConfigError("train-prompt: image modes only");
    cfg.validate();
    UnpairedDataset data = build_dataset(cfg);
    EmbeddingEncoder enc(cfg.seed);
    PromptState prompt =
        train_prompt(data.hazy, data.clear, enc, cfg.prompt_steps, cfg.prompt_lr, cfg.seed);
    const real acc = prompt_pair_accuracy(data.hazy, data.clear, prompt, enc);
    const std::string out =
        flags.out.empty() ? "prompt.bin" : (fs::is_directory(flags.out)
                                                ? (fs::path(flags.out) / "prompt.bin").string()
                                                : flags.out);
    save_tensor_container(out, {{"prompt.vector", prompt.vector.detach()},
                                {"prompt.steps", Tensor::scalar(static_cast<real>(prompt.steps_trained))},
                                {"prompt.final_loss", Tensor::scalar(prompt.final_loss)},
                                {"encoder.seed", Tensor::scalar(static_cast<real>(cfg.seed))}});
    std::printf("prompt trained for %lld steps, final loss %.5f, pair accuracy %.2f%%\n",
                static_cast<long long>(prompt.steps_trained),
                static_cast<double>(prompt.final_loss), static_cast<double>(acc * 100));
    std::printf("wrote %s\n", out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unpaired image dehazing via a time-discretized stochastic bridge"};
    app.require_subcommand(1);

    CommonFlags train_flags, infer_flags, eval_flags, oracle_flags, synth_flags, prompt_flags;
    std::string infer_input, eval_pred, eval_gt;

    CLI::App* train = app.add_subcommand("train", "run a full training experiment");
    add_common(train, train_flags);

    CLI::App* infer_cmd = app.add_subcommand("infer", "dehaze images with a trained checkpoint");
    add_common(infer_cmd, infer_flags);
    infer_cmd->add_option("input", infer_input, "input image or directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM between two image directories");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("pred", eval_pred, "prediction directory")->required();
    eval_cmd->add_option("gt", eval_gt, "ground-truth directory")->required();

    CLI::App* oracle = app.add_subcommand("oracle-check", "run the bridge/OT/gradient suites");
    add_common(oracle, oracle_flags);

    CLI::App* synth = app.add_subcommand("synth-data", "write a synthetic unpaired dataset");
    add_common(synth, synth_flags);

    CLI::App* tprompt = app.add_subcommand("train-prompt", "learn the haze marker only");
    add_common(tprompt, prompt_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_flags);
        if (infer_cmd->parsed()) return cmd_infer(infer_flags, infer_input);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags, eval_pred, eval_gt);
        if (oracle->parsed()) return cmd_oracle_check(oracle_flags);
        if (synth->parsed()) return cmd_synth_data(synth_flags);
        if (tprompt->parsed()) return cmd_train_prompt(prompt_flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitValidation;
}
