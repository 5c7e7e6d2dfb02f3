#pragma once

#include <cstdint>
#include <string>

#include "hazebridge/common.hpp"

namespace hazebridge {

enum class ExperimentKind { Toy2d, SynthHaze, ImageDir };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

// Whole-run configuration. Serialized as "key = value" lines with an
// explicit schema version; parsing rejects unknown keys and re-serialization
// is lossless (numbers round-trip exactly).
struct ExperimentConfig {
    int64_t schema_version = 1;
    ExperimentKind kind = ExperimentKind::SynthHaze;
    uint64_t seed = 0;
    std::string out_dir = "runs/out";

    // bridge schedule
    int64_t n_intervals = 5;
    real tau = real(0.01);

    // loss weights
    real lambda_sb = real(1);
    real lambda_p = real(1);
    real lambda_nce = real(1);
    real lambda_phy = real(0.5);
    real lambda_hfd = real(0.5);

    // optimization
    int64_t steps = 2000;
    int64_t batch_size = 16;
    real lr = real(2e-4);
    real adam_beta1 = real(0.5);
    real adam_beta2 = real(0.999);
    int64_t eval_every = 500;
    int64_t checkpoint_every = 1000;

    // networks
    int64_t gen_channels = 16;
    int64_t gen_res_blocks = 2;
    int64_t disc_channels = 16;
    int64_t point_hidden = 128;

    // prompt learning
    int64_t prompt_steps = 400;
    real prompt_lr = real(0.05);
    bool prompt_loss_both_terms = true;

    // contrastive patches
    int64_t nce_locations = 64;
    real nce_temperature = real(0.07);

    // haze physics
    real dcp_omega = real(0.95);
    int64_t dcp_patch = 15;
    real dcp_t_min = real(0.1);
    int64_t refiner_pretrain_steps = 200;

    // synthetic haze data
    int64_t image_size = 32;
    int64_t n_clear_images = 512;
    real a_min = real(0.75);
    real a_max = real(0.95);
    real t_mean_min = real(0.35);
    real t_mean_max = real(0.75);

    // directory data
    std::string hazy_dir;
    std::string clear_dir;

    // toy mode
    std::string toy_source = "two-moons";
    std::string toy_target = "ring";
    int64_t toy_n = 2048;
    int64_t toy_batch = 256;

    // evaluation
    std::string eval_nfes = "1,3,5";

    std::string serialize() const;
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;

    // Range and consistency checks; throws ConfigError.
    void validate() const;
};

}  // namespace hazebridge
