#pragma once

#include <map>
#include <string>

#include "hazebridge/config.hpp"
#include "hazebridge/dataset.hpp"
#include "hazebridge/trainer.hpp"

namespace hazebridge {

struct ExperimentResult {
    std::string run_dir;

    // toy2d
    real initial_energy = 0;
    real final_energy = 0;

    // image modes (synthetic runs carry ground-truth pairs)
    real baseline_psnr = 0;  // hazy vs gt
    std::map<int64_t, real> psnr_by_nfe;
    std::map<int64_t, real> ssim_by_nfe;
    real prompt_accuracy = 0;
};

// Full run: data synthesis/ingestion, prompt pre-training (image modes),
// bridge training, periodic evaluation, and artifact emission (config
// snapshot, seed, git describe, loss/metric CSVs, checkpoints, sample PNGs).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Builds the dataset exactly as run_experiment would, without training.
UnpairedDataset build_dataset(const ExperimentConfig& cfg);

// Writes per-image PSNR/SSIM rows plus a mean row for files present in both
// directories (matched by filename). Missing counterparts are reported and
// skipped; returns nonzero when anything was missing or nothing matched.
int eval_dirs(const std::string& pred_dir, const std::string& gt_dir,
              const std::string& out_csv);

// Parses "1,3,5" into {1,3,5}.
std::vector<int64_t> parse_nfe_list(const std::string& text);

}  // namespace hazebridge
