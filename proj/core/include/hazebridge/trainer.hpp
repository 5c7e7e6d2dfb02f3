#pragma once

#include <memory>
#include <optional>
#include <string>

#include "hazebridge/bridge.hpp"
#include "hazebridge/haze.hpp"
#include "hazebridge/nets.hpp"
#include "hazebridge/nn.hpp"
#include "hazebridge/prompt.hpp"
#include "hazebridge/regularizers.hpp"

namespace hazebridge {

struct LossWeights {
    real lambda_sb = real(1);
    real lambda_p = real(1);
    real lambda_nce = real(1);
    real lambda_phy = real(0.5);
    real lambda_hfd = real(0.5);
};

struct TrainerOptions {
    BridgeSchedule schedule{5, real(0.01)};
    LossWeights weights;
    real lr = real(2e-4);
    real adam_beta1 = real(0.5);
    real adam_beta2 = real(0.999);
    uint64_t seed = 0;
    int64_t nce_locations = 64;
    real nce_temperature = real(0.07);
    DcpParams dcp;
    bool prompt_loss_both_terms = true;
    GeneratorDesc generator;
    int64_t disc_channels = 16;
    int64_t critic_hidden = 16;
    int64_t nce_dim = 64;
    int64_t point_hidden = 128;
};

// Individual loss terms from one generator-side evaluation, each a scalar
// tensor on the same graph.
struct LossComponents {
    Tensor adv;  // generator-side adversarial term
    Tensor sb;
    Tensor p;
    Tensor nce;
    Tensor phy;
    Tensor hfd;
};

// Scalar record of one training step for logging.
struct StepStats {
    int64_t step = 0;
    int64_t time_index = 0;  // the sampled i
    real d_loss = 0;
    real g_adv = 0, sb = 0, p = 0, nce = 0, phy = 0, hfd = 0;
    real entropy = 0;
    real total = 0;
};

// Everything a run owns: networks, their optimizers, the frozen prompt and
// encoder, and the step counter. Checkpoints restore this bit-exactly.
struct TrainState {
    TrainerOptions options;
    bool image_mode = true;

    std::shared_ptr<Generator> generator;
    std::shared_ptr<Discriminator> patch_disc;
    std::shared_ptr<GlobalDiscriminator> global_disc;  // image mode only
    std::shared_ptr<EntropyCritic> critic;
    std::shared_ptr<TransmissionRefiner> refiner;      // image mode only
    std::shared_ptr<PatchProjector> projector;         // image mode only
    std::shared_ptr<const EmbeddingEncoder> encoder;   // frozen
    std::shared_ptr<PerceptualDistance> perceptual;    // frozen
    PromptState prompt;                                // frozen during training

    nn::Adam opt_g, opt_d, opt_critic;
    int64_t step = 0;

    static TrainState make_image(const TrainerOptions& options,
                                 std::shared_ptr<const EmbeddingEncoder> encoder,
                                 PromptState prompt);
    static TrainState make_point(const TrainerOptions& options);
};

// mean ||x_ti - x1_pred||^2 - 2 * tau * (1 - t_i) * entropy_bound.
Tensor sb_loss(const Tensor& x_ti, const Tensor& x1_pred, real t_i, real tau,
               const EntropyCritic& critic);

// In-batch contrastive lower bound on the pair information: log B minus the
// cross-entropy of matching each state to its own prediction among the
// shuffled pairings. Never exceeds log(batch).
Tensor estimate_entropy(const Tensor& x_ti, const Tensor& x1_pred, const EntropyCritic& critic);

// Least-squares adversarial pair over every available discriminator.
// Generator loss drives fakes to the real target; discriminator loss sees
// detached fakes.
struct AdversarialLosses {
    Tensor g_loss;
    Tensor d_loss;
};
AdversarialLosses adversarial_losses(const Tensor& real_batch, const Tensor& fake_batch, real t_i,
                                     const TrainState& state);

// L = adv + lambda_sb*sb + lambda_p*p + lambda_nce*nce + lambda_phy*phy + lambda_hfd*hfd
Tensor total_loss(const LossComponents& components, const LossWeights& weights);

// One optimization step on unpaired batches: pick a grid index i in {1..N},
// roll the chain to x(t_i) without gradients, predict the endpoint with
// gradients, update discriminators first, then generator + critic.
StepStats train_step(TrainState& state, const Tensor& hazy_batch, const Tensor& clear_batch);

// Re-discretizes [0,1] into nfe uniform intervals and alternates endpoint
// prediction with bridge transitions; the last prediction is returned as-is.
Tensor infer(const Tensor& x0, int64_t nfe, const TrainState& state, Rng& rng);

// Checkpoint container round trip (format documented in the README).
void save_checkpoint(const std::string& path, const TrainState& state);
void load_checkpoint(const std::string& path, TrainState& state);

}  // namespace hazebridge
