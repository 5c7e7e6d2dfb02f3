#include "hazebridge/trainer.hpp"

#include <cmath>

#include "hazebridge/checkpoint.hpp"

namespace hazebridge {

namespace {

// fixed substream roles so draws never depend on evaluation order
enum RngRole : uint64_t {
    kRoleInitGen = 100,
    kRoleInitDisc = 101,
    kRoleInitGlobal = 102,
    kRoleInitCritic = 103,
    kRoleInitRefiner = 104,
    kRoleInitProjector = 105,
    kRoleTimeIndex = 1,
    kRoleChain = 2,
    kRoleNce = 3,
};

nn::ParamList generator_side_params(const TrainState& s) {
    nn::ParamList out;
    nn::append_params(out, "gen", s.generator->params(""));
    if (s.refiner) nn::append_params(out, "refiner", s.refiner->params(""));
    if (s.projector) nn::append_params(out, "proj", s.projector->params(""));
    return out;
}

nn::ParamList discriminator_side_params(const TrainState& s) {
    nn::ParamList out;
    nn::append_params(out, "patchd", s.patch_disc->params(""));
    if (s.global_disc) nn::append_params(out, "globald", s.global_disc->params(""));
    return out;
}

nn::ParamList critic_side_params(const TrainState& s) {
    nn::ParamList out;
    nn::append_params(out, "critic", s.critic->params(""));
    return out;
}

}  // namespace

TrainState TrainState::make_image(const TrainerOptions& options,
                                  std::shared_ptr<const EmbeddingEncoder> encoder,
                                  PromptState prompt) {
    TrainState s;
    s.options = options;
    s.image_mode = true;
    Rng rg = Rng::substream(options.seed, kRoleInitGen);
    s.generator = std::make_shared<ConvGenerator>(options.generator, rg);
    Rng rd = Rng::substream(options.seed, kRoleInitDisc);
    s.patch_disc = std::make_shared<PatchDiscriminator>(3, options.disc_channels, rd);
    Rng rgd = Rng::substream(options.seed, kRoleInitGlobal);
    s.global_disc = std::make_shared<GlobalDiscriminator>(encoder, rgd);
    Rng rc = Rng::substream(options.seed, kRoleInitCritic);
    s.critic = std::make_shared<EntropyCritic>(EntropyCritic::Kind::Image, 3,
                                               options.critic_hidden, rc);
    Rng rr = Rng::substream(options.seed, kRoleInitRefiner);
    s.refiner = std::make_shared<TransmissionRefiner>(8, options.dcp.t_min, rr);
    Rng rp = Rng::substream(options.seed, kRoleInitProjector);
    s.projector = std::make_shared<PatchProjector>(s.generator->feature_channels(),
                                                   options.nce_dim, rp);
    s.encoder = std::move(encoder);
    s.perceptual = std::make_shared<PerceptualDistance>(options.seed ^ 0x70657263ULL);
    s.prompt = std::move(prompt);

    s.opt_g = nn::Adam(generator_side_params(s), options.lr, options.adam_beta1,
                       options.adam_beta2);
    s.opt_d = nn::Adam(discriminator_side_params(s), options.lr, options.adam_beta1,
                       options.adam_beta2);
    s.opt_critic = nn::Adam(critic_side_params(s), options.lr, options.adam_beta1,
                            options.adam_beta2);
    return s;
}

TrainState TrainState::make_point(const TrainerOptions& options) {
    TrainState s;
    s.options = options;
    s.image_mode = false;
    Rng rg = Rng::substream(options.seed, kRoleInitGen);
    s.generator = std::make_shared<MlpGenerator>(2, options.point_hidden, rg);
    Rng rd = Rng::substream(options.seed, kRoleInitDisc);
    s.patch_disc = std::make_shared<PointDiscriminator>(2, options.point_hidden, rd);
    Rng rc = Rng::substream(options.seed, kRoleInitCritic);
    s.critic = std::make_shared<EntropyCritic>(EntropyCritic::Kind::Point, 2,
                                               options.point_hidden / 2, rc);
    s.opt_g = nn::Adam(generator_side_params(s), options.lr, options.adam_beta1,
                       options.adam_beta2);
    s.opt_d = nn::Adam(discriminator_side_params(s), options.lr, options.adam_beta1,
                       options.adam_beta2);
    s.opt_critic = nn::Adam(critic_side_params(s), options.lr, options.adam_beta1,
                            options.adam_beta2);
    return s;
}

Tensor estimate_entropy(const Tensor& x_ti, const Tensor& x1_pred, const EntropyCritic& critic) {
    const int64_t B = x_ti.shape()[0];
    if (B < 2) throw ContractError("estimate_entropy: need batch >= 2 for negatives");
    Tensor scores = critic.score_matrix(x_ti, x1_pred);  // [B,B], matched pairs on diagonal
    Tensor logp = log_softmax(scores, 1);
    std::vector<int64_t> diag(B);
    for (int64_t i = 0; i < B; ++i) diag[i] = i * B + i;
    Tensor matched = index_select(reshape(logp, {B * B}), 0, diag);
    return std::log(static_cast<real>(B)) + mean(matched);
}

Tensor sb_loss(const Tensor& x_ti, const Tensor& x1_pred, real t_i, real tau,
               const EntropyCritic& critic) {
    if (x_ti.shape() != x1_pred.shape()) throw ShapeError("sb_loss: batch shapes differ");
    Tensor transport = mean(square(x_ti - x1_pred));
    const real entropy_weight = 2 * tau * (real(1) - t_i);
    if (entropy_weight == 0) return transport;
    return transport - entropy_weight * estimate_entropy(x_ti, x1_pred, critic);
}

AdversarialLosses adversarial_losses(const Tensor& real_batch, const Tensor& fake_batch, real t_i,
                                     const TrainState& state) {
    AdversarialLosses out;
    Tensor fake_detached = fake_batch.detach();

    Tensor d_real = state.patch_disc->forward(real_batch, t_i);
    Tensor d_fake = state.patch_disc->forward(fake_detached, t_i);
    out.d_loss = mean(square(d_real - real(1))) + mean(square(d_fake));
    out.g_loss = mean(square(state.patch_disc->forward(fake_batch, t_i) - real(1)));

    if (state.global_disc) {
        Tensor g_real = state.global_disc->forward(real_batch);
        Tensor g_fake = state.global_disc->forward(fake_detached);
        out.d_loss = out.d_loss + mean(square(g_real - real(1))) + mean(square(g_fake));
        out.g_loss = out.g_loss + mean(square(state.global_disc->forward(fake_batch) - real(1)));
    }
    return out;
}

Tensor total_loss(const LossComponents& c, const LossWeights& w) {
    Tensor total = c.adv;
    total = total + w.lambda_sb * c.sb;
    total = total + w.lambda_p * c.p;
    total = total + w.lambda_nce * c.nce;
    total = total + w.lambda_phy * c.phy;
    total = total + w.lambda_hfd * c.hfd;
    return total;
}

StepStats train_step(TrainState& state, const Tensor& hazy_batch, const Tensor& clear_batch) {
    const TrainerOptions& opt = state.options;
    const BridgeSchedule& sched = opt.schedule;
    const uint64_t seed = opt.seed;
    const uint64_t step = static_cast<uint64_t>(state.step);
    StepStats stats;
    stats.step = state.step;

    // pick a grid index i uniformly from {1..N}
    Rng rng_i = Rng::substream(seed, step, kRoleTimeIndex);
    const int64_t i = 1 + rng_i.uniform_int(sched.n_intervals);
    stats.time_index = i;
    const real t_i = sched.time_at(i);

    // roll the chain to x(t_i); transitions are data, not graph
    Rng rng_chain = Rng::substream(seed, step, kRoleChain);
    TimedPredictor predictor = [&](const Tensor& x, real t) {
        return state.generator->forward(x, t);
    };
    Tensor x_ti = roll_chain(hazy_batch, predictor, i, sched, rng_chain);

    // endpoint prediction, with gradients and encoder features
    std::vector<Tensor> feats_in;
    Tensor x1_pred = state.generator->forward_with_features(x_ti, t_i,
                                                            state.image_mode ? &feats_in : nullptr);

    // ---- discriminators first ----
    {
        AdversarialLosses adv = adversarial_losses(clear_batch, x1_pred, t_i, state);
        state.opt_d.zero_grad();
        backward(adv.d_loss);
        state.opt_d.step();
        stats.d_loss = adv.d_loss.item();
    }

    // ---- critic tightens its bound on detached pairs ----
    {
        Tensor bound = estimate_entropy(x_ti, x1_pred.detach(), *state.critic);
        state.opt_critic.zero_grad();
        backward(-bound);
        state.opt_critic.step();
    }

    // ---- generator side, against the updated discriminators ----
    LossComponents comps;
    comps.adv = adversarial_losses(clear_batch, x1_pred, t_i, state).g_loss;
    comps.sb = sb_loss(x_ti, x1_pred, t_i, sched.tau, *state.critic);
    if (state.image_mode) {
        comps.p = prompt_guidance_loss(hazy_batch, x1_pred, state.prompt, *state.encoder,
                                       opt.prompt_loss_both_terms);

        Rng rng_nce = Rng::substream(seed, step, kRoleNce);
        auto locations = sample_feature_locations(feats_in, opt.nce_locations, rng_nce);
        auto feats_out = state.generator->encode(x1_pred, t_i);
        PatchFeatureSet set_in =
            sample_patch_features(feats_in, locations, *state.projector, opt.nce_temperature);
        PatchFeatureSet set_out =
            sample_patch_features(feats_out, locations, *state.projector, opt.nce_temperature);
        comps.nce = patch_nce_loss(set_in, set_out);

        Tensor coarse_t, A;
        {
            NoGradGuard ng;  // physics estimates are measurements of the input
            Tensor dark = dark_channel(hazy_batch, opt.dcp.patch);
            A = estimate_atmospheric_light(hazy_batch, dark);
            coarse_t = estimate_transmission(hazy_batch, A, opt.dcp.omega, opt.dcp.patch,
                                             opt.dcp.t_min);
        }
        Tensor t_ref = state.refiner->forward(coarse_t);
        comps.phy = physical_prior_loss(hazy_batch, x1_pred, t_ref, A, *state.perceptual);
        comps.hfd = hfd_loss(hazy_batch, x1_pred);
    } else {
        comps.p = Tensor::scalar(0);
        comps.nce = Tensor::scalar(0);
        comps.phy = Tensor::scalar(0);
        comps.hfd = Tensor::scalar(0);
    }

    Tensor total = total_loss(comps, opt.weights);
    state.opt_g.zero_grad();
    backward(total);
    state.opt_g.step();

    {
        NoGradGuard ng;
        stats.entropy = estimate_entropy(x_ti, x1_pred.detach(), *state.critic).item();
    }
    stats.g_adv = comps.adv.item();
    stats.sb = comps.sb.item();
    stats.p = comps.p.item();
    stats.nce = comps.nce.item();
    stats.phy = comps.phy.item();
    stats.hfd = comps.hfd.item();
    stats.total = total.item();

    ++state.step;
    return stats;
}

Tensor infer(const Tensor& x0, int64_t nfe, const TrainState& state, Rng& rng) {
    const int64_t N = state.options.schedule.n_intervals;
    if (nfe < 1 || nfe > N)
        throw ContractError("infer: nfe must be in 1.." + std::to_string(N) + ", got " +
                            std::to_string(nfe));
    NoGradGuard ng;
    Tensor x = x0;
    for (int64_t k = 0; k < nfe; ++k) {
        const real t = static_cast<real>(k) / static_cast<real>(nfe);
        Tensor pred = state.generator->forward(x, t);
        if (k == nfe - 1) return pred;  // endpoint is pinned: s(1) = 1
        x = markov_step(x, pred, t, static_cast<real>(k + 1) / static_cast<real>(nfe),
                        state.options.schedule.tau, rng);
    }
    return x;  // unreachable for nfe >= 1
}

// ---- checkpointing --------------------------------------------------------------

namespace {

void append_optimizer(std::vector<NamedTensor>& items, const std::string& prefix,
                      const nn::Adam& opt) {
    const auto& m = opt.moment1();
    const auto& v = opt.moment2();
    for (size_t k = 0; k < opt.params().size(); ++k) {
        const Shape& shape = opt.params()[k].tensor.shape();
        items.push_back({prefix + ".m." + opt.params()[k].name, Tensor::from_data(shape, m[k])});
        items.push_back({prefix + ".v." + opt.params()[k].name, Tensor::from_data(shape, v[k])});
    }
    items.push_back({prefix + ".steps", Tensor::scalar(static_cast<real>(opt.step_count()))});
}

void restore_optimizer(const std::vector<NamedTensor>& items, const std::string& prefix,
                       nn::Adam& opt) {
    auto& m = opt.moment1();
    auto& v = opt.moment2();
    for (size_t k = 0; k < opt.params().size(); ++k) {
        const Tensor& tm = find_tensor(items, prefix + ".m." + opt.params()[k].name);
        const Tensor& tv = find_tensor(items, prefix + ".v." + opt.params()[k].name);
        if (tm.numel() != static_cast<int64_t>(m[k].size()))
            throw IoError("checkpoint: optimizer moment size mismatch");
        m[k].assign(tm.data().begin(), tm.data().end());
        v[k].assign(tv.data().begin(), tv.data().end());
    }
    opt.set_step_count(static_cast<int64_t>(find_tensor(items, prefix + ".steps").item()));
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
    std::vector<NamedTensor> items;
    auto add_params = [&](const nn::ParamList& params) {
        for (const auto& e : params) items.push_back({e.name, e.tensor.detach()});
    };
    add_params(generator_side_params(state));
    add_params(discriminator_side_params(state));
    add_params(critic_side_params(state));
    if (state.prompt.vector.defined()) {
        items.push_back({"prompt.vector", state.prompt.vector.detach()});
        items.push_back({"prompt.steps", Tensor::scalar(static_cast<real>(state.prompt.steps_trained))});
        items.push_back({"prompt.final_loss", Tensor::scalar(state.prompt.final_loss)});
    }
    append_optimizer(items, "opt.g", state.opt_g);
    append_optimizer(items, "opt.d", state.opt_d);
    append_optimizer(items, "opt.critic", state.opt_critic);
    items.push_back({"meta.step", Tensor::scalar(static_cast<real>(state.step))});
    items.push_back({"meta.seed", Tensor::scalar(static_cast<real>(state.options.seed))});
    items.push_back({"meta.image_mode", Tensor::scalar(state.image_mode ? 1 : 0)});
    save_tensor_container(path, items);
}

void load_checkpoint(const std::string& path, TrainState& state) {
    auto items = load_tensor_container(path);
    const bool image_mode = find_tensor(items, "meta.image_mode").item() != 0;
    if (image_mode != state.image_mode)
        throw IoError("checkpoint: mode mismatch (image vs point)");

    auto restore_params = [&](nn::ParamList params) {
        for (auto& e : params) assign_tensor(e.tensor, find_tensor(items, e.name));
    };
    restore_params(generator_side_params(state));
    restore_params(discriminator_side_params(state));
    restore_params(critic_side_params(state));
    if (state.prompt.vector.defined()) {
        assign_tensor(state.prompt.vector, find_tensor(items, "prompt.vector"));
        state.prompt.steps_trained =
            static_cast<int64_t>(find_tensor(items, "prompt.steps").item());
        state.prompt.final_loss = find_tensor(items, "prompt.final_loss").item();
    }
    restore_optimizer(items, "opt.g", state.opt_g);
    restore_optimizer(items, "opt.d", state.opt_d);
    restore_optimizer(items, "opt.critic", state.opt_critic);
    state.step = static_cast<int64_t>(find_tensor(items, "meta.step").item());
}

}  // namespace hazebridge
