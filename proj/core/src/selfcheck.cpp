#include "hazebridge/selfcheck.hpp"

#include <cmath>
#include <sstream>

#include "hazebridge/bridge.hpp"
#include "hazebridge/haze.hpp"
#include "hazebridge/metrics.hpp"
#include "hazebridge/nets.hpp"
#include "hazebridge/regularizers.hpp"
#include "hazebridge/sinkhorn.hpp"
#include "hazebridge/trainer.hpp"

namespace hazebridge {

namespace {

std::string fmt(real v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Clear image whose dark channel is exactly zero in every 15-window: one
// zeroed channel per 8x8 block, so every (clamped) window contains a zero.
// This is the validity condition the dark-channel estimators assume.
Tensor dcp_friendly_image(int64_t size, Rng& rng) {
    Tensor J = Tensor::uniform({1, 3, size, size}, real(0.1), real(0.9), rng);
    auto v = J.mutable_data();
    for (int64_t by = 0; by < size; by += 8)
        for (int64_t bx = 0; bx < size; bx += 8) {
            const int64_t y = by + rng.uniform_int(std::min<int64_t>(8, size - by));
            const int64_t x = bx + rng.uniform_int(std::min<int64_t>(8, size - bx));
            v[(rng.uniform_int(3) * size + y) * size + x] = real(0);
        }
    return J;
}

// Monte Carlo chain marginals with an ideal endpoint predictor vs the
// closed-form pinned law, pooled over a small state dimension.
SelfCheckReport::Item check_bridge_marginals(uint64_t seed) {
    const int64_t samples = 100000, dim = 8;
    const real tau = real(0.05);
    BridgeSchedule sched(5, tau);
    Rng init = Rng::substream(seed, 0xb0);
    Tensor x0 = Tensor::randn({dim}, init);
    Tensor x1 = Tensor::randn({dim}, init);
    TimedPredictor ideal = [&](const Tensor&, real) { return x1; };

    real worst = 0;
    for (int64_t i = 1; i < sched.n_intervals; ++i) {
        real sum = 0, sum_sq = 0;
        std::vector<real> mean_acc(dim, 0);
        for (int64_t s = 0; s < samples; ++s) {
            Rng rng = Rng::substream(seed, static_cast<uint64_t>(s), static_cast<uint64_t>(i));
            Tensor xt = roll_chain(x0, ideal, i, sched, rng);
            auto xv = xt.data();
            GaussianParams ref = bridge_posterior(x0, x1, sched.time_at(i), tau);
            auto mv = ref.mean.data();
            for (int64_t d = 0; d < dim; ++d) {
                const real centered = xv[d] - mv[d];
                sum += centered;
                sum_sq += centered * centered;
                mean_acc[d] += xv[d];
            }
        }
        const real n = static_cast<real>(samples * dim);
        const real var = sum_sq / n - (sum / n) * (sum / n);
        GaussianParams ref = bridge_posterior(x0, x1, sched.time_at(i), tau);
        worst = std::max(worst, std::abs(var - ref.variance) / ref.variance);
        auto mv = ref.mean.data();
        for (int64_t d = 0; d < dim; ++d) {
            const real m = mean_acc[d] / static_cast<real>(samples);
            // mean error scaled by the marginal std so "relative" is meaningful
            worst = std::max(worst, std::abs(m - mv[d]) / std::sqrt(ref.variance));
        }
    }
    return {"bridge marginals (MC vs closed form)", worst < real(0.01),
            "worst relative error " + fmt(worst)};
}

SelfCheckReport::Item check_sinkhorn_vs_brute(uint64_t seed) {
    real worst_gap = 0, worst_violation = 0;
    for (int64_t n = 4; n <= 6; ++n) {
        Rng rng = Rng::substream(seed, 0x07, static_cast<uint64_t>(n));
        std::vector<real> cost(n * n);
        for (auto& c : cost) c = rng.uniform(real(0), real(1));
        std::vector<real> marg(n, real(1) / static_cast<real>(n));
        DiscreteCoupling plan = sinkhorn(cost, n, n, marg, marg, real(1e-3), 1000000, real(5e-7));
        DiscreteCoupling exact = brute_force_ot(cost, n);
        worst_gap = std::max(worst_gap,
                             std::abs(transport_cost(plan, cost) - transport_cost(exact, cost)));
        worst_violation = std::max(worst_violation, plan.marginal_violation());
    }
    return {"entropic transport vs enumeration", worst_gap < real(1e-2) && worst_violation < real(1e-6),
            "cost gap " + fmt(worst_gap) + ", marginal violation " + fmt(worst_violation)};
}

SelfCheckReport::Item check_loss_gradients(uint64_t seed) {
    const real eps = real(1e-4), tol = real(1e-4);
    Rng rng = Rng::substream(seed, 0x9d);
    const Shape img_shape = {2, 3, 8, 8};
    real worst = 0;
    std::vector<std::string> names;

    // A step that straddles a relu kink poisons the central difference even
    // when backward is exact; a failure is retried with a finer step before
    // it counts.
    auto checked = [&](const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
        real err = grad_check(f, x, eps);
        if (err >= tol) err = grad_check(f, x, eps / 10);
        return err;
    };

    auto record = [&](const char* name, real err) {
        if (err > worst) worst = err;
        if (err >= tol) names.push_back(std::string(name) + "=" + fmt(err));
    };

    Tensor x0 = Tensor::uniform(img_shape, real(0.05), real(0.95), rng);

    // adversarial generator term through a fresh patch critic
    {
        Rng r = Rng::substream(seed, 0x9d, 1);
        PatchDiscriminator disc(3, 8, r);
        auto f = [&](const Tensor& x) { return mean(square(disc.forward(x, real(0.4)) - real(1))); };
        record("adv", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }
    // transport + entropy term
    {
        Rng r = Rng::substream(seed, 0x9d, 2);
        EntropyCritic critic(EntropyCritic::Kind::Image, 3, 8, r);
        auto f = [&](const Tensor& x) { return sb_loss(x0, x, real(0.4), real(0.05), critic); };
        record("sb", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }
    // prompt guidance
    {
        EmbeddingEncoder enc(seed);
        Rng r = Rng::substream(seed, 0x9d, 3);
        PromptState prompt = init_prompt(enc, r);
        auto f = [&](const Tensor& x) { return prompt_guidance_loss(x0, x, prompt, enc, true); };
        record("p", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }
    // contrastive patches
    {
        Rng r = Rng::substream(seed, 0x9d, 4);
        GeneratorDesc desc;
        desc.channels = 8;
        desc.res_blocks = 1;
        ConvGenerator gen(desc, r);
        PatchProjector proj(gen.feature_channels(), 16, r);
        auto locs = sample_feature_locations(gen.encode(x0, real(0.4)), 6, r);
        auto f = [&](const Tensor& x) {
            auto set_in = sample_patch_features(gen.encode(x0, real(0.4)), locs, proj, real(0.07));
            auto set_out = sample_patch_features(gen.encode(x, real(0.4)), locs, proj, real(0.07));
            return patch_nce_loss(set_in, set_out);
        };
        record("nce", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }
    // physical reconstruction
    {
        PerceptualDistance perceptual(seed);
        Tensor dark = dark_channel(x0, 3);
        Tensor A = estimate_atmospheric_light(x0, dark);
        Tensor t_ref = estimate_transmission(x0, A, real(0.95), 3, real(0.1));
        auto f = [&](const Tensor& x) { return physical_prior_loss(x0, x, t_ref, A, perceptual); };
        record("phy", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }
    // high-frequency trio
    {
        auto f = [&](const Tensor& x) { return hfd_loss(x0, x); };
        record("hfd", checked(f, Tensor::uniform(img_shape, real(0.1), real(0.9), rng)));
    }

    std::string detail = "worst max-rel error " + fmt(worst);
    for (const auto& n : names) detail += " [" + n + "]";
    return {"loss gradients vs finite differences", worst < tol, detail};
}

SelfCheckReport::Item check_dcp_roundtrip(uint64_t seed) {
    real worst = real(1e9);
    for (int64_t k = 0; k < 5; ++k) {
        Rng rng = Rng::substream(seed, 0xdc, static_cast<uint64_t>(k));
        Tensor J = dcp_friendly_image(32, rng);
        const real a = rng.uniform(real(0.85), real(0.95));
        {
            // a patch at the light's own color pins the light estimate
            auto v = J.mutable_data();
            for (int64_t y = 0; y < 8; ++y)
                for (int64_t x = 0; x < 8; ++x)
                    for (int64_t c = 0; c < 3; ++c) v[(c * 32 + y) * 32 + x] = a;
        }
        const real t0 = rng.uniform(real(0.5), real(0.8));
        Tensor hazy = apply_asm(J, Tensor::full({1, 1, 32, 32}, t0),
                                Tensor::from_data({1, 3}, {a, a, a}));
        DcpResult res = dcp_dehaze(hazy);
        worst = std::min(worst, psnr(res.dehazed, J));
    }
    return {"scattering-model inversion round trip", worst >= real(30),
            "worst PSNR " + fmt(worst) + " dB"};
}

}  // namespace

SelfCheckReport run_oracle_checks(uint64_t seed) {
    SelfCheckReport report;
    report.items.push_back(check_bridge_marginals(seed));
    report.items.push_back(check_sinkhorn_vs_brute(seed));
    report.items.push_back(check_loss_gradients(seed));
    report.items.push_back(check_dcp_roundtrip(seed));
    return report;
}

}  // namespace hazebridge
