#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "snp/errors.hpp"
#include "snp/guidance.hpp"
#include "support/counting_backend.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace snp;
using namespace snp::test;

namespace {

struct Fixture {
    ToyBackendSpec spec = small_toy_spec();
    ToyBackend backend{spec};
    DepthCondition depth = step_depth(spec.height, spec.width, spec.width / 2);
    PromptPair prompts{backend.embed_prompt("a cat"), backend.embed_prompt("blurry")};

    LatentState noise(uint64_t seed, int steps) const {
        LatentState s;
        s.latent = gaussian_latent(backend.latent_shape(1), seed);
        s.step_index = 0;
        s.total_steps = steps;
        return s;
    }
    GuidanceConfig config(double lambda, bool neg_control, RoutingMask mask) const {
        GuidanceConfig g;
        g.scale_s = 4.5;
        g.lambda_t = lambda;
        g.use_negative_control = neg_control;
        g.routing_mask = std::move(mask);
        return g;
    }
};

NoisePrediction wrap(Tensor4f t) { return NoisePrediction{std::move(t)}; }

}  // namespace

TEST_CASE("cfg_combine: direct evaluation with zero negative") {
    Shape4 s{1, 2, 4, 4};
    NoisePrediction out =
        cfg_combine(wrap(Tensor4f::full(s, 1.0f)), wrap(Tensor4f::zeros(s)), 7.5);
    for (float v : out.eps.data) CHECK(v == 7.5f);
}

TEST_CASE("cfg_combine: s = 1 collapses to eps_pos exactly") {
    std::mt19937 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor4f pos = random_tensor({2, 3, 5, 4}, rng, -10.0f, 10.0f);
        Tensor4f neg = random_tensor({2, 3, 5, 4}, rng, -10.0f, 10.0f);
        NoisePrediction out = cfg_combine(wrap(pos), wrap(neg), 1.0);
        CHECK(bit_equal(out.eps, pos));
    }
}

TEST_CASE("cfg_combine matches an elementwise scalar-loop oracle") {
    std::mt19937 rng(2);
    Tensor4f pos = random_tensor({2, 4, 8, 8}, rng);
    Tensor4f neg = random_tensor({2, 4, 8, 8}, rng);
    NoisePrediction out = cfg_combine(wrap(pos), wrap(neg), 3.0);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 4; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    double expect = neg.at(n, c, y, x) +
                                    3.0 * (pos.at(n, c, y, x) - neg.at(n, c, y, x));
                    double got = out.eps.at(n, c, y, x);
                    double denom = std::max(std::fabs(expect), 1e-9);
                    CHECK(std::fabs(got - expect) / denom <= 1e-6);
                }
}

TEST_CASE("cfg_combine is homogeneous") {
    std::mt19937 rng(3);
    for (float a : {0.25f, -2.0f, 17.0f}) {
        Tensor4f pos = random_tensor({1, 2, 6, 6}, rng);
        Tensor4f neg = random_tensor({1, 2, 6, 6}, rng);
        Tensor4f pos_scaled = pos, neg_scaled = neg;
        for (float& v : pos_scaled.data) v *= a;
        for (float& v : neg_scaled.data) v *= a;
        NoisePrediction lhs = cfg_combine(wrap(pos_scaled), wrap(neg_scaled), 5.0);
        NoisePrediction rhs = cfg_combine(wrap(pos), wrap(neg), 5.0);
        for (float& v : rhs.eps.data) v *= a;
        CHECK(max_rel_diff(lhs.eps, rhs.eps) <= 1e-6);
    }
}

TEST_CASE("cfg_combine contract violations") {
    Shape4 a{1, 2, 4, 4}, b{1, 2, 4, 5};
    CHECK_THROWS_WITH_AS(cfg_combine(wrap(Tensor4f::zeros(a)), wrap(Tensor4f::zeros(b)), 2.0),
                         doctest::Contains("[1,2,4,4]"), ContractViolation);
    CHECK_THROWS_WITH_AS(cfg_combine(wrap(Tensor4f::zeros(a)), wrap(Tensor4f::zeros(b)), 2.0),
                         doctest::Contains("[1,2,4,5]"), ContractViolation);
    CHECK_THROWS_AS(cfg_combine(wrap(Tensor4f::zeros(a)), wrap(Tensor4f::zeros(a)), 0.0),
                    ContractViolation);
    CHECK_THROWS_AS(cfg_combine(wrap(Tensor4f::zeros(a)), wrap(Tensor4f::zeros(a)), -1.0),
                    ContractViolation);
}

TEST_CASE("control_active gate convention") {
    CHECK(control_active(0, 50, 0.3));
    CHECK_FALSE(control_active(15, 50, 0.3));  // p = 0.3, strict boundary
    CHECK(control_active(19, 50, 0.4));
    CHECK_FALSE(control_active(20, 50, 0.4));
    for (int i = 0; i < 50; ++i) {
        CHECK(control_active(i, 50, 1.0));
        CHECK_FALSE(control_active(i, 50, 0.0));
    }
    CHECK_THROWS_AS(control_active(-1, 50, 0.5), ContractViolation);
    CHECK_THROWS_AS(control_active(50, 50, 0.5), ContractViolation);
    CHECK_THROWS_AS(control_active(0, 50, 1.5), ContractViolation);
}

TEST_CASE("gate active set grows with lambda") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double l1 = dist(rng), l2 = dist(rng);
        if (l1 > l2) std::swap(l1, l2);
        for (int i = 0; i < 37; ++i)
            if (control_active(i, 37, l1)) CHECK(control_active(i, 37, l2));
    }
}

TEST_CASE("snp_step reduces to the vanilla ControlNet step") {
    Fixture f;
    GuidanceConfig cfg = f.config(1.0, true, RoutingMask::all(f.backend.site_count()));
    LatentState state = f.noise(5, 10);

    NoisePrediction ours = snp_step(state, f.prompts, f.depth, cfg, f.backend);

    ControlFeatureSet cp = f.backend.control_encode(state.latent, 0, f.prompts.positive, f.depth);
    ControlFeatureSet cn = f.backend.control_encode(state.latent, 0, f.prompts.negative, f.depth);
    NoisePrediction ep = f.backend.predict(state.latent, 0, f.prompts.positive, &cp);
    NoisePrediction en = f.backend.predict(state.latent, 0, f.prompts.negative, &cn);
    NoisePrediction ref = cfg_combine(ep, en, cfg.scale_s);
    CHECK(bit_equal(ours.eps, ref.eps));
}

TEST_CASE("snp_step with empty routing equals plain CFG") {
    Fixture f;
    GuidanceConfig cfg = f.config(1.0, false, RoutingMask::none());
    LatentState state = f.noise(6, 10);

    NoisePrediction ours = snp_step(state, f.prompts, f.depth, cfg, f.backend);
    NoisePrediction ep = f.backend.predict(state.latent, 0, f.prompts.positive, nullptr);
    NoisePrediction en = f.backend.predict(state.latent, 0, f.prompts.negative, nullptr);
    NoisePrediction ref = cfg_combine(ep, en, cfg.scale_s);
    CHECK(bit_equal(ours.eps, ref.eps));
}

TEST_CASE("snp_step gate-inactive path is plain CFG") {
    Fixture f;
    GuidanceConfig cfg = f.config(0.0, true, RoutingMask::all(f.backend.site_count()));
    LatentState state = f.noise(7, 10);
    NoisePrediction ours = snp_step(state, f.prompts, f.depth, cfg, f.backend);
    NoisePrediction ep = f.backend.predict(state.latent, 0, f.prompts.positive, nullptr);
    NoisePrediction en = f.backend.predict(state.latent, 0, f.prompts.negative, nullptr);
    CHECK(bit_equal(ours.eps, cfg_combine(ep, en, cfg.scale_s).eps));
}

TEST_CASE("negative-branch control skip changes the output from step 0") {
    Fixture f;
    LatentState state = f.noise(8, 10);
    RoutingMask all = RoutingMask::all(f.backend.site_count());

    NoisePrediction skip = snp_step(state, f.prompts, f.depth, f.config(0.2, false, all), f.backend);
    NoisePrediction keep = snp_step(state, f.prompts, f.depth, f.config(0.2, true, all), f.backend);
    CHECK_FALSE(bit_equal(skip.eps, keep.eps));

    // At s = 1 the combine collapses to the positive branch, which both
    // variants share, so they agree exactly.
    GuidanceConfig c1 = f.config(0.2, false, all);
    c1.scale_s = 1.0;
    GuidanceConfig c2 = f.config(0.2, true, all);
    c2.scale_s = 1.0;
    NoisePrediction v1 = snp_step(state, f.prompts, f.depth, c1, f.backend);
    NoisePrediction v2 = snp_step(state, f.prompts, f.depth, c2, f.backend);
    ControlFeatureSet cp = f.backend.control_encode(state.latent, 0, f.prompts.positive, f.depth);
    NoisePrediction pure_pos = f.backend.predict(state.latent, 0, f.prompts.positive, &cp);
    CHECK(bit_equal(v1.eps, pure_pos.eps));
    CHECK(bit_equal(v2.eps, pure_pos.eps));
}

TEST_CASE("negative branch never invokes the control encoder when skipped") {
    Fixture f;
    CountingBackend probe(f.backend);
    GuidanceConfig cfg = f.config(0.5, false, RoutingMask::all(probe.site_count()));
    LatentState init = f.noise(9, 10);

    sample(init, f.prompts, f.depth, cfg, probe);

    int active_steps = 0;
    for (int i = 0; i < 10; ++i) active_steps += control_active(i, 10, cfg.lambda_t);
    CHECK(probe.encode_calls.size() == static_cast<size_t>(active_steps));
    for (const auto& call : probe.encode_calls) CHECK(call.embedding == f.prompts.positive);

    // With negative control on, both branches encode.
    probe.encode_calls.clear();
    cfg.use_negative_control = true;
    sample(init, f.prompts, f.depth, cfg, probe);
    CHECK(probe.encode_calls.size() == static_cast<size_t>(2 * active_steps));
}

TEST_CASE("masked-out sites reach the denoiser as zero features") {
    Fixture f;
    CountingBackend probe(f.backend);
    RoutingMask mask = RoutingMask::of({0, 5, 12});
    GuidanceConfig cfg = f.config(1.0, false, mask);
    LatentState state = f.noise(10, 4);

    snp_step(state, f.prompts, f.depth, cfg, probe);
    bool saw_control_predict = false;
    for (const auto& call : probe.predict_calls) {
        if (!call.with_control) continue;
        saw_control_predict = true;
        for (size_t site = 0; site < call.site_nonzero.size(); ++site)
            if (!mask.contains(static_cast<int>(site))) CHECK_FALSE(call.site_nonzero[site]);
    }
    CHECK(saw_control_predict);
}

TEST_CASE("sample: single-step run is one Euler update of the pure positive branch at s = 1") {
    Fixture f;
    GuidanceConfig cfg = f.config(1.0, true, RoutingMask::all(f.backend.site_count()));
    cfg.scale_s = 1.0;
    LatentState init = f.noise(11, 1);

    Tensor4f final_latent = sample(init, f.prompts, f.depth, cfg, f.backend);

    ControlFeatureSet cp = f.backend.control_encode(init.latent, 0, f.prompts.positive, f.depth);
    NoisePrediction eps = f.backend.predict(init.latent, 0, f.prompts.positive, &cp);
    Tensor4f expect = init.latent;
    for (size_t i = 0; i < expect.data.size(); ++i) expect.data[i] -= eps.eps.data[i];
    CHECK(bit_equal(final_latent, expect));
}

TEST_CASE("sample is deterministic") {
    Fixture f;
    GuidanceConfig cfg = f.config(0.4, false, RoutingMask::of({0, 1, 2, 12}));
    cfg.wcm = WcmConfig{};
    LatentState init = f.noise(12, 8);
    Tensor4f a = sample(init, f.prompts, f.depth, cfg, f.backend);
    Tensor4f b = sample(init, f.prompts, f.depth, cfg, f.backend);
    CHECK(bit_equal(a, b));
}

TEST_CASE("sample reproduces the independent vanilla ControlNet loop") {
    Fixture f;
    GuidanceConfig cfg = f.config(1.0, true, RoutingMask::all(f.backend.site_count()));
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        LatentState init = f.noise(seed, 12);
        Tensor4f ours = sample(init, f.prompts, f.depth, cfg, f.backend);
        Tensor4f ref = test::oracle::vanilla_controlnet_sample(
            f.backend, init.latent, f.prompts.positive, f.prompts.negative, f.depth, cfg.scale_s,
            12);
        CHECK(bit_equal(ours, ref));
    }
}

TEST_CASE("lambda = 0 and empty routing each degenerate to plain CFG sampling") {
    Fixture f;
    for (uint64_t seed : {4ull, 5ull}) {
        LatentState init = f.noise(seed, 12);
        Tensor4f ref = test::oracle::plain_cfg_sample(f.backend, init.latent, f.prompts.positive,
                                                      f.prompts.negative, 4.5, 12);

        GuidanceConfig gate_off = f.config(0.0, true, RoutingMask::all(f.backend.site_count()));
        CHECK(bit_equal(sample(init, f.prompts, f.depth, gate_off, f.backend), ref));

        GuidanceConfig no_routing = f.config(1.0, false, RoutingMask::none());
        CHECK(bit_equal(sample(init, f.prompts, f.depth, no_routing, f.backend), ref));
    }
}

TEST_CASE("sample aborts on non-finite latents naming the step") {
    // A backend whose prediction explodes at a chosen step.
    struct ExplodingBackend final : DenoiserBackend {
        const ToyBackend& inner;
        int bad_step;
        ExplodingBackend(const ToyBackend& b, int step) : inner(b), bad_step(step) {}
        std::string id() const override { return inner.id(); }
        int site_count() const override { return inner.site_count(); }
        const std::vector<Resolution>& site_resolutions() const override {
            return inner.site_resolutions();
        }
        const std::vector<int>& site_to_decoder_block() const override {
            return inner.site_to_decoder_block();
        }
        int middle_site() const override { return inner.middle_site(); }
        Shape4 latent_shape(int batch) const override { return inner.latent_shape(batch); }
        Resolution condition_resolution() const override { return inner.condition_resolution(); }
        std::vector<float> embed_prompt(const std::string& t) const override {
            return inner.embed_prompt(t);
        }
        NoisePrediction predict(const Tensor4f& z, int step,
                                const std::vector<float>& emb,
                                const ControlFeatureSet* control) const override {
            NoisePrediction p = inner.predict(z, step, emb, control);
            if (step == bad_step)
                for (float& v : p.eps.data) v = std::numeric_limits<float>::infinity();
            return p;
        }
        ControlFeatureSet control_encode(const Tensor4f& z, int step,
                                         const std::vector<float>& emb,
                                         const DepthCondition& d) const override {
            return inner.control_encode(z, step, emb, d);
        }
        Tensor4f scheduler_update(const Tensor4f& z, const NoisePrediction& eps, int step,
                                  int total) const override {
            return inner.scheduler_update(z, eps, step, total);
        }
    };

    Fixture f;
    ExplodingBackend bad(f.backend, 3);
    GuidanceConfig cfg = f.config(0.0, false, RoutingMask::none());
    LatentState init = f.noise(13, 8);
    CHECK_THROWS_WITH_AS(sample(init, f.prompts, f.depth, cfg, bad),
                         doctest::Contains("step 3"), NumericalError);
}

TEST_CASE("noise predictions preserve the latent shape in every regime") {
    Fixture f;
    LatentState state = f.noise(14, 5);
    for (double lambda : {0.0, 1.0})
        for (bool neg : {false, true}) {
            GuidanceConfig cfg = f.config(lambda, neg, RoutingMask::of({12}));
            NoisePrediction p = snp_step(state, f.prompts, f.depth, cfg, f.backend);
            CHECK(p.eps.shape == state.latent.shape);
        }
}

TEST_CASE("snp_step validates its inputs") {
    Fixture f;
    LatentState state = f.noise(15, 5);

    GuidanceConfig bad_lambda = f.config(1.4, false, RoutingMask::none());
    CHECK_THROWS_AS(snp_step(state, f.prompts, f.depth, bad_lambda, f.backend), ContractViolation);

    GuidanceConfig bad_mask = f.config(0.5, false, RoutingMask::of({99}));
    CHECK_THROWS_AS(snp_step(state, f.prompts, f.depth, bad_mask, f.backend), ContractViolation);

    PromptPair mismatched{f.prompts.positive, std::vector<float>(2, 0.0f)};
    GuidanceConfig ok = f.config(0.5, false, RoutingMask::none());
    CHECK_THROWS_AS(snp_step(state, mismatched, f.depth, ok, f.backend), ContractViolation);

    DepthCondition small = step_depth(4, 4, 2);
    GuidanceConfig gated = f.config(1.0, false, RoutingMask::none());
    CHECK_THROWS_AS(snp_step(state, f.prompts, small, gated, f.backend), ContractViolation);

    LatentState started = state;
    started.step_index = 1;
    started.total_steps = 5;
    CHECK_THROWS_AS(sample(started, f.prompts, f.depth, ok, f.backend), ContractViolation);
}
