#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "mogen/checkpoint.hpp"
#include "mogen/rng.hpp"

using namespace mogen;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.d = 16;
    cfg.d_net = 16;
    cfg.l_emb = 8;
    cfg.l_phr = 4;
    cfg.l_str = 4;
    cfg.n_blocks = 3;
    cfg.layout_block = 2;
    cfg.image_size = 16;
    cfg.patch = 4;
    cfg.n_heads = 2;
    cfg.t_steps = 40;
    cfg.vocab = 256;
    cfg.struct_patch = 8;
    cfg.object_patch = 16;
    return cfg;
}

Tensor random_flat(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return Tensor::from_data({n}, std::move(v));
}

}  // namespace

TEST_CASE("make_schedule: endpoints, monotonicity, boundaries") {
    NoiseSchedule s = make_schedule(200);
    CHECK(s.betas.front() == 1e-4);
    CHECK(s.betas.back() == 0.02);
    for (size_t t = 1; t < s.steps(); ++t) {
        CHECK(s.betas[t] > s.betas[t - 1]);
        CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
        CHECK(s.betas[t] < 1.0);
        CHECK(s.betas[t] > 0.0);
    }

    NoiseSchedule one = make_schedule(1);
    CHECK(one.steps() == 1);
    CHECK(one.betas[0] == 1e-4);

    CHECK_THROWS_AS(make_schedule(0), ContractError);

    // at T=400 the terminal signal level is below 5%
    NoiseSchedule long_s = make_schedule(400);
    CHECK(long_s.alpha_bars.back() < 0.05);
}

TEST_CASE("q_sample: zero-noise, zero-signal, Monte-Carlo variance") {
    NoiseSchedule s = make_schedule(100);
    const size_t t = 37;
    const double ab = s.alpha_bars[t];

    Tensor x0 = random_flat(64, 1);
    Tensor zero = Tensor::zeros({64});
    Tensor xt = q_sample(x0, t, zero, s);
    for (size_t i = 0; i < 64; ++i)
        CHECK(xt.at(i) == doctest::Approx(std::sqrt(ab) * x0.at(i)).epsilon(1e-12));

    Tensor eps = random_flat(64, 2);
    Tensor xt2 = q_sample(zero, t, eps, s);
    for (size_t i = 0; i < 64; ++i)
        CHECK(xt2.at(i) == doctest::Approx(std::sqrt(1.0 - ab) * eps.at(i)).epsilon(1e-12));

    SUBCASE("empirical variance matches 1 - alpha_bar within 3 standard errors") {
        const size_t n = 10000;
        Tensor x0_const = Tensor::zeros({n});
        Tensor noise = random_flat(n, 3);
        Tensor sample = q_sample(x0_const, t, noise, s);
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += sample.at(i);
        mean /= n;
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = sample.at(i) - mean;
            var += d * d;
        }
        var /= (n - 1);
        const double expected = 1.0 - ab;
        const double se = expected * std::sqrt(2.0 / (n - 1));
        CHECK(std::fabs(var - expected) <= 3.0 * se);
    }

    CHECK_THROWS_AS(q_sample(x0, 100, zero, s), ContractError);
    CHECK_THROWS_AS(q_sample(x0, 0, random_flat(32, 4), s), DimensionError);
}

TEST_CASE("ddim timesteps: boundaries and ordering") {
    CHECK(ddim_timesteps(200, 1) == std::vector<size_t>{199});
    auto ts = ddim_timesteps(200, 10);
    CHECK(ts.size() == 10);
    CHECK(ts.front() == 199);
    CHECK(ts.back() == 0);
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    CHECK_THROWS_AS(ddim_timesteps(10, 11), ContractError);
    CHECK_THROWS_AS(ddim_timesteps(10, 0), ContractError);
}

TEST_CASE("ddim with the all-zero stub denoiser follows the closed form") {
    NoiseSchedule s = make_schedule(80);
    const size_t image_size = 8, n = image_size * image_size * 3;
    auto stub = [n](const Tensor&, size_t) { return Tensor::zeros({n}); };

    std::vector<std::vector<double>> traj;
    ddim_sample_raw(stub, image_size, 12, 77, s, &traj);
    auto ts = ddim_timesteps(s.steps(), 12);
    REQUIRE(traj.size() == ts.size() + 1);

    // per-step identity x_prev = sqrt(abar_prev / abar_t) * x_t
    for (size_t i = 0; i < ts.size(); ++i) {
        const double ab_t = s.alpha_bars[ts[i]];
        const double ab_p = i + 1 < ts.size() ? s.alpha_bars[ts[i + 1]] : 1.0;
        const double factor = std::sqrt(ab_p / ab_t);
        for (size_t j = 0; j < n; ++j)
            CHECK(std::fabs(traj[i + 1][j] - factor * traj[i][j]) < 1e-10);
    }
    // telescoped final state equals the initial noise / sqrt(abar_{T-1})
    const double total = 1.0 / std::sqrt(s.alpha_bars[ts[0]]);
    for (size_t j = 0; j < n; ++j)
        CHECK(std::fabs(traj.back()[j] - total * traj.front()[j]) < 1e-10);

    SUBCASE("single-step jump matches the forced formula") {
        std::vector<std::vector<double>> t1;
        ddim_sample_raw(stub, image_size, 1, 77, s, &t1);
        const double f = 1.0 / std::sqrt(s.alpha_bars.back());
        for (size_t j = 0; j < n; ++j)
            CHECK(std::fabs(t1.back()[j] - f * t1.front()[j]) < 1e-12);
    }

    SUBCASE("same seed gives byte-identical images") {
        Image a = ddim_sample_raw(stub, image_size, 12, 123, s, nullptr);
        Image b = ddim_sample_raw(stub, image_size, 12, 123, s, nullptr);
        CHECK(a == b);
        CHECK(ppm_bytes(a) == ppm_bytes(b));
    }
}

TEST_CASE("denoiser_forward: contract shape and gating consequences") {
    ModelConfig cfg = tiny_cfg();
    ModelWeights w = ModelWeights::init(cfg, 5);
    // move every weight off its structured init so the zero-initialized
    // output head does not mask conditioning effects
    Rng jitter(55);
    for (auto& p : w.all_params()) {
        double* d = const_cast<Tensor&>(p.t).mutable_data();
        for (size_t i = 0; i < p.t.size(); ++i) d[i] += jitter.uniform(-0.2, 0.2);
    }
    const size_t npix = cfg.image_size * cfg.image_size * 3;
    Tensor x = random_flat(npix, 6);

    SemanticBundle cond;
    cond.t_glob = Tensor::from_data({cfg.l_emb, cfg.d}, random_flat(cfg.l_emb * cfg.d, 7).values());
    cond.t_phr = Tensor::from_data({cfg.l_phr, cfg.d}, random_flat(cfg.l_phr * cfg.d, 8).values());

    Tensor eps = denoiser_forward(x, 11, cond, nullptr, w);
    CHECK(eps.size() == npix);

    SUBCASE("changing t_phr leaves activations before the layout block bit-identical") {
        SemanticBundle cond2 = cond;
        cond2.t_phr =
            Tensor::from_data({cfg.l_phr, cfg.d}, random_flat(cfg.l_phr * cfg.d, 9).values());
        DenoiseProbe p1, p2;
        p1.block = cfg.layout_block - 1;
        p2.block = cfg.layout_block - 1;
        denoiser_forward(x, 11, cond, nullptr, w, &p1);
        denoiser_forward(x, 11, cond2, nullptr, w, &p2);
        REQUIRE(p1.rsa.v_glob.defined());
        CHECK(std::memcmp(p1.rsa.v_glob.data(), p2.rsa.v_glob.data(),
                          p1.rsa.v_glob.size() * 8) == 0);
        // while the output itself differs
        Tensor eps2 = denoiser_forward(x, 11, cond2, nullptr, w);
        CHECK(std::memcmp(eps.data(), eps2.data(), eps.size() * 8) != 0);
    }

    SUBCASE("zero-initialized intent layers leave the output identical") {
        // fresh guidance weights: interaction outputs are still exactly zero
        for (auto& b : w.backbone.blocks) {
            b.cross_intent.w_out = Tensor::zeros(b.cross_intent.w_out.shape());
            b.cross_intent.b_out = Tensor::zeros(b.cross_intent.b_out.shape());
        }
        Tensor eps = denoiser_forward(x, 11, cond, nullptr, w);
        AmgWeights fresh = AmgWeights::init(cfg, 99);
        Tensor c_unif =
            Tensor::from_data({3, cfg.d}, random_flat(3 * cfg.d, 10).values());
        StructuredIntent intent = adaptive_control(c_unif, fresh);
        Tensor eps_with = denoiser_forward(x, 11, cond, &intent, w);
        for (size_t i = 0; i < eps.size(); ++i) CHECK(eps.at(i) == eps_with.at(i));
    }

    SUBCASE("bad input size is a dimension error") {
        CHECK_THROWS_AS(denoiser_forward(random_flat(npix - 3, 11), 1, cond, nullptr, w),
                        DimensionError);
    }
}

TEST_CASE("fresh model predicts zero noise, so the training loss starts near one") {
    ModelConfig cfg = tiny_cfg();
    ModelWeights w = ModelWeights::init(cfg, 12);
    const size_t npix = cfg.image_size * cfg.image_size * 3;
    SemanticBundle cond;
    cond.t_glob = Tensor::from_data({cfg.l_emb, cfg.d}, random_flat(cfg.l_emb * cfg.d, 13).values());
    Tensor eps_hat = denoiser_forward(random_flat(npix, 14), 3, cond, nullptr, w);
    for (size_t i = 0; i < eps_hat.size(); ++i) CHECK(eps_hat.at(i) == 0.0);
}

TEST_CASE("checkpoint round trip preserves every segment bit-exactly") {
    ModelConfig cfg = tiny_cfg();
    ModelWeights w = ModelWeights::init(cfg, 31);
    // move weights off their init so the round trip is non-trivial
    Rng rng(17);
    for (auto& p : w.all_params()) {
        double* d = const_cast<Tensor&>(p.t).mutable_data();
        for (size_t i = 0; i < p.t.size(); ++i) d[i] += rng.uniform(-1.0, 1.0);
    }

    const std::string path = (std::filesystem::temp_directory_path() / "mogen_ck_test.ckpt").string();
    TrainerState st;
    st.step = 42;
    st.slots.push_back({"backbone.patch_in.w", std::vector<double>(w.backbone.patch_in.w.size(), 0.5),
                        std::vector<double>(w.backbone.patch_in.w.size(), 0.25)});
    save_checkpoint(path, w, StageTag::rsa, &st);

    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.stage == StageTag::rsa);
    CHECK(ck.weights.cfg.d == cfg.d);
    CHECK(ck.weights.cfg.layout_block == cfg.layout_block);
    for (const auto& seg : ModelWeights::segment_names())
        CHECK(segment_bytes(w, seg) == segment_bytes(ck.weights, seg));
    REQUIRE(ck.trainer.has_value());
    CHECK(ck.trainer->step == 42);
    REQUIRE(ck.trainer->slots.size() == 1);
    CHECK(ck.trainer->slots[0].m[0] == 0.5);

    SUBCASE("missing file and corrupt magic raise errors") {
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.ckpt"), MogenError);
        std::ofstream bad(path, std::ios::binary);
        bad << "NOTMAGIC";
        bad.close();
        CHECK_THROWS_AS(load_checkpoint(path), MogenError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("generate: empty signal set bypasses guidance bit-exactly") {
    ModelConfig cfg = tiny_cfg();
    ModelWeights w = ModelWeights::init(cfg, 61);
    NoiseSchedule sched = make_schedule(cfg.t_steps);

    GenRequest req;
    req.prompt = "a scene with 1 red circle";
    req.n_steps = 6;
    req.seed = 5;
    const Image with_empty = generate(req, w, CondMode::rsa, sched);

    // reference: the RSA-only path, assembled manually with no AMG anywhere
    TextEmbedding emb = text_encode(req.prompt, cfg, w.enc.text_emb);
    SemanticBundle cond = parse_text(emb.t_emb, w.rsa);
    const Image rsa_only = ddim_sample(cond, nullptr, req.n_steps, req.seed, sched, w);
    CHECK(with_empty == rsa_only);
}
