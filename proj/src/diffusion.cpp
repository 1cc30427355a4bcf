#include "mogen/diffusion.hpp"

#include <cmath>

#include "mogen/rng.hpp"

namespace mogen {

// --------------------------------------------------------------------------
// schedule / forward process
// --------------------------------------------------------------------------

NoiseSchedule make_schedule(size_t t_steps) {
    if (t_steps < 1) throw ContractError("make_schedule: need at least one step");
    NoiseSchedule s;
    s.betas.resize(t_steps);
    s.alphas.resize(t_steps);
    s.alpha_bars.resize(t_steps);
    const double b0 = 1e-4, b1 = 0.02;
    double prod = 1.0;
    for (size_t t = 0; t < t_steps; ++t) {
        if (t == 0) {
            s.betas[t] = b0;
        } else if (t == t_steps - 1) {
            s.betas[t] = b1;  // endpoints exact by construction
        } else {
            const double frac = static_cast<double>(t) / static_cast<double>(t_steps - 1);
            s.betas[t] = b0 + (b1 - b0) * frac;
        }
        s.alphas[t] = 1.0 - s.betas[t];
        prod *= s.alphas[t];
        s.alpha_bars[t] = prod;
    }
    for (size_t t = 1; t < t_steps; ++t) {
        if (!(s.betas[t] > s.betas[t - 1]) && t_steps > 1)
            throw NumericError("make_schedule: betas must increase");
        if (!(s.alpha_bars[t] < s.alpha_bars[t - 1]))
            throw NumericError("make_schedule: alpha_bars must decrease");
    }
    return s;
}

Tensor q_sample(const Tensor& x0, size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    if (t >= sched.steps()) throw ContractError("q_sample: timestep out of range");
    if (eps.shape() != x0.shape()) throw DimensionError("q_sample: eps shape must match x0");
    const double ab = sched.alpha_bars[t];
    return add(scale(x0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

// --------------------------------------------------------------------------
// weights
// --------------------------------------------------------------------------

namespace {

std::shared_ptr<std::vector<size_t>> build_patch_map(const ModelConfig& cfg, bool inverse) {
    const size_t s = cfg.image_size, p = cfg.patch, g = cfg.grid();
    auto map = std::make_shared<std::vector<size_t>>(s * s * 3);
    for (size_t gy = 0; gy < g; ++gy)
        for (size_t gx = 0; gx < g; ++gx)
            for (size_t py = 0; py < p; ++py)
                for (size_t px = 0; px < p; ++px)
                    for (size_t c = 0; c < 3; ++c) {
                        const size_t tok = (gy * g + gx) * cfg.patch_dim() + (py * p + px) * 3 + c;
                        const size_t pix = ((gy * p + py) * s + gx * p + px) * 3 + c;
                        if (inverse)
                            (*map)[pix] = tok;
                        else
                            (*map)[tok] = pix;
                    }
    return map;
}

Tensor time_features(size_t t, size_t d) {
    std::vector<double> f(d);
    for (size_t j = 0; j < d; j += 2) {
        const double div = std::pow(10000.0, static_cast<double>(j) / static_cast<double>(d));
        f[j] = std::sin(static_cast<double>(t) / div);
        if (j + 1 < d) f[j + 1] = std::cos(static_cast<double>(t) / div);
    }
    return Tensor::from_data({1, d}, std::move(f));
}

}  // namespace

const std::vector<std::string>& ModelWeights::segment_names() {
    static const std::vector<std::string> names = {"backbone", "rsa", "amg", "encoders"};
    return names;
}

ModelWeights ModelWeights::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelWeights w;
    w.cfg = cfg;
    ParamFactory pf(seed);

    w.backbone.patch_in = pf.make_linear("bb.patch_in", cfg.patch_dim(), cfg.d_net);
    // zero-initialized output head: the untrained denoiser predicts zero noise
    w.backbone.patch_out = pf.make_linear("bb.patch_out", cfg.d_net, cfg.patch_dim(), OutInit::zero);
    w.backbone.time_fc1 = pf.make_linear("bb.time_fc1", cfg.d_net, cfg.d_net);
    w.backbone.time_fc2 = pf.make_linear("bb.time_fc2", cfg.d_net, cfg.d_net);
    w.backbone.final_ln = pf.make_layer_norm(cfg.d_net);
    w.backbone.blocks.resize(cfg.n_blocks);
    for (size_t i = 0; i < cfg.n_blocks; ++i) {
        BlockWeights& b = w.backbone.blocks[i];
        const std::string p = "bb.block" + std::to_string(i);
        b.ln1 = pf.make_layer_norm(cfg.d_net);
        b.ln2 = pf.make_layer_norm(cfg.d_net);
        b.ln3 = pf.make_layer_norm(cfg.d_net);
        // residual branch output projections start at zero for a stable start
        b.self_attn = pf.make_attention(p + ".self", cfg.d_net, cfg.n_heads, OutInit::scaled);
        b.q_net = pf.make_qproj(p + ".q_net", cfg.d_net, cfg.d_net);
        b.cross_text = pf.make_kv(p + ".cross_text", cfg.d, cfg.d_net, cfg.d_net, OutInit::scaled);
        b.ffn = pf.make_ffn(p + ".ffn", cfg.d_net, 4 * cfg.d_net, OutInit::scaled);
        b.has_phrase = (i + 1 == cfg.layout_block);
        if (b.has_phrase)
            b.cross_phrase =
                pf.make_kv(p + ".cross_phrase", cfg.d, cfg.d_net, cfg.d_net, OutInit::small);
        b.cross_intent =
            pf.make_kv(p + ".cross_intent", cfg.d, cfg.d_net, cfg.d_net, OutInit::zero);
    }

    w.rsa = ParserWeights::init(cfg, seed);
    w.amg = AmgWeights::init(cfg, seed);
    w.enc = EncoderWeights::init(cfg, seed);

    w.patch_map = build_patch_map(cfg, false);
    w.unpatch_map = build_patch_map(cfg, true);
    w.spatial_pe = positional_encoding_2d(cfg.grid(), cfg.grid(), cfg.d_net);
    return w;
}

ParamList ModelWeights::params(const std::string& segment) const {
    ParamList out;
    if (segment == "backbone") {
        backbone.patch_in.collect("backbone.patch_in", out);
        backbone.patch_out.collect("backbone.patch_out", out);
        backbone.time_fc1.collect("backbone.time_fc1", out);
        backbone.time_fc2.collect("backbone.time_fc2", out);
        backbone.final_ln.collect("backbone.final_ln", out);
        for (size_t i = 0; i < backbone.blocks.size(); ++i) {
            const auto& b = backbone.blocks[i];
            const std::string p = "backbone.block" + std::to_string(i);
            b.ln1.collect(p + ".ln1", out);
            b.self_attn.collect(p + ".self", out);
            b.ln2.collect(p + ".ln2", out);
            b.q_net.collect(p + ".q_net", out);
            b.cross_text.collect(p + ".cross_text", out);
            b.ln3.collect(p + ".ln3", out);
            b.ffn.collect(p + ".ffn", out);
        }
    } else if (segment == "rsa") {
        rsa.collect("rsa", out);
        for (size_t i = 0; i < backbone.blocks.size(); ++i)
            if (backbone.blocks[i].has_phrase)
                backbone.blocks[i].cross_phrase.collect(
                    "rsa.layout_phrase" + std::to_string(i), out);
    } else if (segment == "amg") {
        amg.collect("amg", out);
        for (size_t i = 0; i < backbone.blocks.size(); ++i)
            backbone.blocks[i].cross_intent.collect("amg.intent" + std::to_string(i), out);
    } else if (segment == "encoders") {
        enc.collect("encoders", out);
    } else {
        throw ContractError("ModelWeights::params: unknown segment " + segment);
    }
    return out;
}

ParamList ModelWeights::all_params() const {
    ParamList out;
    for (const auto& seg : segment_names()) {
        ParamList part = params(seg);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

void ModelWeights::set_requires_grad_all(bool rg) const {
    for (auto& p : all_params()) const_cast<Tensor&>(p.t).set_requires_grad(rg);
}

// --------------------------------------------------------------------------
// denoiser
// --------------------------------------------------------------------------

Tensor denoiser_forward(const Tensor& x_flat, size_t t, const SemanticBundle& cond,
                        const StructuredIntent* intent, const ModelWeights& w,
                        DenoiseProbe* probe) {
    const ModelConfig& cfg = w.cfg;
    const size_t npix = cfg.image_size * cfg.image_size * 3;
    if (x_flat.size() != npix) throw DimensionError("denoiser_forward: input size mismatch");
    if (cond.t_glob.rows() != cfg.l_emb || cond.t_glob.cols() != cfg.d)
        throw DimensionError("denoiser_forward: conditioning shape mismatch");

    Tensor tokens = reindex(x_flat, w.patch_map, {cfg.l_net(), cfg.patch_dim()});
    Tensor h = add(linear(tokens, w.backbone.patch_in), w.spatial_pe);
    Tensor time_vec =
        linear(gelu(linear(time_features(t, cfg.d_net), w.backbone.time_fc1)), w.backbone.time_fc2);
    h = add_rowvec(h, time_vec);

    for (size_t i = 0; i < cfg.n_blocks; ++i) {
        const BlockWeights& b = w.backbone.blocks[i];
        const size_t block_idx = i + 1;
        Tensor normed = add_rowvec(layer_norm(h, b.ln1), time_vec);
        h = add(h, scaled_dot_attention(normed, normed, b.self_attn));

        Tensor q_src = add_rowvec(layer_norm(h, b.ln2), time_vec);
        const bool probe_here = probe && probe->block == block_idx;
        Tensor v_rsa = rsa_inject(q_src, cond, block_idx, cfg.layout_block, b.q_net, b.cross_text,
                                  b.has_phrase ? &b.cross_phrase : nullptr, cfg.n_heads,
                                  probe_here ? &probe->rsa : nullptr);
        Tensor v_amg;
        if (intent) {
            v_amg = intent_inject(q_src, *intent, b.q_net, b.cross_intent, cfg.n_heads,
                                  probe_here ? &probe->probs_intent : nullptr);
            if (probe_here) probe->v_amg = v_amg.detach();
        }
        h = add(h, fuse(v_rsa, intent ? &v_amg : nullptr));
        h = add(h, ffn(add_rowvec(layer_norm(h, b.ln3), time_vec), b.ffn));
    }

    Tensor out = linear(layer_norm(h, w.backbone.final_ln), w.backbone.patch_out);
    return reindex(out, w.unpatch_map, {npix});
}

// --------------------------------------------------------------------------
// DDIM
// --------------------------------------------------------------------------

std::vector<size_t> ddim_timesteps(size_t t_steps, size_t n_steps) {
    if (n_steps < 1) throw ContractError("ddim_timesteps: need at least one step");
    if (n_steps > t_steps) throw ContractError("ddim_timesteps: more steps than the schedule has");
    std::vector<size_t> ts(n_steps);
    if (n_steps == 1) {
        ts[0] = t_steps - 1;
        return ts;
    }
    for (size_t i = 0; i < n_steps; ++i)
        ts[i] = (n_steps - 1 - i) * (t_steps - 1) / (n_steps - 1);
    return ts;
}

std::vector<double> ddim_trajectory(const DenoiseFn& eps_fn, size_t n, size_t n_steps,
                                    uint64_t seed, const NoiseSchedule& sched,
                                    std::vector<std::vector<double>>* trajectory) {
    NoGradGuard ng;
    Rng rng = Rng::stream(seed, {rngkey::sampler});
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    if (trajectory) {
        trajectory->clear();
        trajectory->push_back(x);
    }

    const std::vector<size_t> ts = ddim_timesteps(sched.steps(), n_steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const size_t t = ts[i];
        const double ab_t = sched.alpha_bars[t];
        const double ab_prev = i + 1 < ts.size() ? sched.alpha_bars[ts[i + 1]] : 1.0;
        Tensor eps_hat = eps_fn(Tensor::from_data({n}, x), t);
        if (eps_hat.size() != n) throw DimensionError("ddim_sample: denoiser output size mismatch");
        const double* e = eps_hat.data();
        const double sr_t = std::sqrt(ab_t), sr1_t = std::sqrt(1.0 - ab_t);
        const double sr_p = std::sqrt(ab_prev), sr1_p = std::sqrt(1.0 - ab_prev);
        for (size_t j = 0; j < n; ++j) {
            const double x0_pred = (x[j] - sr1_t * e[j]) / sr_t;
            x[j] = sr_p * x0_pred + sr1_p * e[j];
        }
        if (trajectory) trajectory->push_back(x);
    }
    return x;
}

Image ddim_sample_raw(const DenoiseFn& eps_fn, size_t image_size, size_t n_steps, uint64_t seed,
                      const NoiseSchedule& sched, std::vector<std::vector<double>>* trajectory) {
    const size_t n = image_size * image_size * 3;
    const std::vector<double> x = ddim_trajectory(eps_fn, n, n_steps, seed, sched, trajectory);
    Image img(image_size, image_size);
    for (size_t j = 0; j < n; ++j) img.px[j] = std::min(1.0, std::max(0.0, x[j]));
    return img;
}

Image ddim_sample(const SemanticBundle& cond, const StructuredIntent* intent, size_t n_steps,
                  uint64_t seed, const NoiseSchedule& sched, const ModelWeights& w) {
    NoGradGuard ng;
    const size_t n = w.cfg.image_size * w.cfg.image_size * 3;
    Rng rng = Rng::stream(seed, {rngkey::sampler});
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();

    // Same DDIM update as the raw sampler, with the x0 estimate projected
    // onto the valid pixel range each step (static thresholding). Without
    // the projection the early low-SNR steps follow wildly out-of-range x0
    // estimates and the trajectory never commits to a clean scene.
    const std::vector<size_t> ts = ddim_timesteps(sched.steps(), n_steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const size_t t = ts[i];
        const double ab_t = sched.alpha_bars[t];
        const double ab_prev = i + 1 < ts.size() ? sched.alpha_bars[ts[i + 1]] : 1.0;
        Tensor eps_hat = denoiser_forward(Tensor::from_data({n}, x), t, cond, intent, w);
        const double* e = eps_hat.data();
        const double sr_t = std::sqrt(ab_t), sr1_t = std::sqrt(1.0 - ab_t);
        const double sr_p = std::sqrt(ab_prev), sr1_p = std::sqrt(1.0 - ab_prev);
        for (size_t j = 0; j < n; ++j) {
            double x0_pred = (x[j] - sr1_t * e[j]) / sr_t;
            x0_pred = std::min(1.0, std::max(-1.0, x0_pred));
            x[j] = sr_p * x0_pred + sr1_p * e[j];
        }
    }
    Image img(w.cfg.image_size, w.cfg.image_size);
    for (size_t j = 0; j < n; ++j)
        img.px[j] = std::min(1.0, std::max(0.0, decode_pixel(x[j])));
    return img;
}

// --------------------------------------------------------------------------
// generation
// --------------------------------------------------------------------------

Image generate(const GenRequest& req, const ModelWeights& w, CondMode mode,
               const NoiseSchedule& sched) {
    NoGradGuard ng;
    req.signals.validate();
    TextEmbedding emb = text_encode(req.prompt, w.cfg, w.enc.text_emb);
    SemanticBundle cond;
    if (mode == CondMode::rsa) {
        cond = parse_text(emb.t_emb, w.rsa);
    } else {
        cond.t_glob = emb.t_emb;
    }
    StructuredIntent intent;
    const bool use_amg = !req.signals.is_empty();
    if (use_amg) {
        Tensor c_unif = encode_signals(req.signals, w.enc, w.amg, w.cfg);
        intent = adaptive_control(c_unif, w.amg);
    }
    return ddim_sample(cond, use_amg ? &intent : nullptr, req.n_steps, req.seed, sched, w);
}

}  // namespace mogen
