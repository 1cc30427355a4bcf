#pragma once

#include <functional>
#include <memory>

#include "mogen/amg.hpp"
#include "mogen/rsa.hpp"

namespace mogen {

// --------------------------------------------------------------------------
// forward process
// --------------------------------------------------------------------------

struct NoiseSchedule {
    std::vector<double> betas;       // [T]
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // running products
    size_t steps() const { return betas.size(); }
};

// Linear betas from 1e-4 to 0.02 over T steps.
NoiseSchedule make_schedule(size_t t_steps);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Tensor q_sample(const Tensor& x0, size_t t, const Tensor& eps, const NoiseSchedule& sched);

// --------------------------------------------------------------------------
// denoiser
// --------------------------------------------------------------------------

struct BlockWeights {
    LayerNormParams ln1, ln2, ln3;
    AttentionParams self_attn;  // spatial tokens attending to themselves
    QueryProj q_net;            // query projection shared by every injection path
    KvProj cross_text;          // conditioning path (t_emb in stage 0, t_glob after)
    bool has_phrase = false;
    KvProj cross_phrase;  // layout block only
    KvProj cross_intent;  // zero-initialized output projection
    FfnParams ffn;
};

struct BackboneWeights {
    LinearParams patch_in, patch_out;
    LinearParams time_fc1, time_fc2;
    LayerNormParams final_ln;
    std::vector<BlockWeights> blocks;
};

struct ModelWeights {
    ModelConfig cfg;
    BackboneWeights backbone;
    ParserWeights rsa;
    AmgWeights amg;
    EncoderWeights enc;

    // constants derived from cfg (not serialized, no grad)
    std::shared_ptr<const std::vector<size_t>> patch_map, unpatch_map;
    Tensor spatial_pe;

    static ModelWeights init(const ModelConfig& cfg, uint64_t seed);

    // segment name is one of "backbone" | "rsa" | "amg" | "encoders"
    ParamList params(const std::string& segment) const;
    ParamList all_params() const;
    void set_requires_grad_all(bool rg) const;

    static const std::vector<std::string>& segment_names();
};

struct DenoiseProbe {
    size_t block = 0;  // 1-based block to capture
    RsaInjectProbe rsa;
    Tensor v_amg;
    Tensor probs_intent;
};

// Full denoiser pass: patchify -> time embedding -> blocks (self-attention,
// gated conditioning injection, residual fusion, FFN) -> unpatchify.
Tensor denoiser_forward(const Tensor& x_flat, size_t t, const SemanticBundle& cond,
                        const StructuredIntent* intent, const ModelWeights& w,
                        DenoiseProbe* probe = nullptr);

// --------------------------------------------------------------------------
// sampler (deterministic DDIM, eta = 0)
// --------------------------------------------------------------------------

// Descending timestep subsequence from T-1 down to 0.
std::vector<size_t> ddim_timesteps(size_t t_steps, size_t n_steps);

using DenoiseFn = std::function<Tensor(const Tensor& x, size_t t)>;

// The denoiser works on pixels mapped to [-1,1]; decoding maps back to the
// [0,1] image range.
inline double encode_pixel(double v) { return 2.0 * v - 1.0; }
inline double decode_pixel(double v) { return 0.5 * (v + 1.0); }

// DDIM update loop over an arbitrary denoiser; returns the final state
// before any clamping and optionally the full trajectory.
std::vector<double> ddim_trajectory(const DenoiseFn& eps_fn, size_t n, size_t n_steps,
                                    uint64_t seed, const NoiseSchedule& sched,
                                    std::vector<std::vector<double>>* trajectory = nullptr);

// Sampler over an arbitrary denoiser (stub denoisers in tests); the final
// state is clamped to [0,1] directly.
Image ddim_sample_raw(const DenoiseFn& eps_fn, size_t image_size, size_t n_steps, uint64_t seed,
                      const NoiseSchedule& sched,
                      std::vector<std::vector<double>>* trajectory = nullptr);

// Model sampler: runs in the [-1,1] space and decodes to image range.
Image ddim_sample(const SemanticBundle& cond, const StructuredIntent* intent, size_t n_steps,
                  uint64_t seed, const NoiseSchedule& sched, const ModelWeights& w);

// --------------------------------------------------------------------------
// end-to-end generation
// --------------------------------------------------------------------------

enum class CondMode { raw_text, rsa };

struct GenRequest {
    std::string prompt;
    SignalSet signals;
    size_t n_steps = 20;
    uint64_t seed = 0;
};

// prompt -> text encoder -> (parser | raw) -> optional signal encoding and
// adaptive control -> DDIM. An empty signal set bypasses AMG entirely.
Image generate(const GenRequest& req, const ModelWeights& w, CondMode mode,
               const NoiseSchedule& sched);

}  // namespace mogen
