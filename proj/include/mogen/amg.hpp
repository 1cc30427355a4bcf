#pragma once

#include <optional>
#include <vector>

#include "mogen/encoders.hpp"

namespace mogen {

// Activated control subset C of {structure, objects, boxes}. Structure and
// boxes are both layout signals and are mutually exclusive.
struct SignalSet {
    std::optional<Image> structure;
    std::vector<Image> objects;
    std::vector<NormBox> boxes;

    bool is_empty() const { return !structure && objects.empty() && boxes.empty(); }

    void validate() const {
        if (structure && !boxes.empty())
            throw ContractError(
                "SignalSet: structure reference and bounding boxes are mutually exclusive "
                "layout signals");
        for (const auto& b : boxes) b.validate();
    }
};

struct StructuredIntent {
    Tensor c_str;  // [l_str x d]
};

struct AmgWeights {
    Tensor type_emb_s, type_emb_o, type_emb_b;  // modality embeddings [1 x d]
    AttentionParams sig_sa;                     // signal encoder self-attention
    Tensor q_str;                               // [l_str x d], learnable queries
    AttentionParams ctrl_cross;
    AttentionParams ctrl_sa;
    LayerNormParams ctrl_ln;
    FfnParams ctrl_ffn;

    void collect(const std::string& prefix, ParamList& out) const;
    static AmgWeights init(const ModelConfig& cfg, uint64_t seed);
};

// Signal Encoder: per-signal features (empty signals contribute zero rows),
// concatenated [F_s; F_o; F_b], modality embeddings added, one self-attention
// pass. L_unif = L_s + L_o + L_b.
Tensor encode_signals(const SignalSet& c, const EncoderWeights& enc, const AmgWeights& amg,
                      const ModelConfig& cfg);

// Adaptive Controller: SelfAttn(CrossAttn(q_str, c_unif)) then FFN(LN(.)).
// cross_stage (optional out) receives the cross-attention stage output.
StructuredIntent adaptive_control(const Tensor& c_unif, const AmgWeights& amg,
                                  Tensor* cross_stage = nullptr);

// Intent interaction layer at one block, sharing the block query projection.
Tensor intent_inject(const Tensor& q_src, const StructuredIntent& intent,
                     const QueryProj& q_net, const KvProj& cross_intent, size_t n_heads,
                     Tensor* avg_probs = nullptr);

// Residual fusion; a null v_amg (empty signal set) bypasses AMG entirely and
// returns v_rsa unchanged.
Tensor fuse(const Tensor& v_rsa, const Tensor* v_amg);

}  // namespace mogen
