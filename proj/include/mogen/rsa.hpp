#pragma once

#include "mogen/config.hpp"
#include "mogen/nn.hpp"

namespace mogen {

// Output of the Semantic Parser: global text semantics for every block and
// phrase-level semantics for the layout block. t_phr is left undefined when
// the conditioning is raw text embeddings (pretraining / no-parser paths).
struct SemanticBundle {
    Tensor t_glob;  // [l_emb x d]
    Tensor t_phr;   // [l_phr x d] or undefined
    bool has_phrase() const { return t_phr.defined(); }
};

struct ParserWeights {
    // global branch
    AttentionParams glob_sa;
    FfnParams glob_ffn;
    LayerNormParams glob_ln;
    LinearParams glob_fc;
    // phrase branch
    Tensor q_phr;  // [l_phr x d], learnable queries
    AttentionParams phr_cross;
    AttentionParams phr_sa;
    LayerNormParams phr_ln;
    LinearParams phr_fc;

    void collect(const std::string& prefix, ParamList& out) const;
    static ParserWeights init(const ModelConfig& cfg, uint64_t seed);
};

// Global branch: FFN(SelfAttn(t_emb)) then FC(LN(.)). Self-attention and FFN
// are residual blocks; no positions are added inside the parser.
Tensor sp_global(const Tensor& t_emb, const ParserWeights& w);

// Phrase branch: SelfAttn(CrossAttn(q_phr, t_emb)) then FC(LN(.)). The cross
// stage is pure attention, so it is invariant to key order. When avg_probs is
// given it receives the cross-attention weights [l_phr x l_emb].
Tensor sp_phrase(const Tensor& t_emb, const ParserWeights& w, Tensor* avg_probs = nullptr);

SemanticBundle parse_text(const Tensor& t_emb, const ParserWeights& w);

// Parameterless normalization applied to the conditioning rows entering the
// pretrained text cross-attention. Both the raw-text pretraining path and
// the parser path feed through it, so the parser's identity-initialized
// output lands exactly in the distribution the frozen weights were trained
// on.
Tensor cond_layer_norm(const Tensor& cond);

// Diagnostic capture for one injection site.
struct RsaInjectProbe {
    Tensor v_glob, v_phr;          // detached values
    Tensor probs_glob, probs_phr;  // head-averaged attention weights
};

// Layout-gated block injection. The global path always runs through the
// block's text cross-attention; the phrase path exists only at the layout
// block and is skipped entirely elsewhere (the lambda gate of the fusion
// rule takes values {0,1} by construction).
Tensor rsa_inject(const Tensor& q_src, const SemanticBundle& bundle, size_t block_idx,
                  size_t layout_block, const QueryProj& q_net, const KvProj& cross_text,
                  const KvProj* cross_phrase, size_t n_heads, RsaInjectProbe* probe = nullptr);

}  // namespace mogen
