#include "mogen/rsa.hpp"

namespace mogen {

void ParserWeights::collect(const std::string& prefix, ParamList& out) const {
    glob_sa.collect(prefix + ".glob_sa", out);
    glob_ffn.collect(prefix + ".glob_ffn", out);
    glob_ln.collect(prefix + ".glob_ln", out);
    glob_fc.collect(prefix + ".glob_fc", out);
    out.push_back({prefix + ".q_phr", q_phr});
    phr_cross.collect(prefix + ".phr_cross", out);
    phr_sa.collect(prefix + ".phr_sa", out);
    phr_ln.collect(prefix + ".phr_ln", out);
    phr_fc.collect(prefix + ".phr_fc", out);
}

ParserWeights ParserWeights::init(const ModelConfig& cfg, uint64_t seed) {
    ParamFactory pf(seed);
    ParserWeights w;
    // Residual branches start as identities (zeroed output projections) and
    // the FC layers start as the identity map, so the parser initially passes
    // LN(t_emb) to the frozen text cross-attention.
    w.glob_sa = pf.make_attention("rsa.glob_sa", cfg.d, cfg.n_heads, OutInit::small);
    w.glob_ffn = pf.make_ffn("rsa.glob_ffn", cfg.d, 4 * cfg.d, OutInit::small);
    w.glob_ln = pf.make_layer_norm(cfg.d);
    w.glob_fc = pf.make_linear_identity(cfg.d);
    w.q_phr = pf.uniform("rsa.q_phr", {cfg.l_phr, cfg.d}, -0.5, 0.5);
    w.phr_cross = pf.make_attention("rsa.phr_cross", cfg.d, cfg.n_heads);
    w.phr_sa = pf.make_attention("rsa.phr_sa", cfg.d, cfg.n_heads, OutInit::small);
    w.phr_ln = pf.make_layer_norm(cfg.d);
    w.phr_fc = pf.make_linear_identity(cfg.d);
    return w;
}

Tensor sp_global(const Tensor& t_emb, const ParserWeights& w) {
    Tensor h = self_attn_res(t_emb, w.glob_sa);
    h = ffn_res(h, w.glob_ffn);
    return linear(layer_norm(h, w.glob_ln), w.glob_fc);
}

Tensor sp_phrase(const Tensor& t_emb, const ParserWeights& w, Tensor* avg_probs) {
    Tensor h = scaled_dot_attention(w.q_phr, t_emb, w.phr_cross, avg_probs);
    h = self_attn_res(h, w.phr_sa);
    return linear(layer_norm(h, w.phr_ln), w.phr_fc);
}

SemanticBundle parse_text(const Tensor& t_emb, const ParserWeights& w) {
    return SemanticBundle{sp_global(t_emb, w), sp_phrase(t_emb, w)};
}

Tensor cond_layer_norm(const Tensor& cond) {
    return layer_norm(cond, Tensor::full({cond.cols()}, 1.0), Tensor::zeros({cond.cols()}));
}

Tensor rsa_inject(const Tensor& q_src, const SemanticBundle& bundle, size_t block_idx,
                  size_t layout_block, const QueryProj& q_net, const KvProj& cross_text,
                  const KvProj* cross_phrase, size_t n_heads, RsaInjectProbe* probe) {
    const bool is_layout = block_idx == layout_block;
    if (!is_layout && cross_phrase)
        throw ContractError("rsa_inject: phrase adapters queried at a non-layout block");
    Tensor v_glob = attention(q_src, cond_layer_norm(bundle.t_glob), q_net, cross_text, n_heads,
                              probe ? &probe->probs_glob : nullptr);
    if (probe) probe->v_glob = v_glob.detach();
    if (!is_layout || !bundle.has_phrase()) return v_glob;
    if (!cross_phrase)
        throw ContractError("rsa_inject: layout block is missing its phrase adapters");
    Tensor v_phr = attention(q_src, bundle.t_phr, q_net, *cross_phrase, n_heads,
                             probe ? &probe->probs_phr : nullptr);
    if (probe) probe->v_phr = v_phr.detach();
    return add(v_glob, v_phr);
}

}  // namespace mogen
