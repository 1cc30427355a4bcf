#include "mogen/amg.hpp"

namespace mogen {

void AmgWeights::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".type_emb_s", type_emb_s});
    out.push_back({prefix + ".type_emb_o", type_emb_o});
    out.push_back({prefix + ".type_emb_b", type_emb_b});
    sig_sa.collect(prefix + ".sig_sa", out);
    out.push_back({prefix + ".q_str", q_str});
    ctrl_cross.collect(prefix + ".ctrl_cross", out);
    ctrl_sa.collect(prefix + ".ctrl_sa", out);
    ctrl_ln.collect(prefix + ".ctrl_ln", out);
    ctrl_ffn.collect(prefix + ".ctrl_ffn", out);
}

AmgWeights AmgWeights::init(const ModelConfig& cfg, uint64_t seed) {
    ParamFactory pf(seed);
    AmgWeights w;
    w.type_emb_s = pf.uniform("amg.type_emb_s", {1, cfg.d}, -0.1, 0.1);
    w.type_emb_o = pf.uniform("amg.type_emb_o", {1, cfg.d}, -0.1, 0.1);
    w.type_emb_b = pf.uniform("amg.type_emb_b", {1, cfg.d}, -0.1, 0.1);
    w.sig_sa = pf.make_attention("amg.sig_sa", cfg.d, cfg.n_heads, OutInit::small);
    w.q_str = pf.uniform("amg.q_str", {cfg.l_str, cfg.d}, -0.5, 0.5);
    w.ctrl_cross = pf.make_attention("amg.ctrl_cross", cfg.d, cfg.n_heads);
    w.ctrl_sa = pf.make_attention("amg.ctrl_sa", cfg.d, cfg.n_heads, OutInit::small);
    w.ctrl_ln = pf.make_layer_norm(cfg.d);
    w.ctrl_ffn = pf.make_ffn("amg.ctrl_ffn", cfg.d, 4 * cfg.d);
    return w;
}

namespace {

Tensor add_type(const Tensor& rows, const Tensor& type_emb) {
    // broadcast the [1 x d] modality embedding over every row
    return add_rowvec(rows, type_emb);
}

}  // namespace

Tensor encode_signals(const SignalSet& c, const EncoderWeights& enc, const AmgWeights& amg,
                      const ModelConfig& cfg) {
    c.validate();
    if (c.is_empty())
        throw ContractError("encode_signals: empty signal set never reaches the encoder");

    std::vector<Tensor> parts;
    if (c.structure)
        parts.push_back(
            add_type(image_encode(*c.structure, ImageRole::structure, cfg, enc), amg.type_emb_s));
    if (!c.objects.empty()) {
        std::vector<Tensor> obj_tokens;
        for (const Image& obj : c.objects)
            obj_tokens.push_back(image_encode(obj, ImageRole::object, cfg, enc));
        parts.push_back(add_type(obj_tokens.size() == 1 ? obj_tokens[0] : concat_rows(obj_tokens),
                                 amg.type_emb_o));
    }
    if (!c.boxes.empty())
        parts.push_back(add_type(box_encode(c.boxes, cfg, enc), amg.type_emb_b));

    Tensor stacked = parts.size() == 1 ? parts[0] : concat_rows(parts);
    return self_attn_res(stacked, amg.sig_sa);
}

StructuredIntent adaptive_control(const Tensor& c_unif, const AmgWeights& amg,
                                  Tensor* cross_stage) {
    if (c_unif.rows() == 0)
        throw ContractError("adaptive_control: zero-row unified representation");
    Tensor h = scaled_dot_attention(amg.q_str, c_unif, amg.ctrl_cross);
    if (cross_stage) *cross_stage = h.detach();
    h = self_attn_res(h, amg.ctrl_sa);
    return StructuredIntent{ffn(layer_norm(h, amg.ctrl_ln), amg.ctrl_ffn)};
}

Tensor intent_inject(const Tensor& q_src, const StructuredIntent& intent,
                     const QueryProj& q_net, const KvProj& cross_intent, size_t n_heads,
                     Tensor* avg_probs) {
    return attention(q_src, intent.c_str, q_net, cross_intent, n_heads, avg_probs);
}

Tensor fuse(const Tensor& v_rsa, const Tensor* v_amg) {
    if (!v_amg || !v_amg->defined()) return v_rsa;
    if (v_amg->shape() != v_rsa.shape())
        throw DimensionError("fuse: v_rsa and v_amg shapes differ");
    return add(v_rsa, *v_amg);
}

}  // namespace mogen
