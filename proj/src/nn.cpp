#include "mogen/nn.hpp"

#include <cmath>

#include "mogen/kernels.hpp"
#include "mogen/rng.hpp"

namespace mogen {

void LinearParams::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

void LayerNormParams::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

void QueryProj::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

void KvProj::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w_k", w_k});
    out.push_back({prefix + ".w_v", w_v});
    out.push_back({prefix + ".b_v", b_v});
    out.push_back({prefix + ".w_out", w_out});
    out.push_back({prefix + ".b_out", b_out});
}

void AttentionParams::collect(const std::string& prefix, ParamList& out) const {
    q.collect(prefix + ".q", out);
    kv.collect(prefix + ".kv", out);
}

void FfnParams::collect(const std::string& prefix, ParamList& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

Tensor linear(const Tensor& x, const LinearParams& p) {
    return add_rowvec(matmul(x, p.w), p.b);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    return layer_norm(x, p.gamma, p.beta, p.eps);
}

Tensor attention(const Tensor& q_src, const Tensor& kv_src, const QueryProj& qp, const KvProj& kv,
                 size_t n_heads, Tensor* avg_probs) {
    if (kv_src.rows() == 0) throw ContractError("attention: empty key/value source");
    const size_t d_att = qp.w.cols();
    if (d_att % n_heads != 0)
        throw DimensionError("attention: d_att not divisible by head count");
    if (kv.w_k.cols() != d_att || kv.w_v.cols() != d_att)
        throw DimensionError("attention: inconsistent projection widths");
    const size_t dh = d_att / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor q = add_rowvec(matmul(q_src, qp.w), qp.b);
    const Tensor k = matmul(kv_src, kv.w_k);
    const Tensor v = add_rowvec(matmul(kv_src, kv.w_v), kv.b_v);

    const size_t lq = q.rows(), lk = k.rows();
    std::vector<double> probs_acc;
    if (avg_probs) probs_acc.assign(lq * lk, 0.0);

    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (size_t h = 0; h < n_heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        const Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt);
        const Tensor probs = softmax_rows(scores);
        if (avg_probs) {
            const double* pd = probs.data();
            for (size_t i = 0; i < probs_acc.size(); ++i) probs_acc[i] += pd[i];
        }
        heads.push_back(matmul(probs, vh));
    }
    if (avg_probs) {
        for (double& x : probs_acc) x /= static_cast<double>(n_heads);
        *avg_probs = Tensor::from_data({lq, lk}, std::move(probs_acc));
    }
    const Tensor merged = n_heads == 1 ? heads[0] : concat_cols(heads);
    return add_rowvec(matmul(merged, kv.w_out), kv.b_out);
}

Tensor scaled_dot_attention(const Tensor& q_src, const Tensor& kv_src, const AttentionParams& p,
                            Tensor* avg_probs) {
    return attention(q_src, kv_src, p.q, p.kv, p.n_heads, avg_probs);
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
    return linear(gelu(linear(x, p.fc1)), p.fc2);
}

Tensor self_attn_res(const Tensor& x, const AttentionParams& p) {
    return add(x, scaled_dot_attention(x, x, p));
}

Tensor ffn_res(const Tensor& x, const FfnParams& p) { return add(x, ffn(x, p)); }

// --------------------------------------------------------------------------
// ParamFactory
// --------------------------------------------------------------------------

Tensor ParamFactory::xavier(const std::string& name, size_t in, size_t out) {
    Rng rng = Rng::stream(seed_, {rngkey::init, fnv1a(name.data(), name.size())});
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> data(in * out);
    for (double& x : data) x = rng.uniform(-limit, limit);
    return Tensor::from_data({in, out}, std::move(data), true);
}

Tensor ParamFactory::uniform(const std::string& name, std::vector<size_t> shape, double lo,
                             double hi) {
    Rng rng = Rng::stream(seed_, {rngkey::init, fnv1a(name.data(), name.size())});
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& x : data) x = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor ParamFactory::zeros(std::vector<size_t> shape) {
    return Tensor::zeros(std::move(shape), true);
}

Tensor ParamFactory::identity(size_t n) {
    std::vector<double> data(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
    return Tensor::from_data({n, n}, std::move(data), true);
}

Tensor ParamFactory::by_init(const std::string& name, size_t in, size_t out, OutInit init) {
    switch (init) {
        case OutInit::xavier: return xavier(name, in, out);
        case OutInit::scaled: {
            Tensor t = xavier(name, in, out);
            kern::active().scale(t.data(), 0.3, t.mutable_data(), t.size());
            return t;
        }
        case OutInit::small: return uniform(name, {in, out}, -0.02, 0.02);
        case OutInit::zero: return zeros({in, out});
    }
    return zeros({in, out});
}

LinearParams ParamFactory::make_linear(const std::string& name, size_t in, size_t out,
                                       OutInit init) {
    LinearParams p;
    p.w = by_init(name + ".w", in, out, init);
    p.b = zeros({out});
    return p;
}

LinearParams ParamFactory::make_linear_identity(size_t n) {
    LinearParams p;
    p.w = identity(n);
    p.b = zeros({n});
    return p;
}

LayerNormParams ParamFactory::make_layer_norm(size_t d) {
    LayerNormParams p;
    p.gamma = Tensor::full({d}, 1.0, true);
    p.beta = zeros({d});
    return p;
}

QueryProj ParamFactory::make_qproj(const std::string& name, size_t in, size_t d_att) {
    QueryProj p;
    p.w = xavier(name + ".w", in, d_att);
    p.b = zeros({d_att});
    return p;
}

KvProj ParamFactory::make_kv(const std::string& name, size_t in, size_t d_att, size_t out,
                             OutInit out_init) {
    KvProj p;
    p.w_k = xavier(name + ".w_k", in, d_att);
    p.w_v = xavier(name + ".w_v", in, d_att);
    p.b_v = zeros({d_att});
    p.w_out = by_init(name + ".w_out", d_att, out, out_init);
    p.b_out = zeros({out});
    return p;
}

AttentionParams ParamFactory::make_attention(const std::string& name, size_t d, size_t n_heads,
                                             OutInit out_init) {
    AttentionParams p;
    p.q = make_qproj(name + ".q", d, d);
    p.kv = make_kv(name + ".kv", d, d, d, out_init);
    p.n_heads = n_heads;
    return p;
}

FfnParams ParamFactory::make_ffn(const std::string& name, size_t d, size_t hidden,
                                 OutInit out_init) {
    FfnParams p;
    p.fc1 = make_linear(name + ".fc1", d, hidden);
    p.fc2 = make_linear(name + ".fc2", hidden, d, out_init);
    return p;
}

}  // namespace mogen
