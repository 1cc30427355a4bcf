#include "mogen/encoders.hpp"

#include <cctype>
#include <cmath>

#include "mogen/rng.hpp"

namespace mogen {

std::vector<std::string> tokenize(const std::string& prompt) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        // strip edge punctuation, keep interior characters
        size_t b = 0, e = cur.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(cur[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(cur[e - 1]))) --e;
        if (e > b) out.push_back(cur.substr(b, e - b));
        cur.clear();
    };
    for (char ch : prompt) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    flush();
    return out;
}

size_t token_id(const std::string& token, size_t vocab) {
    return 1 + fnv1a(token.data(), token.size()) % (vocab - 1);
}

std::vector<size_t> prompt_ids(const std::string& prompt, size_t vocab) {
    std::vector<size_t> ids;
    for (const auto& t : tokenize(prompt)) ids.push_back(token_id(t, vocab));
    return ids;
}

Tensor positional_encoding_1d(size_t length, size_t d) {
    std::vector<double> pe(length * d);
    for (size_t i = 0; i < length; ++i) {
        for (size_t j = 0; j < d; j += 2) {
            const double div = std::pow(10000.0, static_cast<double>(j) / static_cast<double>(d));
            pe[i * d + j] = std::sin(static_cast<double>(i) / div);
            if (j + 1 < d) pe[i * d + j + 1] = std::cos(static_cast<double>(i) / div);
        }
    }
    return Tensor::from_data({length, d}, std::move(pe));
}

Tensor positional_encoding_2d(size_t grid_h, size_t grid_w, size_t d) {
    const size_t half = d / 2;
    Tensor row_pe = positional_encoding_1d(grid_h, half);
    Tensor col_pe = positional_encoding_1d(grid_w, d - half);
    std::vector<double> pe(grid_h * grid_w * d);
    for (size_t r = 0; r < grid_h; ++r)
        for (size_t c = 0; c < grid_w; ++c) {
            double* row = pe.data() + (r * grid_w + c) * d;
            for (size_t j = 0; j < half; ++j) row[j] = row_pe.at(r, j);
            for (size_t j = 0; j < d - half; ++j) row[half + j] = col_pe.at(c, j);
        }
    return Tensor::from_data({grid_h * grid_w, d}, std::move(pe));
}

void EncoderWeights::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".text_emb", text_emb});
    img_proj.collect(prefix + ".img_proj", out);
    box_fc1.collect(prefix + ".box_fc1", out);
    box_fc2.collect(prefix + ".box_fc2", out);
}

EncoderWeights EncoderWeights::init(const ModelConfig& cfg, uint64_t seed) {
    ParamFactory pf(seed);
    EncoderWeights w;
    w.text_emb = pf.uniform("enc.text_emb", {cfg.vocab, cfg.d}, -0.5, 0.5);
    const size_t patch_dim = cfg.struct_patch * cfg.struct_patch * 3;
    w.img_proj = pf.make_linear("enc.img_proj", patch_dim, cfg.d);
    w.box_fc1 = pf.make_linear("enc.box_fc1", 32, cfg.d);
    w.box_fc2 = pf.make_linear("enc.box_fc2", cfg.d, cfg.d);
    return w;
}

TextEmbedding text_encode(const std::string& prompt, const ModelConfig& cfg,
                          const Tensor& emb_table) {
    std::vector<size_t> ids = prompt_ids(prompt, cfg.vocab);
    const size_t token_count = std::min(ids.size(), cfg.l_emb);
    ids.resize(cfg.l_emb, kPadId);
    Tensor rows = gather_rows(emb_table, ids);
    Tensor pe = positional_encoding_1d(cfg.l_emb, cfg.d);
    return TextEmbedding{add(rows, pe), token_count};
}

Tensor image_encode(const Image& img, ImageRole role, const ModelConfig& cfg,
                    const EncoderWeights& enc) {
    const size_t p = role == ImageRole::structure ? cfg.struct_patch : cfg.object_patch;
    if (img.h % p != 0 || img.w % p != 0)
        throw DimensionError("image_encode: image size not divisible by the role patch size");
    const size_t pool = p / cfg.struct_patch;
    if (pool * cfg.struct_patch != p)
        throw DimensionError("image_encode: role patch must be a multiple of the base patch");
    const size_t gh = img.h / p, gw = img.w / p;
    const size_t base = cfg.struct_patch;
    const size_t patch_dim = base * base * 3;

    std::vector<double> tokens(gh * gw * patch_dim);
    for (size_t gy = 0; gy < gh; ++gy)
        for (size_t gx = 0; gx < gw; ++gx) {
            double* tok = tokens.data() + (gy * gw + gx) * patch_dim;
            for (size_t by = 0; by < base; ++by)
                for (size_t bx = 0; bx < base; ++bx)
                    for (size_t c = 0; c < 3; ++c) {
                        // average-pool pool x pool source pixels into one cell
                        double acc = 0.0;
                        for (size_t oy = 0; oy < pool; ++oy)
                            for (size_t ox = 0; ox < pool; ++ox)
                                acc += img.at(gy * p + by * pool + oy, gx * p + bx * pool + ox, c);
                        tok[(by * base + bx) * 3 + c] = acc / static_cast<double>(pool * pool);
                    }
        }
    Tensor patches = Tensor::from_data({gh * gw, patch_dim}, std::move(tokens));
    Tensor projected = linear(patches, enc.img_proj);
    return add(projected, positional_encoding_2d(gh, gw, cfg.d));
}

std::array<double, 32> box_fourier_features(const NormBox& box) {
    box.validate();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double freqs[4] = {1.0, 2.0, 4.0, 8.0};
    const double coords[4] = {box.x0, box.y0, box.x1, box.y1};
    std::array<double, 32> f{};
    size_t j = 0;
    for (double k : freqs)
        for (double c : coords) f[j++] = std::sin(kTwoPi * k * c);
    for (double k : freqs)
        for (double c : coords) f[j++] = std::cos(kTwoPi * k * c);
    return f;
}

Tensor box_encode(const std::vector<NormBox>& boxes, const ModelConfig& cfg,
                  const EncoderWeights& enc) {
    if (boxes.empty()) return Tensor::zeros({0, cfg.d});
    std::vector<double> feats(boxes.size() * 32);
    for (size_t i = 0; i < boxes.size(); ++i) {
        const auto f = box_fourier_features(boxes[i]);
        std::copy(f.begin(), f.end(), feats.begin() + static_cast<long>(i) * 32);
    }
    Tensor x = Tensor::from_data({boxes.size(), 32}, std::move(feats));
    return linear(gelu(linear(x, enc.box_fc1)), enc.box_fc2);
}

}  // namespace mogen
