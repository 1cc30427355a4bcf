#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mogen/encoders.hpp"
#include "mogen/rng.hpp"

using namespace mogen;

namespace {

ModelConfig small_cfg() {
    ModelConfig cfg;
    cfg.d = 16;
    cfg.d_net = 16;
    cfg.l_emb = 8;
    cfg.n_heads = 2;
    cfg.vocab = 512;
    return cfg;
}

// independent re-derivation of the published token hash
uint64_t ref_fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

TEST_CASE("tokenizer: lowercase, whitespace split, edge punctuation stripped") {
    auto t = tokenize("Two RED circles");
    REQUIRE(t.size() == 3);
    CHECK(t[0] == "two");
    CHECK(t[1] == "red");
    CHECK(t[2] == "circles");

    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n ").empty());

    auto p = tokenize("circles, and (1) square.");
    REQUIRE(p.size() == 4);
    CHECK(p[0] == "circles");
    CHECK(p[1] == "and");
    CHECK(p[2] == "1");
    CHECK(p[3] == "square");
}

TEST_CASE("token ids reproduce the published hash and never collide with pad") {
    const size_t vocab = 4096;
    for (const std::string tok : {"two", "red", "circles", "a", "scene"}) {
        CHECK(token_id(tok, vocab) == 1 + ref_fnv1a(tok) % (vocab - 1));
        CHECK(token_id(tok, vocab) != kPadId);
        CHECK(token_id(tok, vocab) < vocab);
    }
}

TEST_CASE("text_encode: padding, counting, truncation, purity") {
    ModelConfig cfg = small_cfg();
    ParamFactory pf(3);
    Tensor emb = pf.uniform("emb", {cfg.vocab, cfg.d}, -0.5, 0.5);

    SUBCASE("empty prompt is all pad rows") {
        TextEmbedding e = text_encode("", cfg, emb);
        CHECK(e.token_count == 0);
        CHECK(e.t_emb.rows() == cfg.l_emb);
        CHECK(e.t_emb.cols() == cfg.d);
        Tensor pe = positional_encoding_1d(cfg.l_emb, cfg.d);
        for (size_t i = 0; i < cfg.l_emb; ++i)
            for (size_t j = 0; j < cfg.d; ++j)
                CHECK(e.t_emb.at(i, j) == emb.at(kPadId, j) + pe.at(i, j));
    }

    SUBCASE("token_count reflects the prompt") {
        TextEmbedding e = text_encode("two red circles", cfg, emb);
        CHECK(e.token_count == 3);
    }

    SUBCASE("over-long prompts truncate to l_emb") {
        std::string prompt;
        for (int i = 0; i < 20; ++i) prompt += "tok" + std::to_string(i) + " ";
        TextEmbedding e = text_encode(prompt, cfg, emb);
        CHECK(e.token_count == cfg.l_emb);
        CHECK(e.t_emb.rows() == cfg.l_emb);
    }

    SUBCASE("pure function of the inputs") {
        TextEmbedding a = text_encode("three blue squares", cfg, emb);
        TextEmbedding b = text_encode("three blue squares", cfg, emb);
        CHECK(std::memcmp(a.t_emb.data(), b.t_emb.data(), a.t_emb.size() * 8) == 0);
    }
}

TEST_CASE("image_encode: shapes, zero-image collapse, determinism, shared weights") {
    ModelConfig cfg = small_cfg();
    EncoderWeights enc = EncoderWeights::init(cfg, 11);

    Image img(32, 32);
    Rng rng(4);
    for (double& v : img.px) v = rng.uniform(0.0, 1.0);

    Tensor s = image_encode(img, ImageRole::structure, cfg, enc);
    CHECK(s.rows() == 16);
    CHECK(s.cols() == cfg.d);
    Tensor o = image_encode(img, ImageRole::object, cfg, enc);
    CHECK(o.rows() == 4);
    CHECK(o.cols() == cfg.d);

    SUBCASE("all-zero image maps every token to bias plus position") {
        Image zero(32, 32);
        Tensor tok = image_encode(zero, ImageRole::structure, cfg, enc);
        Tensor pe = positional_encoding_2d(4, 4, cfg.d);
        for (size_t i = 0; i < tok.rows(); ++i)
            for (size_t j = 0; j < cfg.d; ++j)
                CHECK(tok.at(i, j) == doctest::Approx(enc.img_proj.b.at(j) + pe.at(i, j)).epsilon(1e-12));
    }

    SUBCASE("deterministic") {
        Tensor again = image_encode(img, ImageRole::structure, cfg, enc);
        CHECK(std::memcmp(s.data(), again.data(), s.size() * 8) == 0);
    }

    SUBCASE("both roles share the projection weights") {
        // nudging the shared projection moves both encodings
        enc.img_proj.w.mutable_data()[0] += 0.5;
        Tensor s2 = image_encode(img, ImageRole::structure, cfg, enc);
        Tensor o2 = image_encode(img, ImageRole::object, cfg, enc);
        CHECK(std::memcmp(s.data(), s2.data(), s.size() * 8) != 0);
        CHECK(std::memcmp(o.data(), o2.data(), o.size() * 8) != 0);
    }

    SUBCASE("non-divisible sizes are dimension errors") {
        Image odd(30, 30);
        CHECK_THROWS_AS(image_encode(odd, ImageRole::structure, cfg, enc), DimensionError);
    }
}

TEST_CASE("box_encode: empty case, periodic zeros, distinctness, row locality") {
    ModelConfig cfg = small_cfg();
    EncoderWeights enc = EncoderWeights::init(cfg, 12);

    Tensor none = box_encode({}, cfg, enc);
    CHECK(none.rows() == 0);
    CHECK(none.cols() == cfg.d);

    SUBCASE("unit box: sine features vanish") {
        const auto f = box_fourier_features({0.0, 0.0, 1.0, 1.0});
        for (size_t i = 0; i < 16; ++i) CHECK(std::fabs(f[i]) < 1e-12);
    }

    SUBCASE("distinct boxes produce distinct tokens") {
        Tensor two = box_encode({{0.1, 0.1, 0.4, 0.4}, {0.5, 0.5, 0.9, 0.8}}, cfg, enc);
        double dist = 0.0;
        for (size_t j = 0; j < cfg.d; ++j) {
            const double d = two.at(0, j) - two.at(1, j);
            dist += d * d;
        }
        CHECK(dist > 1e-8);
    }

    SUBCASE("row i depends only on box i") {
        std::vector<NormBox> boxes = {{0.1, 0.1, 0.3, 0.3}, {0.4, 0.2, 0.7, 0.6},
                                      {0.2, 0.6, 0.5, 0.9}};
        Tensor fwd = box_encode(boxes, cfg, enc);
        std::vector<NormBox> perm = {boxes[2], boxes[0], boxes[1]};
        Tensor rev = box_encode(perm, cfg, enc);
        const size_t d = cfg.d;
        CHECK(std::memcmp(fwd.data() + 2 * d, rev.data() + 0 * d, d * 8) == 0);
        CHECK(std::memcmp(fwd.data() + 0 * d, rev.data() + 1 * d, d * 8) == 0);
        CHECK(std::memcmp(fwd.data() + 1 * d, rev.data() + 2 * d, d * 8) == 0);
    }

    SUBCASE("degenerate box is a contract error") {
        CHECK_THROWS_AS(box_encode({{0.5, 0.5, 0.5, 0.9}}, cfg, enc), ContractError);
    }
}
