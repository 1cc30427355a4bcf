#pragma once

#include <array>
#include <string>
#include <vector>

#include "mogen/config.hpp"
#include "mogen/geometry.hpp"
#include "mogen/image.hpp"
#include "mogen/nn.hpp"

namespace mogen {

inline constexpr size_t kPadId = 0;

// Hash vocabulary: lowercase whitespace tokens, FNV-1a into [1, vocab-1].
// Id 0 is the reserved pad row and is never produced by hashing.
std::vector<std::string> tokenize(const std::string& prompt);
size_t token_id(const std::string& token, size_t vocab);
std::vector<size_t> prompt_ids(const std::string& prompt, size_t vocab);

struct TextEmbedding {
    Tensor t_emb;        // [l_emb x d]
    size_t token_count;  // non-pad length
};

enum class ImageRole { structure, object };

struct EncoderWeights {
    Tensor text_emb;        // [vocab x d]
    LinearParams img_proj;  // shared patch projection for both image roles
    LinearParams box_fc1, box_fc2;

    void collect(const std::string& prefix, ParamList& out) const;
    static EncoderWeights init(const ModelConfig& cfg, uint64_t seed);
};

// Sinusoidal position tables (constants, no grad).
Tensor positional_encoding_1d(size_t length, size_t d);
Tensor positional_encoding_2d(size_t grid_h, size_t grid_w, size_t d);

TextEmbedding text_encode(const std::string& prompt, const ModelConfig& cfg,
                          const Tensor& emb_table);

// Non-overlapping patches -> (pooled to the structure patch size) -> shared
// linear -> 2-D positions. structure: 16 tokens on 32x32, object: 4 tokens.
Tensor image_encode(const Image& img, ImageRole role, const ModelConfig& cfg,
                    const EncoderWeights& enc);

// Fourier features of (x0,y0,x1,y1) at frequencies {1,2,4,8}: 16 sines then
// 16 cosines.
std::array<double, 32> box_fourier_features(const NormBox& box);

// Fourier features -> 2-layer MLP, one token per box.
Tensor box_encode(const std::vector<NormBox>& boxes, const ModelConfig& cfg,
                  const EncoderWeights& enc);

}  // namespace mogen
