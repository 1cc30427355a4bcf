#pragma once

#include <cstddef>
#include <vector>

#include "mogen/tensor.hpp"

namespace mogen {

// Model hyperparameters. Defaults target the 32x32 pixel-space denoiser with
// 64 spatial tokens; the layout block index is 1-based.
struct ModelConfig {
    size_t d = 64;       // conditioning width
    size_t d_net = 64;   // denoiser token width
    size_t l_emb = 32;   // text embedding length
    size_t l_phr = 8;    // phrase query count
    size_t l_str = 16;   // structured intent length
    size_t n_blocks = 6;
    size_t layout_block = 4;
    size_t image_size = 32;
    size_t patch = 4;
    size_t n_heads = 4;
    size_t t_steps = 200;
    size_t vocab = 4096;
    size_t struct_patch = 8;
    size_t object_patch = 16;

    size_t grid() const { return image_size / patch; }
    size_t l_net() const { return grid() * grid(); }
    size_t patch_dim() const { return patch * patch * 3; }

    void validate() const {
        if (layout_block < 1 || layout_block > n_blocks)
            throw ContractError("ModelConfig: layout_block must be in [1, n_blocks]");
        if (image_size % patch != 0)
            throw ContractError("ModelConfig: image_size must be divisible by patch");
        if (image_size % struct_patch != 0 || image_size % object_patch != 0)
            throw ContractError("ModelConfig: image_size must be divisible by encoder patches");
        if (d % n_heads != 0 || d_net % n_heads != 0)
            throw ContractError("ModelConfig: widths must be divisible by n_heads");
        if (t_steps < 1) throw ContractError("ModelConfig: t_steps must be >= 1");
        if (vocab < 2) throw ContractError("ModelConfig: vocab must be >= 2");
    }

    std::vector<double> to_doubles() const {
        return {double(d),          double(d_net),     double(l_emb),   double(l_phr),
                double(l_str),      double(n_blocks),  double(layout_block),
                double(image_size), double(patch),     double(n_heads), double(t_steps),
                double(vocab),      double(struct_patch), double(object_patch)};
    }

    static ModelConfig from_doubles(const std::vector<double>& v) {
        if (v.size() != 14) throw ContractError("ModelConfig: bad serialized config");
        ModelConfig c;
        size_t i = 0;
        auto next = [&]() { return static_cast<size_t>(v[i++]); };
        c.d = next(); c.d_net = next(); c.l_emb = next(); c.l_phr = next();
        c.l_str = next(); c.n_blocks = next(); c.layout_block = next();
        c.image_size = next(); c.patch = next(); c.n_heads = next(); c.t_steps = next();
        c.vocab = next(); c.struct_patch = next(); c.object_patch = next();
        c.validate();
        return c;
    }
};

}  // namespace mogen
