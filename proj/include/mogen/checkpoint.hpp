#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mogen/diffusion.hpp"

namespace mogen {

// Which pipeline produced a checkpoint; drives the conditioning mode used
// when sampling from it.
enum class StageTag : uint32_t { pretrain = 0, rsa = 1, amg = 2, amg_no_rsa = 3 };

inline CondMode cond_mode_for(StageTag s) {
    return (s == StageTag::pretrain || s == StageTag::amg_no_rsa) ? CondMode::raw_text
                                                                  : CondMode::rsa;
}

const char* stage_name(StageTag s);

struct AdamSlot {
    std::string name;
    std::vector<double> m, v;
};

struct TrainerState {
    size_t step = 0;
    std::vector<AdamSlot> slots;
};

struct Checkpoint {
    ModelWeights weights;
    StageTag stage = StageTag::pretrain;
    std::optional<TrainerState> trainer;
};

// Binary container, magic "MOGD1", little-endian. Named segments (config /
// backbone / rsa / amg / encoders and optionally trainer), each a list of
// (name, shape, row-major doubles).
void save_checkpoint(const std::string& path, const ModelWeights& w, StageTag stage,
                     const TrainerState* trainer = nullptr);
Checkpoint load_checkpoint(const std::string& path);

// Serialized bytes of one weight segment; freeze contracts compare these.
std::vector<uint8_t> segment_bytes(const ModelWeights& w, const std::string& segment);

}  // namespace mogen
