#pragma once

#include <array>

#include "mogen/checkpoint.hpp"
#include "mogen/metrics.hpp"

namespace mogen {

// The six legal signal configurations (text always present).
enum class SignalConfig { none = 0, s = 1, o = 2, b = 3, ob = 4, so = 5 };
const char* signal_config_name(SignalConfig sc);
SignalConfig signal_config_from_name(const std::string& name);
SignalSet build_signals(SignalConfig sc, const AnnotationBundle& ann);

struct TrainConfig {
    size_t steps = 3000;
    size_t batch_size = 16;
    double lr_start = 5e-5;
    double lr_end = 5e-6;
    uint64_t seed = 0;
    // stage-2 sampling distribution over {T, T+S, T+O, T+B, T+O+B, T+S+O}
    std::array<double, 6> subset_weights = {1, 1, 1, 1, 1, 1};

    void validate() const {
        if (!(lr_start >= lr_end) || !(lr_end > 0))
            throw ContractError("TrainConfig: need lr_start >= lr_end > 0");
        if (steps < 1 || batch_size < 1) throw ContractError("TrainConfig: bad steps/batch");
    }
};

// Linear decay hitting lr_start at step 0 and lr_end at the final step.
double lr_at(const TrainConfig& cfg, size_t step);

class Adam {
public:
    Adam(ParamList trainables, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void zero_grad();
    void step(double lr);
    size_t steps_taken() const { return t_; }
    const ParamList& trainables() const { return params_; }

    TrainerState state() const;
    void load_state(const TrainerState& st);

private:
    ParamList params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    size_t t_ = 0;
};

// Trainable parameter set for a stage (everything else stays frozen).
ParamList stage_trainables(const ModelWeights& w, StageTag stage);

// eps-prediction MSE over one batch. Accumulates gradients into the current
// trainable set unless called under NoGradGuard.
double training_loss(ModelWeights& w, StageTag stage, const std::vector<const DatasetItem*>& pool,
                     const NoiseSchedule& sched, const TrainConfig& cfg, size_t step,
                     bool accumulate_grads);

struct TrainResult {
    std::vector<double> losses;  // per step
    std::vector<double> lrs;     // per step
};

// One training stage: selects trainables, freezes the rest, runs Adam with
// the linear LR decay. state_io carries optimizer state across save/resume;
// cfg.steps defines the schedule, stop_after (when non-zero) interrupts the
// run early so it can be resumed bit-exactly.
TrainResult run_stage(ModelWeights& w, StageTag stage, const std::vector<const DatasetItem*>& pool,
                      const TrainConfig& cfg, const NoiseSchedule& sched,
                      TrainerState* state_io = nullptr, size_t stop_after = 0);

// Convenience split: stage 1 trains on even item indices, stage 2 on odd.
std::vector<const DatasetItem*> dataset_view(const std::vector<DatasetItem>& items);
std::vector<const DatasetItem*> split_parity(const std::vector<DatasetItem>& items, size_t parity);

// --------------------------------------------------------------------------
// evaluation / ablation
// --------------------------------------------------------------------------

std::vector<Image> generate_set(const ModelWeights& w, StageTag stage,
                                const std::vector<const DatasetItem*>& items, SignalConfig sc,
                                size_t ddim_steps, uint64_t seed);

struct AblationEntry {
    std::string label;
    const ModelWeights* weights;
    StageTag stage;
    SignalConfig signals;
};

struct AblationRow {
    std::string label;
    std::string signals;
    MetricReport metrics;
};

std::vector<AblationRow> run_ablation(const std::vector<AblationEntry>& entries,
                                      const std::vector<const DatasetItem*>& held_out,
                                      size_t ddim_steps, uint64_t seed);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

void write_train_log_csv(const std::string& path, const TrainResult& result);

// --------------------------------------------------------------------------
// diagnostics
// --------------------------------------------------------------------------

// Phrase-branch cross-attention heatmap [l_phr x token_count], rows
// renormalized over the prompt tokens; also written as CSV when out_path is
// non-empty.
std::vector<std::vector<double>> dump_attention(const std::string& prompt, const ModelWeights& w,
                                                const std::string& out_path);

struct FeatureStats {
    std::string name;
    double min = 0.0, max = 0.0, median = 0.0;
    std::vector<size_t> histogram;  // 64 bins over [min, max]
    size_t count = 0;
};

// Distributions of the injected global/phrase features at the layout block.
std::vector<FeatureStats> feature_distribution(const std::vector<const DatasetItem*>& batch,
                                               const ModelWeights& w, const std::string& out_path);

// Raw spatial attention dump at the layout block (one row per spatial token).
void dump_spatial_attention(const std::string& prompt, const SignalSet& signals,
                            const ModelWeights& w, StageTag stage, const std::string& out_path);

// --------------------------------------------------------------------------
// gradient integrity
// --------------------------------------------------------------------------

// Central-difference check over every trainable parameter group (parser
// branches, phrase/intent queries, controller, interaction layers, encoders,
// backbone blocks) driven through the full pipeline on a reduced
// configuration. The loss combines a T+S+O item and a T+B item so every
// encoder path participates.
CheckReport full_pipeline_grad_check(uint64_t seed, size_t samples_per_param);

}  // namespace mogen
