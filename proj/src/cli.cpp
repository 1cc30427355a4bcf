#include "mogen/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "mogen/train.hpp"

namespace fs = std::filesystem;

namespace mogen::cli {
namespace {

struct ModelFlags {
    ModelConfig cfg;
    void attach(CLI::App* app) {
        app->add_option("--d", cfg.d, "conditioning width");
        app->add_option("--d-net", cfg.d_net, "denoiser token width");
        app->add_option("--l-emb", cfg.l_emb, "text embedding length");
        app->add_option("--l-phr", cfg.l_phr, "phrase query count");
        app->add_option("--l-str", cfg.l_str, "structured intent length");
        app->add_option("--blocks", cfg.n_blocks, "denoiser block count");
        app->add_option("--layout-block", cfg.layout_block, "1-based layout block index");
        app->add_option("--image-size", cfg.image_size, "image side length");
        app->add_option("--patch", cfg.patch, "denoiser patch size");
        app->add_option("--heads", cfg.n_heads, "attention heads");
        app->add_option("--t-steps", cfg.t_steps, "diffusion steps");
        app->add_option("--vocab", cfg.vocab, "hash vocabulary size");
    }
};

std::vector<NormBox> parse_boxes(const std::string& arg) {
    std::vector<NormBox> boxes;
    size_t pos = 0;
    while (pos < arg.size()) {
        size_t end = arg.find(';', pos);
        if (end == std::string::npos) end = arg.size();
        const std::string part = arg.substr(pos, end - pos);
        double v[4];
        if (std::sscanf(part.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4)
            throw ContractError("--boxes: expected x0,y0,x1,y1 groups separated by ';', got \"" +
                                part + "\"");
        NormBox b{v[0], v[1], v[2], v[3]};
        b.validate();
        boxes.push_back(b);
        pos = end + 1;
    }
    return boxes;
}

std::vector<std::string> split_commas(const std::string& arg) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= arg.size()) {
        size_t end = arg.find(',', pos);
        if (end == std::string::npos) end = arg.size();
        if (end > pos) out.push_back(arg.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

Checkpoint load_ck(const std::string& path, std::initializer_list<StageTag> allowed,
                   const char* what) {
    Checkpoint ck = load_checkpoint(path);
    for (StageTag t : allowed)
        if (ck.stage == t) return ck;
    throw ContractError(std::string(what) + ": checkpoint " + path + " has stage '" +
                        stage_name(ck.stage) + "', which this command cannot consume");
}

void save_stage(const std::string& path, const ModelWeights& w, StageTag stage,
                const TrainerState& st) {
    save_checkpoint(path, w, stage, &st);
    std::printf("saved %s checkpoint: %s\n", stage_name(stage), path.c_str());
}

int train_command(StageTag stage, const std::string& data_dir, const std::string& init_path,
                  const std::string& out_path, const std::string& log_path, TrainConfig tcfg,
                  const ModelConfig* fresh_cfg, const std::string& resume_path) {
    const std::vector<DatasetItem> items = load_dataset(data_dir);
    if (items.empty()) throw ContractError("training: dataset in " + data_dir + " is empty");

    ModelWeights weights;
    TrainerState state;
    if (!resume_path.empty()) {
        Checkpoint ck = load_ck(resume_path, {stage}, "resume");
        weights = std::move(ck.weights);
        if (!ck.trainer) throw ContractError("resume: checkpoint has no trainer state");
        state = *ck.trainer;
    } else if (stage == StageTag::pretrain) {
        weights = ModelWeights::init(*fresh_cfg, tcfg.seed);
    } else if (stage == StageTag::rsa) {
        weights = load_ck(init_path, {StageTag::pretrain}, "train-rsa").weights;
    } else if (stage == StageTag::amg) {
        weights = load_ck(init_path, {StageTag::rsa}, "train-amg").weights;
    } else {
        weights = load_ck(init_path, {StageTag::pretrain}, "train-amg --no-rsa").weights;
    }

    std::vector<const DatasetItem*> pool;
    if (stage == StageTag::pretrain)
        pool = dataset_view(items);
    else if (stage == StageTag::rsa)
        pool = split_parity(items, 0);
    else
        pool = split_parity(items, 1);
    if (pool.empty()) throw ContractError("training: stage split left no items");

    const NoiseSchedule sched = make_schedule(weights.cfg.t_steps);
    const TrainResult result = run_stage(weights, stage, pool, tcfg, sched, &state);
    if (!log_path.empty()) write_train_log_csv(log_path, result);
    if (!result.losses.empty())
        std::printf("steps %zu..%zu  first loss %.6f  last loss %.6f\n",
                    tcfg.steps - result.losses.size(), tcfg.steps - 1, result.losses.front(),
                    result.losses.back());
    save_stage(out_path, weights, stage, state);
    return 0;
}

int run_or_report(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"mogen: quantity-consistent multi-object image generation"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a MoCA-mini dataset");
    size_t gen_n = 100;
    uint64_t gen_seed = 0;
    std::string gen_dir;
    DataConfig dcfg;
    gen->add_option("--n", gen_n, "item count")->required();
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--dir", gen_dir, "output directory")->required();
    gen->add_option("--min-objects", dcfg.min_objects, "minimum objects per scene");
    gen->add_option("--max-objects", dcfg.max_objects, "maximum objects per scene");
    gen->add_option("--canvas", dcfg.canvas, "canvas side length");
    gen->add_option("--min-box", dcfg.min_box_px, "minimum box side in pixels");
    gen->add_option("--max-box", dcfg.max_box_px, "maximum box side in pixels");
    gen->add_flag("--single-group", dcfg.single_group, "one color+shape pair per scene");

    // ---- shared training flags ----
    struct TrainFlags {
        std::string data, init, out, log, resume;
        TrainConfig tcfg;
        void attach(CLI::App* cmd, bool needs_init) {
            cmd->add_option("--data", data, "dataset directory")->required();
            if (needs_init) cmd->add_option("--init", init, "input checkpoint");
            cmd->add_option("--out", out, "output checkpoint")->required();
            cmd->add_option("--log", log, "per-step CSV log");
            cmd->add_option("--resume", resume, "resume from a checkpoint with trainer state");
            cmd->add_option("--steps", tcfg.steps, "training steps");
            cmd->add_option("--batch", tcfg.batch_size, "batch size");
            cmd->add_option("--seed", tcfg.seed, "training seed");
            cmd->add_option("--lr-start", tcfg.lr_start, "initial learning rate");
            cmd->add_option("--lr-end", tcfg.lr_end, "final learning rate");
        }
    };

    auto* pre = app.add_subcommand("pretrain", "stage 0: backbone on raw text embeddings");
    TrainFlags pre_flags;
    pre_flags.attach(pre, false);
    ModelFlags model_flags;
    model_flags.attach(pre);

    auto* trsa = app.add_subcommand("train-rsa", "stage 1: semantic parser on a frozen backbone");
    TrainFlags rsa_flags;
    rsa_flags.attach(trsa, true);

    auto* tamg = app.add_subcommand("train-amg", "stage 2: signal guidance on frozen backbone+parser");
    TrainFlags amg_flags;
    amg_flags.attach(tamg, true);
    bool amg_no_rsa = false;
    tamg->add_flag("--no-rsa", amg_no_rsa, "attach guidance to a stage-0 backbone (ablation row)");

    // ---- sample ----
    auto* smp = app.add_subcommand("sample", "generate one image");
    std::string smp_ckpt, smp_prompt, smp_out, smp_boxes, smp_structure, smp_objects;
    uint64_t smp_seed = 0;
    size_t smp_steps = 20;
    smp->add_option("--ckpt", smp_ckpt, "checkpoint")->required();
    smp->add_option("--prompt", smp_prompt, "text prompt")->required();
    smp->add_option("--out", smp_out, "output PPM path")->required();
    smp->add_option("--seed", smp_seed, "sampler seed");
    smp->add_option("--steps", smp_steps, "DDIM steps");
    smp->add_option("--boxes", smp_boxes, "bounding boxes x0,y0,x1,y1;... (normalized)");
    smp->add_option("--structure", smp_structure, "structure reference PPM");
    smp->add_option("--objects", smp_objects, "object reference PPMs, comma separated");

    // ---- eval ----
    auto* evl = app.add_subcommand("eval", "metric suite over a dataset");
    std::string evl_ckpt, evl_data, evl_signals = "T", evl_out;
    size_t evl_n = 0, evl_steps = 20;
    uint64_t evl_seed = 0;
    evl->add_option("--ckpt", evl_ckpt, "checkpoint")->required();
    evl->add_option("--data", evl_data, "dataset directory")->required();
    evl->add_option("--signals", evl_signals, "signal configuration (T, T+S, T+O, T+B, T+O+B, T+S+O)");
    evl->add_option("--n", evl_n, "evaluate only the first N items (0 = all)");
    evl->add_option("--steps", evl_steps, "DDIM steps");
    evl->add_option("--seed", evl_seed, "evaluation seed");
    evl->add_option("--out", evl_out, "CSV output path");

    // ---- ablate ----
    auto* abl = app.add_subcommand("ablate", "ablation matrix over trained checkpoints");
    std::string abl_held, abl_base, abl_rsa, abl_full, abl_amg_only, abl_out;
    size_t abl_n = 0, abl_steps = 20;
    uint64_t abl_seed = 0;
    abl->add_option("--held", abl_held, "held-out dataset directory")->required();
    abl->add_option("--ckpt-baseline", abl_base, "stage-0 checkpoint")->required();
    abl->add_option("--ckpt-rsa", abl_rsa, "stage-1 checkpoint")->required();
    abl->add_option("--ckpt-full", abl_full, "stage-2 checkpoint")->required();
    abl->add_option("--ckpt-amg-only", abl_amg_only, "guidance-on-stage-0 checkpoint (optional row)");
    abl->add_option("--out", abl_out, "CSV output path")->required();
    abl->add_option("--n", abl_n, "evaluate only the first N items (0 = all)");
    abl->add_option("--steps", abl_steps, "DDIM steps");
    abl->add_option("--seed", abl_seed, "evaluation seed");

    // ---- diagnose ----
    auto* dia = app.add_subcommand("diagnose", "attention and feature-distribution dumps");
    std::string dia_ckpt, dia_prompt = "a scene with 2 red circles and 1 blue square";
    std::string dia_out_dir = ".", dia_data;
    size_t dia_n = 8;
    dia->add_option("--ckpt", dia_ckpt, "checkpoint")->required();
    dia->add_option("--prompt", dia_prompt, "prompt for attention dumps");
    dia->add_option("--out-dir", dia_out_dir, "output directory");
    dia->add_option("--data", dia_data, "dataset for feature distributions");
    dia->add_option("--n", dia_n, "items to probe");

    // ---- grad-check ----
    auto* gck = app.add_subcommand("grad-check", "finite-difference check of every parameter group");
    uint64_t gck_seed = 0;
    size_t gck_samples = 8;
    double gck_tol = 1e-6;
    gck->add_option("--seed", gck_seed, "seed");
    gck->add_option("--samples", gck_samples, "entries sampled per parameter");
    gck->add_option("--tol", gck_tol, "max relative error accepted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        return run_or_report([&]() {
            const auto items = make_dataset(gen_seed, gen_n, dcfg);
            save_dataset(items, gen_dir);
            std::printf("wrote %zu items to %s\n", items.size(), gen_dir.c_str());
            return 0;
        });
    }
    if (pre->parsed()) {
        return run_or_report([&]() {
            model_flags.cfg.validate();
            return train_command(StageTag::pretrain, pre_flags.data, "", pre_flags.out,
                                 pre_flags.log, pre_flags.tcfg, &model_flags.cfg,
                                 pre_flags.resume);
        });
    }
    if (trsa->parsed()) {
        return run_or_report([&]() {
            return train_command(StageTag::rsa, rsa_flags.data, rsa_flags.init, rsa_flags.out,
                                 rsa_flags.log, rsa_flags.tcfg, nullptr, rsa_flags.resume);
        });
    }
    if (tamg->parsed()) {
        return run_or_report([&]() {
            return train_command(amg_no_rsa ? StageTag::amg_no_rsa : StageTag::amg, amg_flags.data,
                                 amg_flags.init, amg_flags.out, amg_flags.log, amg_flags.tcfg,
                                 nullptr, amg_flags.resume);
        });
    }
    if (smp->parsed()) {
        return run_or_report([&]() {
            Checkpoint ck = load_checkpoint(smp_ckpt);
            GenRequest req;
            req.prompt = smp_prompt;
            req.n_steps = smp_steps;
            req.seed = smp_seed;
            if (!smp_boxes.empty()) req.signals.boxes = parse_boxes(smp_boxes);
            if (!smp_structure.empty()) req.signals.structure = read_ppm(smp_structure);
            for (const auto& p : split_commas(smp_objects))
                req.signals.objects.push_back(read_ppm(p));
            req.signals.validate();
            const NoiseSchedule sched = make_schedule(ck.weights.cfg.t_steps);
            const Image img = generate(req, ck.weights, cond_mode_for(ck.stage), sched);
            write_ppm(smp_out, img);
            std::printf("wrote %s\n", smp_out.c_str());
            return 0;
        });
    }
    if (evl->parsed()) {
        return run_or_report([&]() {
            Checkpoint ck = load_checkpoint(evl_ckpt);
            const SignalConfig sc = signal_config_from_name(evl_signals);
            std::vector<DatasetItem> items = load_dataset(evl_data);
            if (evl_n > 0 && evl_n < items.size()) items.resize(evl_n);
            const auto view = dataset_view(items);
            const auto gen_imgs = generate_set(ck.weights, ck.stage, view, sc, evl_steps, evl_seed);
            const MetricReport rep = evaluate_set(gen_imgs, view);
            if (!evl_out.empty()) write_eval_csv(evl_out, rep);
            std::printf("items %zu  numerical %.2f  spatial %.4f  appearance %.4f  img_sim %.4f\n",
                        rep.items, rep.numerical, rep.spatial, rep.appearance,
                        rep.image_similarity);
            return 0;
        });
    }
    if (abl->parsed()) {
        return run_or_report([&]() {
            Checkpoint base = load_ck(abl_base, {StageTag::pretrain}, "ablate baseline");
            Checkpoint rsa_ck = load_ck(abl_rsa, {StageTag::rsa}, "ablate rsa");
            Checkpoint full = load_ck(abl_full, {StageTag::amg}, "ablate full");
            std::vector<DatasetItem> held = load_dataset(abl_held);
            if (abl_n > 0 && abl_n < held.size()) held.resize(abl_n);
            const auto view = dataset_view(held);

            std::vector<AblationEntry> entries = {
                {"baseline", &base.weights, base.stage, SignalConfig::none},
                {"rsa_only", &rsa_ck.weights, rsa_ck.stage, SignalConfig::none},
                {"full", &full.weights, full.stage, SignalConfig::none},
                {"full", &full.weights, full.stage, SignalConfig::b},
                {"full", &full.weights, full.stage, SignalConfig::o},
                {"full", &full.weights, full.stage, SignalConfig::s},
            };
            Checkpoint amg_only;
            if (!abl_amg_only.empty()) {
                amg_only = load_ck(abl_amg_only, {StageTag::amg_no_rsa}, "ablate amg-only");
                entries.insert(entries.begin() + 2,
                               {"amg_only", &amg_only.weights, amg_only.stage, SignalConfig::b});
            }
            const auto rows = run_ablation(entries, view, abl_steps, abl_seed);
            write_ablation_csv(abl_out, rows);
            for (const auto& r : rows)
                std::printf("%-10s %-6s numerical %6.2f  spatial %.4f\n", r.label.c_str(),
                            r.signals.c_str(), r.metrics.numerical, r.metrics.spatial);
            return 0;
        });
    }
    if (dia->parsed()) {
        return run_or_report([&]() {
            Checkpoint ck = load_checkpoint(dia_ckpt);
            fs::create_directories(dia_out_dir);
            const fs::path out(dia_out_dir);
            dump_attention(dia_prompt, ck.weights, (out / "phrase_attention.csv").string());
            dump_spatial_attention(dia_prompt, SignalSet{}, ck.weights, ck.stage,
                                   (out / "spatial_attention.csv").string());
            if (!dia_data.empty()) {
                std::vector<DatasetItem> items = load_dataset(dia_data);
                if (dia_n > 0 && dia_n < items.size()) items.resize(dia_n);
                feature_distribution(dataset_view(items), ck.weights,
                                     (out / "feature_distribution.csv").string());
            }
            std::printf("diagnostics written to %s\n", dia_out_dir.c_str());
            return 0;
        });
    }
    if (gck->parsed()) {
        return run_or_report([&]() {
            const CheckReport report = full_pipeline_grad_check(gck_seed, gck_samples);
            double worst = 0.0;
            std::string worst_name;
            for (const auto& p : report.params) {
                if (p.max_rel_err > worst) {
                    worst = p.max_rel_err;
                    worst_name = p.name;
                }
            }
            std::printf("checked %zu parameter tensors; worst rel err %.3e (%s)\n",
                        report.params.size(), worst, worst_name.c_str());
            if (worst >= gck_tol) {
                std::fprintf(stderr, "grad-check FAILED at tolerance %g\n", gck_tol);
                return 2;
            }
            std::printf("grad-check passed at tolerance %g\n", gck_tol);
            return 0;
        });
    }
    return 1;
}

}  // namespace mogen::cli
