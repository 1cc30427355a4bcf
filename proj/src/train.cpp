#include "mogen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mogen/parallel.hpp"

namespace mogen {

const char* signal_config_name(SignalConfig sc) {
    switch (sc) {
        case SignalConfig::none: return "T";
        case SignalConfig::s: return "T+S";
        case SignalConfig::o: return "T+O";
        case SignalConfig::b: return "T+B";
        case SignalConfig::ob: return "T+O+B";
        case SignalConfig::so: return "T+S+O";
    }
    return "?";
}

SignalConfig signal_config_from_name(const std::string& name) {
    for (int i = 0; i < 6; ++i)
        if (name == signal_config_name(static_cast<SignalConfig>(i)))
            return static_cast<SignalConfig>(i);
    throw ContractError("unknown signal configuration: " + name +
                        " (legal: T, T+S, T+O, T+B, T+O+B, T+S+O)");
}

SignalSet build_signals(SignalConfig sc, const AnnotationBundle& ann) {
    SignalSet s;
    switch (sc) {
        case SignalConfig::none: break;
        case SignalConfig::s: s.structure = ann.structure_ref; break;
        case SignalConfig::o: s.objects = ann.object_refs; break;
        case SignalConfig::b: s.boxes = ann.boxes; break;
        case SignalConfig::ob:
            s.objects = ann.object_refs;
            s.boxes = ann.boxes;
            break;
        case SignalConfig::so:
            s.structure = ann.structure_ref;
            s.objects = ann.object_refs;
            break;
    }
    return s;
}

double lr_at(const TrainConfig& cfg, size_t step) {
    if (cfg.steps <= 1 || step == 0) return cfg.lr_start;
    if (step >= cfg.steps - 1) return cfg.lr_end;  // endpoints exact by construction
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
}

// --------------------------------------------------------------------------
// Adam
// --------------------------------------------------------------------------

Adam::Adam(ParamList trainables, double beta1, double beta2, double eps)
    : params_(std::move(trainables)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].t.size(), 0.0);
        v_[i].assign(params_[i].t.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) const_cast<Tensor&>(p.t).zero_grad();
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = const_cast<Tensor&>(params_[i].t);
        const double* g = p.grad_data();
        double* w = p.mutable_data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const size_t n = p.size();
        for (size_t j = 0; j < n; ++j) {
            const double gj = g ? g[j] : 0.0;
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

TrainerState Adam::state() const {
    TrainerState st;
    st.step = t_;
    for (size_t i = 0; i < params_.size(); ++i)
        st.slots.push_back({params_[i].name, m_[i], v_[i]});
    return st;
}

void Adam::load_state(const TrainerState& st) {
    t_ = st.step;
    for (size_t i = 0; i < params_.size(); ++i) {
        const auto it = std::find_if(st.slots.begin(), st.slots.end(),
                                     [&](const AdamSlot& s) { return s.name == params_[i].name; });
        if (it == st.slots.end())
            throw MogenError("Adam::load_state: missing slot for " + params_[i].name);
        if (it->m.size() != m_[i].size() || it->v.size() != v_[i].size())
            throw MogenError("Adam::load_state: size mismatch for " + params_[i].name);
        m_[i] = it->m;
        v_[i] = it->v;
    }
}

// --------------------------------------------------------------------------
// stages
// --------------------------------------------------------------------------

ParamList stage_trainables(const ModelWeights& w, StageTag stage) {
    ParamList out;
    switch (stage) {
        case StageTag::pretrain: {
            out = w.params("backbone");
            out.push_back({"encoders.text_emb", w.enc.text_emb});
            break;
        }
        case StageTag::rsa: {
            out = w.params("rsa");
            break;
        }
        case StageTag::amg:
        case StageTag::amg_no_rsa: {
            out = w.params("amg");
            // signal-path encoders train with AMG; the text table stays frozen
            w.enc.img_proj.collect("encoders.img_proj", out);
            w.enc.box_fc1.collect("encoders.box_fc1", out);
            w.enc.box_fc2.collect("encoders.box_fc2", out);
            break;
        }
    }
    return out;
}

namespace {

SignalConfig draw_subset(const TrainConfig& cfg, Rng& rng) {
    double total = 0.0;
    for (double w : cfg.subset_weights) total += w;
    if (total <= 0.0) return SignalConfig::none;
    double u = rng.uniform() * total;
    for (int i = 0; i < 6; ++i) {
        u -= cfg.subset_weights[static_cast<size_t>(i)];
        if (u < 0.0) return static_cast<SignalConfig>(i);
    }
    return SignalConfig::so;
}

// training target in the [-1,1] diffusion space
Tensor image_tensor(const Image& img) {
    const size_t n = img.px.size();
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = encode_pixel(img.px[i]);
    return Tensor::from_data({n}, std::move(v));
}

}  // namespace

double training_loss(ModelWeights& w, StageTag stage, const std::vector<const DatasetItem*>& pool,
                     const NoiseSchedule& sched, const TrainConfig& cfg, size_t step,
                     bool accumulate_grads) {
    if (pool.empty()) throw ContractError("training_loss: empty dataset");
    const size_t npix = w.cfg.image_size * w.cfg.image_size * 3;
    double loss_acc = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

    for (size_t j = 0; j < cfg.batch_size; ++j) {
        Rng rb = Rng::stream(cfg.seed, {rngkey::batch, step, j});
        const DatasetItem& item = *pool[rb.below(pool.size())];

        Rng rt = Rng::stream(cfg.seed, {rngkey::timestep, step, j});
        const size_t t = rt.below(sched.steps());

        Rng re = Rng::stream(cfg.seed, {rngkey::noise, step, j});
        std::vector<double> eps_data(npix);
        for (double& v : eps_data) v = re.normal();
        Tensor eps = Tensor::from_data({npix}, std::move(eps_data));

        // stage-specific conditioning
        const Image* target = &item.image;
        AnnotationBundle aug_bundle;
        Image aug_image;
        StructuredIntent intent;
        bool use_intent = false;
        SemanticBundle cond;
        const bool amg_stage = stage == StageTag::amg || stage == StageTag::amg_no_rsa;

        const AnnotationBundle* ann = &item.ann;
        if (amg_stage) {
            Rng ra = Rng::stream(cfg.seed, {rngkey::augment, step, j});
            auto aug = augment(item.ann, item.image, ra, DataConfig{w.cfg.image_size});
            aug_bundle = std::move(aug.first);
            aug_image = std::move(aug.second);
            ann = &aug_bundle;
            target = &aug_image;

            Rng rs = Rng::stream(cfg.seed, {rngkey::subset, step, j});
            const SignalConfig sc = draw_subset(cfg, rs);
            const SignalSet signals = build_signals(sc, *ann);
            if (!signals.is_empty()) {
                Tensor c_unif = encode_signals(signals, w.enc, w.amg, w.cfg);
                intent = adaptive_control(c_unif, w.amg);
                use_intent = true;
            }
        }

        TextEmbedding emb = text_encode(ann->text, w.cfg, w.enc.text_emb);
        if (stage == StageTag::pretrain || stage == StageTag::amg_no_rsa) {
            cond.t_glob = emb.t_emb;
        } else {
            cond = parse_text(emb.t_emb, w.rsa);
        }

        Tensor x0 = image_tensor(*target);
        Tensor x_t = q_sample(x0, t, eps, sched);
        Tensor eps_hat = denoiser_forward(x_t, t, cond, use_intent ? &intent : nullptr, w);
        Tensor diff = sub(eps, eps_hat);
        Tensor item_loss = mean_all(mul(diff, diff));
        loss_acc += item_loss.item();
        if (accumulate_grads) backward(scale(item_loss, inv_batch));
    }
    return loss_acc * inv_batch;
}

TrainResult run_stage(ModelWeights& w, StageTag stage, const std::vector<const DatasetItem*>& pool,
                      const TrainConfig& cfg, const NoiseSchedule& sched,
                      TrainerState* state_io, size_t stop_after) {
    cfg.validate();
    if (pool.empty()) throw ContractError("run_stage: empty dataset");

    w.set_requires_grad_all(false);
    ParamList trainables = stage_trainables(w, stage);
    for (auto& p : trainables) const_cast<Tensor&>(p.t).set_requires_grad(true);

    Adam opt(trainables);
    size_t start_step = 0;
    if (state_io && state_io->step > 0) {
        opt.load_state(*state_io);
        start_step = state_io->step;
    }
    const size_t end_step =
        stop_after == 0 ? cfg.steps : std::min(cfg.steps, stop_after);

    TrainResult result;
    for (size_t step = start_step; step < end_step; ++step) {
        opt.zero_grad();
        const double loss = training_loss(w, stage, pool, sched, cfg, step, true);
        const double lr = lr_at(cfg, step);
        opt.step(lr);
        result.losses.push_back(loss);
        result.lrs.push_back(lr);
    }
    if (state_io) *state_io = opt.state();
    w.set_requires_grad_all(false);
    return result;
}

std::vector<const DatasetItem*> dataset_view(const std::vector<DatasetItem>& items) {
    std::vector<const DatasetItem*> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(&it);
    return out;
}

std::vector<const DatasetItem*> split_parity(const std::vector<DatasetItem>& items, size_t parity) {
    std::vector<const DatasetItem*> out;
    for (size_t i = parity; i < items.size(); i += 2) out.push_back(&items[i]);
    return out;
}

// --------------------------------------------------------------------------
// evaluation
// --------------------------------------------------------------------------

std::vector<Image> generate_set(const ModelWeights& w, StageTag stage,
                                const std::vector<const DatasetItem*>& items, SignalConfig sc,
                                size_t ddim_steps, uint64_t seed) {
    const NoiseSchedule sched = make_schedule(w.cfg.t_steps);
    std::vector<Image> out(items.size());
    parallel_for(items.size(), [&](size_t i) {
        GenRequest req;
        req.prompt = items[i]->ann.text;
        req.signals = build_signals(sc, items[i]->ann);
        req.n_steps = ddim_steps;
        Rng rs = Rng::stream(seed, {rngkey::sampler, i});
        req.seed = rs.next_u64();
        out[i] = generate(req, w, cond_mode_for(stage), sched);
    });
    return out;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationEntry>& entries,
                                      const std::vector<const DatasetItem*>& held_out,
                                      size_t ddim_steps, uint64_t seed) {
    std::vector<AblationRow> rows;
    for (const auto& e : entries) {
        const std::vector<Image> gen =
            generate_set(*e.weights, e.stage, held_out, e.signals, ddim_steps, seed);
        AblationRow row;
        row.label = e.label;
        row.signals = signal_config_name(e.signals);
        row.metrics = evaluate_set(gen, held_out);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream f(path);
    if (!f) throw MogenError("write_ablation_csv: cannot open " + path);
    f << "config,signals,items,numerical,spatial_sim,appearance_sim,img_sim\n";
    for (const auto& r : rows) {
        f << r.label << "," << r.signals << "," << r.metrics.items << ","
          << fmt_double(r.metrics.numerical) << "," << fmt_double(r.metrics.spatial) << ","
          << fmt_double(r.metrics.appearance) << "," << fmt_double(r.metrics.image_similarity)
          << "\n";
    }
}

void write_train_log_csv(const std::string& path, const TrainResult& result) {
    std::ofstream f(path);
    if (!f) throw MogenError("write_train_log_csv: cannot open " + path);
    f << "step,lr,loss\n";
    for (size_t i = 0; i < result.losses.size(); ++i)
        f << i << "," << fmt_double(result.lrs[i]) << "," << fmt_double(result.losses[i]) << "\n";
}

// --------------------------------------------------------------------------
// diagnostics
// --------------------------------------------------------------------------

std::vector<std::vector<double>> dump_attention(const std::string& prompt, const ModelWeights& w,
                                                const std::string& out_path) {
    NoGradGuard ng;
    TextEmbedding emb = text_encode(prompt, w.cfg, w.enc.text_emb);
    if (emb.token_count == 0) throw ContractError("dump_attention: prompt has no tokens");
    Tensor probs;
    sp_phrase(emb.t_emb, w.rsa, &probs);

    std::vector<std::vector<double>> rows(w.cfg.l_phr,
                                          std::vector<double>(emb.token_count, 0.0));
    for (size_t q = 0; q < w.cfg.l_phr; ++q) {
        double sum = 0.0;
        for (size_t t = 0; t < emb.token_count; ++t) sum += probs.at(q, t);
        for (size_t t = 0; t < emb.token_count; ++t)
            rows[q][t] = sum > 0.0 ? probs.at(q, t) / sum : 0.0;
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw MogenError("dump_attention: cannot open " + out_path);
        for (const auto& row : rows) {
            for (size_t t = 0; t < row.size(); ++t) f << (t ? "," : "") << fmt_double(row[t]);
            f << "\n";
        }
    }
    return rows;
}

namespace {

FeatureStats stats_of(const std::string& name, std::vector<double> values) {
    FeatureStats st;
    st.name = name;
    st.count = values.size();
    st.histogram.assign(64, 0);
    if (values.empty()) return st;
    std::sort(values.begin(), values.end());
    st.min = values.front();
    st.max = values.back();
    st.median = values[values.size() / 2];
    const double span = st.max - st.min;
    for (double v : values) {
        size_t bin = span > 0.0 ? static_cast<size_t>((v - st.min) / span * 64.0) : 0;
        if (bin > 63) bin = 63;
        ++st.histogram[bin];
    }
    return st;
}

}  // namespace

std::vector<FeatureStats> feature_distribution(const std::vector<const DatasetItem*>& batch,
                                               const ModelWeights& w,
                                               const std::string& out_path) {
    NoGradGuard ng;
    const NoiseSchedule sched = make_schedule(w.cfg.t_steps);
    const size_t npix = w.cfg.image_size * w.cfg.image_size * 3;
    std::vector<double> glob_vals, phr_vals;
    for (size_t i = 0; i < batch.size(); ++i) {
        const DatasetItem& item = *batch[i];
        TextEmbedding emb = text_encode(item.ann.text, w.cfg, w.enc.text_emb);
        SemanticBundle cond = parse_text(emb.t_emb, w.rsa);
        Rng re = Rng::stream(w.cfg.t_steps, {rngkey::noise, i});
        std::vector<double> eps(npix);
        for (double& v : eps) v = re.normal();
        Tensor x_t = q_sample(image_tensor(item.image), sched.steps() / 2,
                              Tensor::from_data({npix}, std::move(eps)), sched);
        DenoiseProbe probe;
        probe.block = w.cfg.layout_block;
        denoiser_forward(x_t, sched.steps() / 2, cond, nullptr, w, &probe);
        if (probe.rsa.v_glob.defined())
            glob_vals.insert(glob_vals.end(), probe.rsa.v_glob.values().begin(),
                             probe.rsa.v_glob.values().end());
        if (probe.rsa.v_phr.defined())
            phr_vals.insert(phr_vals.end(), probe.rsa.v_phr.values().begin(),
                            probe.rsa.v_phr.values().end());
    }
    std::vector<FeatureStats> out;
    out.push_back(stats_of("v_glob", std::move(glob_vals)));
    out.push_back(stats_of("v_phr", std::move(phr_vals)));

    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw MogenError("feature_distribution: cannot open " + out_path);
        f << "tensor,count,min,max,median,bins...\n";
        for (const auto& st : out) {
            f << st.name << "," << st.count << "," << fmt_double(st.min) << ","
              << fmt_double(st.max) << "," << fmt_double(st.median);
            for (size_t b : st.histogram) f << "," << b;
            f << "\n";
        }
    }
    return out;
}

CheckReport full_pipeline_grad_check(uint64_t seed, size_t samples_per_param) {
    ModelConfig cfg;
    cfg.d = 16;
    cfg.d_net = 16;
    cfg.l_emb = 8;
    cfg.l_phr = 4;
    cfg.l_str = 4;
    cfg.n_blocks = 2;
    cfg.layout_block = 2;
    cfg.image_size = 32;
    cfg.patch = 8;  // 16 spatial tokens
    cfg.n_heads = 2;
    cfg.t_steps = 50;
    cfg.vocab = 256;
    cfg.validate();

    ModelWeights w = ModelWeights::init(cfg, seed);
    // Zero-initialized projections would hide wrong gradients behind exact
    // zeros, so every parameter is perturbed well off its structured init.
    ParamList all = w.all_params();
    for (auto& p : all) {
        Rng rng = Rng::stream(seed, {rngkey::gradcheck, fnv1a(p.name.data(), p.name.size())});
        double* d = const_cast<Tensor&>(p.t).mutable_data();
        for (size_t i = 0; i < p.t.size(); ++i) d[i] += rng.uniform(-0.3, 0.3);
        const_cast<Tensor&>(p.t).set_requires_grad(true);
    }
    const NoiseSchedule sched = make_schedule(cfg.t_steps);

    // fixed scene providing text, structure, object and box signals
    DataConfig dcfg;
    dcfg.canvas = cfg.image_size;
    dcfg.min_objects = 2;
    dcfg.max_objects = 3;
    const DatasetItem item = make_item(seed + 1, 0, dcfg);
    const size_t npix = cfg.image_size * cfg.image_size * 3;

    Rng re = Rng::stream(seed, {rngkey::noise, 99});
    std::vector<double> eps_data(npix);
    for (double& v : eps_data) v = re.normal();
    std::vector<double> qsrc_data(cfg.l_net() * cfg.d_net);
    for (double& v : qsrc_data) v = re.normal();
    const Tensor q_src = Tensor::from_data({cfg.l_net(), cfg.d_net}, qsrc_data);

    // Linear probes rather than squared losses: squaring inflates the third
    // derivative and pushes the h^2 truncation term of central differences
    // past the 1e-6 gate even on perfectly correct gradients. Probe signs
    // are fixed per slot so the closures stay deterministic across calls.
    Rng rp = Rng::stream(seed, {rngkey::gradcheck, 7});
    std::vector<Tensor> probes;
    auto probed = [&](const Tensor& t, size_t slot) {
        while (probes.size() <= slot) probes.emplace_back();
        if (!probes[slot].defined()) {
            std::vector<double> c(t.size());
            for (double& v : c) v = rp.below(2) ? 1.0 : -1.0;
            probes[slot] = Tensor::from_data(t.shape(), std::move(c));
        }
        return sum_all(mul(t, probes[slot]));
    };

    // Each stage's trainable group is checked through a head that consumes it
    // directly; a 3000-element mean through the full pipeline would push deep
    // gradients below what central differences can resolve at h = 1e-5.
    CheckReport combined;
    auto run_group = [&](const std::function<Tensor()>& f, const ParamList& group) {
        std::vector<std::pair<std::string, Tensor>> ps;
        for (const auto& p : group) ps.emplace_back(p.name, p.t);
        CheckReport r = grad_check(f, ps, 1e-5, samples_per_param, seed);
        combined.params.insert(combined.params.end(), r.params.begin(), r.params.end());
    };

    // backbone blocks + text embedding table: raw-text denoiser output
    auto f_backbone = [&]() {
        TextEmbedding emb = text_encode(item.ann.text, w.cfg, w.enc.text_emb);
        SemanticBundle cond;
        cond.t_glob = emb.t_emb;
        Tensor x_t = q_sample(image_tensor(item.image), 23, Tensor::from_data({npix}, eps_data),
                              sched);
        return probed(denoiser_forward(x_t, 23, cond, nullptr, w), 0);
    };
    run_group(f_backbone, stage_trainables(w, StageTag::pretrain));

    // parser branches, phrase queries, layout-block phrase adapters
    auto f_rsa = [&]() {
        TextEmbedding emb = text_encode(item.ann.text, w.cfg, w.enc.text_emb);
        SemanticBundle bundle = parse_text(emb.t_emb, w.rsa);
        const BlockWeights& lb = w.backbone.blocks[cfg.layout_block - 1];
        Tensor injected = rsa_inject(q_src, bundle, cfg.layout_block, cfg.layout_block, lb.q_net,
                                     lb.cross_text, &lb.cross_phrase, cfg.n_heads);
        return add(add(probed(bundle.t_glob, 1), probed(bundle.t_phr, 2)), probed(injected, 3));
    };
    run_group(f_rsa, stage_trainables(w, StageTag::rsa));

    // signal encoders, controller, intent queries, every interaction layer
    auto f_amg = [&]() {
        const SignalSet so = build_signals(SignalConfig::so, item.ann);
        const SignalSet b = build_signals(SignalConfig::b, item.ann);
        StructuredIntent intent_so = adaptive_control(encode_signals(so, w.enc, w.amg, w.cfg), w.amg);
        StructuredIntent intent_b = adaptive_control(encode_signals(b, w.enc, w.amg, w.cfg), w.amg);
        Tensor loss = add(probed(intent_so.c_str, 4), probed(intent_b.c_str, 5));
        for (size_t i = 0; i < cfg.n_blocks; ++i) {
            const BlockWeights& blk = w.backbone.blocks[i];
            loss = add(loss, probed(intent_inject(q_src, intent_so, blk.q_net, blk.cross_intent,
                                                  cfg.n_heads),
                                    6 + i));
        }
        return loss;
    };
    run_group(f_amg, stage_trainables(w, StageTag::amg));

    return combined;
}

void dump_spatial_attention(const std::string& prompt, const SignalSet& signals,
                            const ModelWeights& w, StageTag stage, const std::string& out_path) {
    NoGradGuard ng;
    const NoiseSchedule sched = make_schedule(w.cfg.t_steps);
    const size_t npix = w.cfg.image_size * w.cfg.image_size * 3;
    TextEmbedding emb = text_encode(prompt, w.cfg, w.enc.text_emb);
    SemanticBundle cond;
    if (cond_mode_for(stage) == CondMode::rsa)
        cond = parse_text(emb.t_emb, w.rsa);
    else
        cond.t_glob = emb.t_emb;

    StructuredIntent intent;
    bool use_intent = false;
    if (!signals.is_empty()) {
        intent = adaptive_control(encode_signals(signals, w.enc, w.amg, w.cfg), w.amg);
        use_intent = true;
    }

    Rng re = Rng::stream(1, {rngkey::noise});
    std::vector<double> x(npix);
    for (double& v : x) v = re.normal();
    DenoiseProbe probe;
    probe.block = w.cfg.layout_block;
    denoiser_forward(Tensor::from_data({npix}, std::move(x)), sched.steps() / 2, cond,
                     use_intent ? &intent : nullptr, w, &probe);

    std::ofstream f(out_path);
    if (!f) throw MogenError("dump_spatial_attention: cannot open " + out_path);
    f << "path,spatial_token,weights...\n";
    auto dump = [&](const char* name, const Tensor& probs) {
        if (!probs.defined()) return;
        for (size_t r = 0; r < probs.rows(); ++r) {
            f << name << "," << r;
            for (size_t c = 0; c < probs.cols(); ++c) f << "," << fmt_double(probs.at(r, c));
            f << "\n";
        }
    };
    dump("glob", probe.rsa.probs_glob);
    dump("phrase", probe.rsa.probs_phr);
    dump("intent", probe.probs_intent);
}

}  // namespace mogen
