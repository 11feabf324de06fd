// SPDX-License-Identifier: Apache-2.0
#include "espo/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "espo/vr/coupled.hpp"

namespace espo::train {

using json = nlohmann::ordered_json;

bool deterministic_mode() {
    static const bool on = [] {
        const char* v = std::getenv("ESPO_DETERMINISTIC");
        return v != nullptr && v[0] != '\0' && v[0] != '0';
    }();
    return on;
}

namespace {
double now_seconds() {
    if (deterministic_mode()) return 0.0;
    return std::chrono::duration<double>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}
}  // namespace

void TrainRunConfig::validate() const {
    task.validate();
    objective.validate();
    if (width <= 0 || layers <= 0 || heads <= 0 || width % heads != 0) {
        throw ConfigError("train: bad model dimensions");
    }
    if (group_size < 2) throw ConfigError("train: group_size must be >= 2");
    if (batch_size < group_size || batch_size % group_size != 0) {
        throw ConfigError("train: batch_size must be a positive multiple of group_size");
    }
    if (completion_length < 1) throw ConfigError("train: completion_length must be >= 1");
    if (inner_updates < 1) throw ConfigError("train: inner_updates must be >= 1");
    if (mc_pairs < 1) throw ConfigError("train: mc_pairs must be >= 1");
    if (total_steps < 0) throw ConfigError("train: total_steps must be >= 0");
    if (pretrain_steps < 0 || pretrain_batch < 1) throw ConfigError("train: bad pretrain settings");
    sampler_config(train_temperature).validate(completion_length);
}

int TrainRunConfig::denoise_steps() const {
    return sampler_config(train_temperature).steps_for(completion_length);
}

mdm::SamplerConfig TrainRunConfig::sampler_config(double temperature) const {
    mdm::SamplerConfig s;
    s.tokens_per_step = tokens_per_step;
    s.block_length = block_length;
    s.temperature = temperature;
    return s;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

json instance_to_json(const tasks::TaskInstance& inst) {
    json j;
    j["task"] = tasks::to_string(inst.kind);
    j["prompt"] = inst.prompt;
    if (inst.kind == tasks::TaskKind::sudoku) {
        const auto& s = std::get<tasks::SudokuInstance>(inst.payload);
        j["puzzle"] = s.puzzle;
        j["solution"] = s.solution;
    } else {
        const auto& c = std::get<tasks::CountdownInstance>(inst.payload);
        j["target"] = c.target;
        j["operands"] = c.operands;
        j["certified_expression"] = c.certified_expression;
    }
    return j;
}

tasks::TaskInstance instance_from_json(const json& j) {
    tasks::TaskInstance inst;
    inst.kind = tasks::task_from_string(j.at("task").get<std::string>());
    inst.prompt = j.at("prompt").get<std::string>();
    if (inst.kind == tasks::TaskKind::sudoku) {
        tasks::SudokuInstance s;
        s.puzzle = j.at("puzzle").get<std::string>();
        s.solution = j.at("solution").get<std::string>();
        s.prompt = inst.prompt;
        inst.payload = std::move(s);
    } else {
        tasks::CountdownInstance c;
        c.target = j.at("target").get<long long>();
        c.operands = j.at("operands").get<std::vector<long long>>();
        c.certified_expression = j.value("certified_expression", std::string());
        c.prompt = inst.prompt;
        inst.payload = std::move(c);
    }
    return inst;
}

json draw_to_json(const mdm::MaskDraw& d) {
    json j;
    j["form"] = d.form == mdm::MaskForm::l_form ? "l" : "t";
    if (d.form == mdm::MaskForm::l_form) {
        j["l"] = d.l;
    } else {
        j["t"] = d.t;
    }
    j["positions"] = d.positions;
    return j;
}

mdm::MaskDraw draw_from_json(const json& j) {
    mdm::MaskDraw d;
    const std::string form = j.at("form").get<std::string>();
    d.form = form == "l" ? mdm::MaskForm::l_form : mdm::MaskForm::t_form;
    if (d.form == mdm::MaskForm::l_form) {
        d.l = j.at("l").get<int>();
    } else {
        d.t = j.at("t").get<double>();
    }
    d.positions = j.at("positions").get<std::vector<int>>();
    return d;
}

const char* estimator_form_name(mdm::EstimatorForm f) {
    switch (f) {
        case mdm::EstimatorForm::l_form: return "l";
        case mdm::EstimatorForm::t_form: return "t";
        case mdm::EstimatorForm::coupled: return "coupled";
    }
    return "?";
}

mdm::EstimatorForm estimator_form_from(const std::string& s) {
    if (s == "l") return mdm::EstimatorForm::l_form;
    if (s == "t") return mdm::EstimatorForm::t_form;
    if (s == "coupled") return mdm::EstimatorForm::coupled;
    throw InputDomainError("unknown estimator form: " + s);
}

json estimate_to_json(const mdm::ElboEstimate& e) {
    json j;
    j["value"] = e.value;
    j["per_token"] = e.per_token;
    j["m"] = e.mc_samples;
    j["estimator"] = estimator_form_name(e.form);
    json draws = json::array();
    for (const auto& d : e.draws) draws.push_back(draw_to_json(d));
    j["draws"] = std::move(draws);
    return j;
}

mdm::ElboEstimate estimate_from_json(const json& j) {
    mdm::ElboEstimate e;
    e.value = j.at("value").get<double>();
    e.per_token = j.at("per_token").get<std::vector<double>>();
    e.mc_samples = j.at("m").get<int>();
    e.form = estimator_form_from(j.at("estimator").get<std::string>());
    for (const auto& dj : j.at("draws")) e.draws.push_back(draw_from_json(dj));
    return e;
}

}  // namespace

std::string to_jsonl(const RolloutRecord& rec) {
    json j;
    j["instance"] = instance_to_json(rec.instance);
    j["rng_state_before"] = rec.rng_state_before;
    j["timestamp"] = rec.timestamp;
    j["prompt_tokens"] = rec.group.prompt;
    json comps = json::array();
    for (const auto& c : rec.group.completions) {
        json cj;
        cj["completion_tokens"] = c.seq.completion;
        cj["reward"] = c.reward;
        cj["advantage"] = c.advantage;
        cj["elbo_old"] = estimate_to_json(c.elbo_old);
        cj["elbo_ref"] = estimate_to_json(c.elbo_ref);
        cj["meanfield_old"] = c.meanfield_old;
        comps.push_back(std::move(cj));
    }
    j["completions"] = std::move(comps);
    return j.dump();
}

RolloutRecord rollout_record_from_json(const std::string& line) {
    const json j = json::parse(line);
    RolloutRecord rec;
    rec.instance = instance_from_json(j.at("instance"));
    rec.rng_state_before = j.at("rng_state_before").get<std::string>();
    rec.timestamp = j.at("timestamp").get<double>();
    rec.group.prompt = j.at("prompt_tokens").get<std::vector<int>>();
    for (const auto& cj : j.at("completions")) {
        rl::CachedCompletion c;
        c.seq.prompt = rec.group.prompt;
        c.seq.completion = cj.at("completion_tokens").get<std::vector<int>>();
        c.reward = cj.at("reward").get<double>();
        c.advantage = cj.at("advantage").get<double>();
        c.elbo_old = estimate_from_json(cj.at("elbo_old"));
        c.elbo_ref = estimate_from_json(cj.at("elbo_ref"));
        c.meanfield_old = cj.at("meanfield_old").get<std::vector<double>>();
        rec.group.completions.push_back(std::move(c));
    }
    return rec;
}

std::string StepMetrics::to_json() const {
    json j;
    j["step"] = step;
    j["mean_reward"] = mean_reward;
    j["reward_std"] = reward_std;
    j["grad_norm"] = grad_norm;
    j["kl"] = kl;
    j["clip_frac"] = clip_frac;
    j["mean_ratio"] = mean_ratio;
    j["loss"] = loss;
    j["elapsed_s"] = elapsed_s;
    j["flops_cum"] = flops_cum;
    if (skipped_updates) j["skipped_updates"] = skipped_updates;
    return j.dump();
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

namespace {
TrainRunConfig validated(TrainRunConfig c) {
    c.validate();
    return c;
}

nn::DenoiserConfig make_model_config(const TrainRunConfig& cfg) {
    nn::DenoiserConfig mc;
    mc.vocab_size = tasks::Tokenizer::instance().vocab_size();
    mc.width = cfg.width;
    mc.layers = cfg.layers;
    mc.heads = cfg.heads;
    mc.max_seq_len = cfg.max_seq_len;
    return mc;
}
}  // namespace

Trainer::Trainer(TrainRunConfig cfg)
    : cfg_(validated(std::move(cfg))),
      model_cfg_(make_model_config(cfg_)),
      model_(model_cfg_),
      theta_(),
      theta_old_(),
      theta_ref_(),
      opt_(nn::ParameterSet(), AdamWConfig{}),
      rng_(cfg_.seed) {
    theta_ = model_.init_params(rng_);
    theta_old_ = theta_;
    theta_ref_ = theta_;
    AdamWConfig oc;
    oc.lr = cfg_.learning_rate;
    oc.beta1 = cfg_.beta1;
    oc.beta2 = cfg_.beta2;
    oc.weight_decay = cfg_.weight_decay;
    oc.grad_clip = cfg_.grad_clip;
    opt_ = AdamW(theta_, oc);
}

tasks::TaskInstance Trainer::next_instance() { return tasks::gen_task(cfg_.task, rng_); }

void Trainer::pretrain() {
    if (cfg_.pretrain_steps == 0) {
        theta_old_ = theta_;
        theta_ref_ = theta_;
        return;
    }
    const tasks::Tokenizer& tok = tasks::Tokenizer::instance();
    AdamWConfig oc;
    oc.lr = cfg_.pretrain_lr;
    oc.beta1 = cfg_.beta1;
    oc.beta2 = cfg_.beta2;
    oc.weight_decay = 0.0;
    oc.grad_clip = 1.0;
    AdamW opt(theta_, oc);

    for (int it = 0; it < cfg_.pretrain_steps; ++it) {
        nn::Tape tape;
        tape.bind(theta_);
        std::vector<nn::NodeId> losses;
        losses.reserve(static_cast<std::size_t>(cfg_.pretrain_batch));
        for (int b = 0; b < cfg_.pretrain_batch; ++b) {
            const tasks::TaskInstance inst = next_instance();
            mdm::TokenSequence seq;
            seq.prompt = tok.encode(inst.prompt);
            seq.completion =
                tok.encode(tasks::random_format_completion(inst, cfg_.completion_length, rng_));
            const int Le = seq.effective_length();
            mdm::MaskDraw d;
            d.form = mdm::MaskForm::l_form;
            d.l = 1 + static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(Le)));
            {
                const std::vector<int> universe = seq.maskable_positions();
                const std::vector<int> idx =
                    rng_.sample_without_replacement(Le, d.l);
                for (int i : idx) d.positions.push_back(universe[static_cast<std::size_t>(i)]);
            }
            const mdm::ElboGraph g =
                mdm::elbo_graph(tape, model_, seq, std::span(&d, 1), mdm::EstimatorForm::l_form);
            losses.push_back(tape.s_scale(g.total, -1.0 / static_cast<double>(Le)));
        }
        const nn::NodeId loss = tape.s_mean(losses);
        tape.backward(loss);
        opt.step(theta_, tape.param_grads());
    }
    theta_old_ = theta_;
    theta_ref_ = theta_;
}

std::vector<RolloutRecord> Trainer::rollout(const std::vector<tasks::TaskInstance>& instances) {
    if (instances.empty()) throw InputDomainError("rollout: no instances");
    const tasks::Tokenizer& tok = tasks::Tokenizer::instance();
    const mdm::SamplerConfig sampler_cfg = cfg_.sampler_config(cfg_.train_temperature);

    std::vector<RolloutRecord> records;
    records.reserve(instances.size());
    for (const tasks::TaskInstance& inst : instances) {
        RolloutRecord rec;
        rec.instance = inst;
        rec.rng_state_before = rng_.save_state();
        rec.timestamp = now_seconds();
        rec.group.prompt = tok.encode(inst.prompt);

        std::vector<double> rewards(static_cast<std::size_t>(cfg_.group_size));
        for (int g = 0; g < cfg_.group_size; ++g) {
            const mdm::TokenSequence seq =
                mdm::sample(model_, theta_old_, rec.group.prompt, cfg_.completion_length,
                            sampler_cfg, rng_);
            rl::CachedCompletion c;
            c.seq = seq;
            c.reward = tasks::score_completion_text(inst, tok.decode(seq.completion));
            rewards[static_cast<std::size_t>(g)] = c.reward;
            rec.group.completions.push_back(std::move(c));
        }
        const std::vector<double> advantages = rl::group_advantages(rewards);
        for (int g = 0; g < cfg_.group_size; ++g) {
            rl::CachedCompletion& c = rec.group.completions[static_cast<std::size_t>(g)];
            c.advantage = advantages[static_cast<std::size_t>(g)];
            const std::vector<mdm::MaskDraw> draws =
                vr::draw_coupled_records(c.seq, cfg_.mc_pairs, rng_);
            c.elbo_old = mdm::replay_elbo(model_, theta_old_, c.seq, draws,
                                          mdm::EstimatorForm::coupled);
            c.elbo_ref = mdm::replay_elbo(model_, theta_ref_, c.seq, draws,
                                          mdm::EstimatorForm::coupled);
            c.meanfield_old = mdm::meanfield_logprobs(model_, theta_old_, c.seq);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

rl::LossResult Trainer::batch_loss(nn::Tape& tape, const std::vector<RolloutRecord>& records) {
    std::vector<nn::NodeId> losses;
    losses.reserve(records.size());
    rl::LossDiagnostics agg{};
    for (const RolloutRecord& rec : records) {
        const rl::LossResult r = rl::espo_loss(tape, model_, rec.group, cfg_.objective);
        losses.push_back(r.loss);
        agg.mean_ratio += r.diag.mean_ratio;
        agg.clip_frac += r.diag.clip_frac;
        agg.kl += r.diag.kl;
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    rl::LossResult out{tape.s_mean(losses), agg};
    out.diag.mean_ratio *= inv;
    out.diag.clip_frac *= inv;
    out.diag.kl *= inv;
    out.diag.loss = tape.value(out.loss);
    return out;
}

StepMetrics Trainer::train_step(const std::vector<RolloutRecord>& records) {
    if (records.empty()) throw InputDomainError("train_step: no records");
    const double t0 = now_seconds();
    StepMetrics m;
    m.step = step_;

    double reward_sum = 0.0, reward_sq = 0.0;
    int n_rewards = 0;
    for (const auto& rec : records) {
        for (const auto& c : rec.group.completions) {
            reward_sum += c.reward;
            reward_sq += c.reward * c.reward;
            ++n_rewards;
        }
    }
    m.mean_reward = reward_sum / n_rewards;
    m.reward_std = std::sqrt(std::max(0.0, reward_sq / n_rewards - m.mean_reward * m.mean_reward));

    double grad_norm_acc = 0.0, kl_acc = 0.0, clip_acc = 0.0, ratio_acc = 0.0, loss_acc = 0.0;
    int applied = 0;
    for (int u = 0; u < cfg_.inner_updates; ++u) {
        try {
            nn::Tape tape;
            tape.bind(theta_);
            const rl::LossResult r = batch_loss(tape, records);
            tape.backward(r.loss);
            const nn::ParameterSet grads = tape.param_grads();
            const double norm = global_norm(grads);
            if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
            grad_norm_acc += norm;
            kl_acc += r.diag.kl;
            clip_acc += r.diag.clip_frac;
            ratio_acc += r.diag.mean_ratio;
            loss_acc += r.diag.loss;
            opt_.step(theta_, grads);
            ++applied;
        } catch (const NumericError&) {
            ++m.skipped_updates;
        }
    }
    if (applied > 0) {
        m.grad_norm = grad_norm_acc / applied;
        m.kl = kl_acc / applied;
        m.clip_frac = clip_acc / applied;
        m.mean_ratio = ratio_acc / applied;
        m.loss = loss_acc / applied;
    }

    theta_old_ = theta_;  // refresh after the mu-th inner step

    // Cost model: K sampler forwards plus coupled policy updates per sample.
    const std::uint64_t n_params = model_.param_count();
    for (const auto& rec : records) {
        for (const auto& c : rec.group.completions) {
            const std::uint64_t d = c.seq.prompt.size() + c.seq.completion.size();
            m.flops_cum += static_cast<double>(
                flops_per_sample(n_params, d, static_cast<std::uint64_t>(cfg_.denoise_steps()),
                                 static_cast<std::uint64_t>(cfg_.inner_updates),
                                 static_cast<std::uint64_t>(cfg_.mc_pairs), true));
        }
    }
    flops_cum_ += m.flops_cum;
    m.flops_cum = flops_cum_;
    m.elapsed_s = now_seconds() - t0;
    ++step_;
    return m;
}

StepMetrics Trainer::run_step() {
    const int n_prompts = cfg_.batch_size / cfg_.group_size;
    std::vector<tasks::TaskInstance> instances;
    instances.reserve(static_cast<std::size_t>(n_prompts));
    for (int i = 0; i < n_prompts; ++i) instances.push_back(next_instance());
    return train_step(rollout(instances));
}

Trainer::EvalOutcome Trainer::evaluate(int n_instances, std::uint64_t eval_seed) {
    if (n_instances < 0) throw InputDomainError("evaluate: negative instance count");
    EvalOutcome out;
    if (n_instances == 0) return out;  // accuracy stays absent

    const tasks::Tokenizer& tok = tasks::Tokenizer::instance();
    const mdm::SamplerConfig sampler_cfg = cfg_.sampler_config(cfg_.eval_temperature);
    nn::Rng rng(eval_seed);
    double acc = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        const tasks::TaskInstance inst = tasks::gen_task(cfg_.task, rng);
        const std::vector<int> prompt = tok.encode(inst.prompt);
        const mdm::TokenSequence seq =
            mdm::sample(model_, theta_, prompt, cfg_.completion_length, sampler_cfg, rng);
        const int r = tasks::score_completion_text(inst, tok.decode(seq.completion));
        out.rewards.push_back(r);
        acc += r;
    }
    out.accuracy = acc / n_instances;
    return out;
}

void Trainer::save_checkpoint(const std::string& path) const {
    nn::save_arrays(path, theta_);
    nn::save_arrays(path + ".opt", opt_.state_arrays());
}

void Trainer::load_checkpoint(const std::string& path) {
    const nn::ParameterSet loaded = nn::load_arrays(path);
    for (const std::string& name : theta_.names()) {
        nn::Tensor& dst = theta_.mutate(name);
        const nn::Tensor& src = loaded.at(name);
        if (!dst.same_shape(src)) throw InputDomainError("checkpoint: shape mismatch: " + name);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    }
    theta_old_ = theta_;
    theta_ref_ = theta_;
}

}  // namespace espo::train
