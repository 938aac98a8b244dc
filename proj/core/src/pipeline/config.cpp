// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ndgait/error.hpp"

namespace ndg::pipeline {

using nlohmann::json;

void RunConfig::validate() const {
    net.validate();
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (epochs < 1 || stage2_epochs < 1) throw ConfigError("epochs must be at least 1");
    if (warmup_epochs >= epochs) throw ConfigError("warmup_epochs must be below epochs");
    if (warmup_epochs >= stage2_epochs) throw ConfigError("warmup_epochs must be below stage2_epochs");
    for (const auto *r : {&stage1, &stage2})
        if (!(r->lr_min >= 0) || !(r->lr_min < r->lr_max)) throw ConfigError("need 0 <= lr_min < lr_max");
    if (train_stride < 1 || stage2_stride < 1 || eval_stride < 1) throw ConfigError("strides must be >= 1");
    if (token_count < 1 || net.latent % token_count != 0)
        throw ConfigError("token_count must divide the latent size");
    if (stream.window != net.window) throw ConfigError("stream.window must equal the model window");
    if (stream.hop < 1) throw ConfigError("stream.hop must be >= 1");
    if (!(finetune_s > 0) || !(finetune_val_s > 0)) throw ConfigError("fine-tune spans must be positive");
    if (finetune_epochs < 1) throw ConfigError("finetune_epochs must be at least 1");
    if (ablation.no_rec && ablation.no_pred && ablation.no_rcl && !ablation.no_stage1)
        throw ConfigError("every Stage I loss is disabled; use no_stage1 instead");
}

RunConfig preset(const std::string &name) {
    RunConfig c;
    c.preset = name;
    if (name == "desk") return c;
    if (name == "ged") {
        c.batch_size = 512;
        c.steps_per_epoch = 0;
        c.stage2_stride = 10;
        c.stage1 = {1e-3, 1e-4};
        c.stage2 = {2e-5, 2e-6};
        c.net.channels = 59;
        c.net.joints = 6;
        return c;
    }
    if (name == "fmd") {
        c.batch_size = 512;
        c.steps_per_epoch = 0;
        c.stage2_stride = 10;
        c.stage1 = {1e-4, 1e-5};
        c.stage2 = {5e-5, 5e-6};
        c.net.channels = 60;
        c.net.joints = 8;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk, ged or fmd)");
}

namespace {

json net_to_json(const nets::NetConfig &n) {
    return {{"channels", n.channels},
            {"joints", n.joints},
            {"latent", n.latent},
            {"window", n.window},
            {"filter_scale", n.filter_scale},
            {"filter_base", n.filter_base},
            {"eeg_kernels", n.eeg_kernels},
            {"eeg_pool", n.eeg_pool},
            {"max_norm", n.max_norm},
            {"motor_conv_kernel", n.motor_conv_kernel},
            {"motor_heads", n.motor_heads},
            {"motor_layers", n.motor_layers},
            {"motor_ff_mult", n.motor_ff_mult},
            {"dec_channels", n.dec_channels},
            {"dec_length", n.dec_length},
            {"dec_layers", n.dec_layers}};
}

// Reads known keys from j into the bound fields and rejects the rest.
class Reader {
public:
    Reader(const json &j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }
    template <class V> void operator()(const char *key, V &out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<V>();
        } catch (const json::exception &e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }
    const json *sub(const char *key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

private:
    const json &j_;
    std::string where_;
    std::set<std::string> seen_;
};

void net_from_json(const json &j, nets::NetConfig &n) {
    Reader r(j, "net");
    r("channels", n.channels);
    r("joints", n.joints);
    r("latent", n.latent);
    r("window", n.window);
    r("filter_scale", n.filter_scale);
    r("filter_base", n.filter_base);
    r("eeg_kernels", n.eeg_kernels);
    r("eeg_pool", n.eeg_pool);
    r("max_norm", n.max_norm);
    r("motor_conv_kernel", n.motor_conv_kernel);
    r("motor_heads", n.motor_heads);
    r("motor_layers", n.motor_layers);
    r("motor_ff_mult", n.motor_ff_mult);
    r("dec_channels", n.dec_channels);
    r("dec_length", n.dec_length);
    r("dec_layers", n.dec_layers);
    r.finish();
}

void lr_from_json(const json &j, LrRange &lr, const char *where) {
    Reader r(j, where);
    r("lr_max", lr.lr_max);
    r("lr_min", lr.lr_min);
    r.finish();
}

} // namespace

std::string config_to_json(const RunConfig &c) {
    json j;
    j["preset"] = c.preset;
    j["data_dir"] = c.data_dir;
    j["out_dir"] = c.out_dir;
    j["protocol"] = data::to_string(c.protocol);
    j["exclude_subjects"] = c.exclude_subjects;
    j["net"] = net_to_json(c.net);
    j["token_count"] = c.token_count;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["warmup_epochs"] = c.warmup_epochs;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["train_stride"] = c.train_stride;
    j["val_windows"] = c.val_windows;
    j["patience"] = c.patience;
    j["stage2_epochs"] = c.stage2_epochs;
    j["stage2_steps_per_epoch"] = c.stage2_steps_per_epoch;
    j["stage2_stride"] = c.stage2_stride;
    j["stage1"] = {{"lr_max", c.stage1.lr_max}, {"lr_min", c.stage1.lr_min}};
    j["stage2"] = {{"lr_max", c.stage2.lr_max}, {"lr_min", c.stage2.lr_min}};
    j["loss_weights"] = {{"rec", c.w_rec}, {"pred", c.w_pred}, {"rcl", c.w_rcl}, {"sup", c.w_sup}, {"df", c.w_df}};
    j["seed"] = c.seed;
    j["ablation"] = {{"no_rec", c.ablation.no_rec},
                     {"no_pred", c.ablation.no_pred},
                     {"no_rcl", c.ablation.no_rcl},
                     {"no_stage1", c.ablation.no_stage1},
                     {"no_fusion", c.ablation.no_fusion},
                     {"cosine_distance", c.ablation.cosine_distance}};
    j["freeze_encoder_stage2"] = c.freeze_encoder_stage2;
    j["finetune_encoder"] = c.finetune_encoder;
    j["finetune_s"] = c.finetune_s;
    j["finetune_val_s"] = c.finetune_val_s;
    j["finetune_epochs"] = c.finetune_epochs;
    j["eval_stride"] = c.eval_stride;
    j["stream"] = {{"window", c.stream.window}, {"hop", c.stream.hop}, {"budget_ms", c.stream.budget_ms}};
    return j.dump(2);
}

RunConfig config_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    RunConfig c = preset(j.value("preset", std::string("desk")));
    Reader r(j, "config");
    r("preset", c.preset);
    r("data_dir", c.data_dir);
    r("out_dir", c.out_dir);
    std::string protocol = data::to_string(c.protocol);
    r("protocol", protocol);
    c.protocol = data::parse_protocol(protocol);
    r("exclude_subjects", c.exclude_subjects);
    if (const json *n = r.sub("net")) net_from_json(*n, c.net);
    r("token_count", c.token_count);
    r("batch_size", c.batch_size);
    r("epochs", c.epochs);
    r("warmup_epochs", c.warmup_epochs);
    r("steps_per_epoch", c.steps_per_epoch);
    r("train_stride", c.train_stride);
    r("val_windows", c.val_windows);
    r("patience", c.patience);
    r("stage2_epochs", c.stage2_epochs);
    r("stage2_steps_per_epoch", c.stage2_steps_per_epoch);
    r("stage2_stride", c.stage2_stride);
    if (const json *s = r.sub("stage1")) lr_from_json(*s, c.stage1, "stage1");
    if (const json *s = r.sub("stage2")) lr_from_json(*s, c.stage2, "stage2");
    if (const json *w = r.sub("loss_weights")) {
        Reader rw(*w, "loss_weights");
        rw("rec", c.w_rec);
        rw("pred", c.w_pred);
        rw("rcl", c.w_rcl);
        rw("sup", c.w_sup);
        rw("df", c.w_df);
        rw.finish();
    }
    r("seed", c.seed);
    if (const json *a = r.sub("ablation")) {
        Reader ra(*a, "ablation");
        ra("no_rec", c.ablation.no_rec);
        ra("no_pred", c.ablation.no_pred);
        ra("no_rcl", c.ablation.no_rcl);
        ra("no_stage1", c.ablation.no_stage1);
        ra("no_fusion", c.ablation.no_fusion);
        ra("cosine_distance", c.ablation.cosine_distance);
        ra.finish();
    }
    r("freeze_encoder_stage2", c.freeze_encoder_stage2);
    r("finetune_encoder", c.finetune_encoder);
    r("finetune_s", c.finetune_s);
    r("finetune_val_s", c.finetune_val_s);
    r("finetune_epochs", c.finetune_epochs);
    r("eval_stride", c.eval_stride);
    if (const json *s = r.sub("stream")) {
        Reader rs(*s, "stream");
        rs("window", c.stream.window);
        rs("hop", c.stream.hop);
        rs("budget_ms", c.stream.budget_ms);
        rs.finish();
    }
    r.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const RunConfig &cfg, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << config_to_json(cfg) << '\n';
}

} // namespace ndg::pipeline
