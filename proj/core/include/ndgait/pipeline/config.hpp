// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndgait/data/folds.hpp"
#include "ndgait/nets/module.hpp"

namespace ndg::pipeline {

struct LrRange {
    double lr_max = 1e-3;
    double lr_min = 1e-4;
};

struct Ablation {
    bool no_rec = false;
    bool no_pred = false;
    bool no_rcl = false;
    bool no_stage1 = false; // Stage II on a randomly initialized, frozen encoder
    bool no_fusion = false; // own-session heads in training, uniform mixture at test
    bool cosine_distance = false;
};

struct StreamConfig {
    std::size_t window = 400;
    std::size_t hop = 10;
    double budget_ms = 50.0;
};

struct RunConfig {
    std::string preset = "desk";
    std::string data_dir;
    std::string out_dir = "runs";
    data::Protocol protocol = data::Protocol::Loso;
    std::vector<std::string> exclude_subjects;

    nets::NetConfig net;
    std::size_t token_count = 8;

    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::size_t warmup_epochs = 2;
    // 0 means one pass over the training windows per epoch
    std::size_t steps_per_epoch = 8;
    std::size_t train_stride = 10;
    std::size_t val_windows = 256; // evenly spaced validation windows; 0 uses all
    std::size_t patience = 5;      // epochs without validation improvement; 0 disables

    std::size_t stage2_epochs = 50;
    std::size_t stage2_steps_per_epoch = 0;
    std::size_t stage2_stride = 20;

    LrRange stage1{1e-3, 1e-4};
    LrRange stage2{1e-3, 1e-4};
    double w_rec = 1.0, w_pred = 1.0, w_rcl = 1.0, w_sup = 1.0, w_df = 1.0;

    std::uint64_t seed = 0;
    Ablation ablation;
    bool freeze_encoder_stage2 = true;

    bool finetune_encoder = false;
    double finetune_s = 150.0;
    double finetune_val_s = 30.0;
    std::size_t finetune_epochs = 30;

    std::size_t eval_stride = 10;
    StreamConfig stream;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// "desk" (default), "ged" and "fmd". The latter two use batch 512 and their
/// own per-stage learning-rate ranges.
RunConfig preset(const std::string &name);

std::string config_to_json(const RunConfig &cfg);
/// Keys absent from the JSON keep the defaults of the named preset (or
/// "desk"). Unknown keys are rejected.
RunConfig config_from_json(const std::string &text);
RunConfig load_config(const std::string &path);
void save_config(const RunConfig &cfg, const std::string &path);

} // namespace ndg::pipeline
