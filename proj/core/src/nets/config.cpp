// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "ndgait/error.hpp"
#include "ndgait/nets/module.hpp"

namespace ndg::nets {

std::vector<std::size_t> NetConfig::eeg_filters() const {
    std::vector<std::size_t> f;
    for (std::size_t b : filter_base)
        f.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(filter_scale * static_cast<double>(b) - 1e-9))));
    return f;
}

std::size_t NetConfig::eeg_final_length() const {
    long L = static_cast<long>(window);
    for (std::size_t k : eeg_kernels) {
        L = L - static_cast<long>(k) + 1;
        if (L < static_cast<long>(eeg_pool)) return 0;
        L /= static_cast<long>(eeg_pool);
    }
    return L > 0 ? static_cast<std::size_t>(L) : 0;
}

std::size_t NetConfig::motor_tokens() const {
    std::size_t L = window;
    for (int b = 0; b < 2; ++b) {
        const std::size_t pad = motor_conv_kernel / 2;
        if (L + 2 * pad < motor_conv_kernel) return 0;
        L = (L + 2 * pad - motor_conv_kernel) / 2 + 1;
        L /= 2;
    }
    return L;
}

std::size_t NetConfig::decoder_raw_length() const {
    std::size_t L = dec_length;
    for (std::size_t i = 0; i < dec_layers; ++i) L = (L - 1) * 2 + 4;
    return L;
}

void NetConfig::validate() const {
    if (channels < 1 || joints < 1 || latent < 1 || window < 1) throw ConfigError("network sizes must be positive");
    if (filter_base.size() != eeg_kernels.size() || filter_base.empty())
        throw ConfigError("filter_base and eeg_kernels must have equal non-zero length");
    if (!(filter_scale > 0)) throw ConfigError("filter_scale must be positive");
    if (eeg_pool < 1) throw ConfigError("eeg_pool must be >= 1");
    if (eeg_final_length() < 1) throw ConfigError("EEG encoder geometry collapses the window to zero length");
    if (!(max_norm > 0)) throw ConfigError("max_norm must be positive");
    if (motor_heads < 1 || latent % motor_heads != 0) throw ConfigError("latent must be divisible by motor_heads");
    if (latent % 2 != 0) throw ConfigError("latent must be even");
    if (motor_tokens() < 1) throw ConfigError("motor encoder geometry collapses the window");
    if (dec_channels < 1 || dec_length < 1 || dec_layers < 1) throw ConfigError("decoder sizes must be positive");
}

} // namespace ndg::nets
