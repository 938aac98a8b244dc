// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ndgait/diff/ops.hpp"
#include "ndgait/diff/tape.hpp"
#include "ndgait/rng.hpp"

namespace ndg::nets {

using diff::NormMode;
using diff::Parameter;
using diff::Shape;
using diff::Tape;
using diff::Tensor;
using diff::Var;

/// Model geometry. Defaults are the desk-scale configuration.
struct NetConfig {
    std::size_t channels = 16;
    std::size_t joints = 6;
    std::size_t latent = 128;
    std::size_t window = 400;

    // EEG encoder: filters ceil(filter_scale * filter_base[i]) with kernel
    // eeg_kernels[i], each block conv -> ELU -> maxpool, then a full-length
    // convolution to `latent`.
    double filter_scale = 0.32;
    std::vector<std::size_t> filter_base{25, 50, 100, 200};
    std::vector<std::size_t> eeg_kernels{10, 10, 10, 5};
    std::size_t eeg_pool = 2;
    double max_norm = 2.0;

    // Motor encoder: two stride-2 conv blocks, then a transformer.
    std::size_t motor_conv_kernel = 5;
    std::size_t motor_heads = 4;
    std::size_t motor_layers = 2;
    std::size_t motor_ff_mult = 2;

    // Motor decoder: latent -> [dec_channels x dec_length], then dec_layers
    // transposed convolutions (kernel 4, stride 2).
    std::size_t dec_channels = 32;
    std::size_t dec_length = 25;
    std::size_t dec_layers = 4;

    std::vector<std::size_t> eeg_filters() const;
    /// Temporal length entering the final EEG projection.
    std::size_t eeg_final_length() const;
    std::size_t motor_tokens() const;
    std::size_t decoder_raw_length() const;
    /// Throws ConfigError for inconsistent geometry.
    void validate() const;
};

template <class T> using ParamVisitor = std::function<void(Parameter<T> &, bool is_buffer)>;
template <class T> using ConstParamVisitor = std::function<void(const Parameter<T> &, bool is_buffer)>;

template <class T> Parameter<T> make_param(std::string name, Shape shape, T fill = T(0), bool trainable = true) {
    Parameter<T> p;
    p.name = std::move(name);
    p.value = Tensor<T>(std::move(shape), fill);
    p.trainable = trainable;
    return p;
}

/// Glorot-uniform fill with the given fans.
template <class T> void glorot(Parameter<T> &p, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
    const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto &v : p.value.data) v = static_cast<T>(rng.uniform(-lim, lim));
}

/// Sinusoidal positional table [L×d].
template <class T> Tensor<T> sinusoidal_positions(std::size_t L, std::size_t d) {
    Tensor<T> pe({L, d});
    for (std::size_t p = 0; p < L; ++p)
        for (std::size_t i = 0; i < d; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
            const double a = static_cast<double>(p) * rate;
            pe[p * d + i] = static_cast<T>(i % 2 == 0 ? std::sin(a) : std::cos(a));
        }
    return pe;
}

} // namespace ndg::nets
