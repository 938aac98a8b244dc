// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ndgait/diff/tensor.hpp"

namespace ndg::data {

/// One synchronized subject-session recording.
struct RawSession {
    std::string subject_id;
    std::string session_id;
    double fs = 200.0;
    diff::Tensor<float> eeg;    // [C×T]
    diff::Tensor<float> joints; // [J×T]
    std::vector<std::string> channel_names;
    std::vector<std::string> joint_names;

    std::size_t channels() const { return eeg.rank() == 2 ? eeg.dim(0) : 0; }
    std::size_t num_joints() const { return joints.rank() == 2 ? joints.dim(0) : 0; }
    std::size_t length() const { return eeg.rank() == 2 ? eeg.dim(1) : 0; }
    std::string key() const { return subject_id + "_" + session_id; }

    /// Throws MetadataMismatchError when shapes and names disagree.
    void validate() const;
};

using SessionPtr = std::shared_ptr<const RawSession>;

inline constexpr std::size_t kWindow = 400;
inline constexpr std::size_t kHop = 10;

/// A window [t_end-win+1, t_end] of one session. Arrays are read from the
/// shared session on demand.
struct WindowSample {
    SessionPtr session;
    std::size_t session_index = 0;
    std::size_t t_end = 0;
    std::size_t win = kWindow;

    const std::string &subject_id() const { return session->subject_id; }
    std::size_t t_start() const { return t_end + 1 - win; }

    diff::Tensor<float> eeg() const;    // [C×win]
    diff::Tensor<float> motion() const; // [J×win]
    /// Joint values at t_end.
    std::vector<float> final_frame() const;
};

/// floor((T - win)/stride) + 1 windows ordered by t_end.
std::vector<WindowSample> segment_windows(const SessionPtr &session, std::size_t session_index,
                                          std::size_t win = kWindow, std::size_t stride = kHop);

/// Stacks window EEG into [N×C×win].
template <class T>
diff::Tensor<T> stack_eeg(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx);

/// Stacks window motion into [N×J×win].
template <class T>
diff::Tensor<T> stack_motion(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx);

/// Final-frame joint targets [N×J].
template <class T>
diff::Tensor<T> stack_final_frames(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx);

} // namespace ndg::data
