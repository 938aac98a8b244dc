// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/data/session.hpp"

#include "ndgait/error.hpp"

#include <algorithm>
#include <string>

namespace ndg::data {

void RawSession::validate() const {
    if (eeg.rank() != 2 || joints.rank() != 2)
        throw MetadataMismatchError("session " + key() + ": eeg and joints must be rank 2");
    if (eeg.dim(1) != joints.dim(1))
        throw MetadataMismatchError("session " + key() + ": eeg and joints lengths differ");
    if (!channel_names.empty() && channel_names.size() != eeg.dim(0))
        throw MetadataMismatchError("session " + key() + ": channel name count mismatch");
    if (!joint_names.empty() && joint_names.size() != joints.dim(0))
        throw MetadataMismatchError("session " + key() + ": joint name count mismatch");
}

namespace {

diff::Tensor<float> slice(const diff::Tensor<float> &a, std::size_t start, std::size_t win) {
    const std::size_t R = a.dim(0), T = a.dim(1);
    diff::Tensor<float> out({R, win});
    for (std::size_t r = 0; r < R; ++r)
        std::copy(a.ptr() + r * T + start, a.ptr() + r * T + start + win, out.ptr() + r * win);
    return out;
}

template <class T>
void copy_rows(const diff::Tensor<float> &a, std::size_t start, std::size_t win, T *dst) {
    const std::size_t R = a.dim(0), L = a.dim(1);
    for (std::size_t r = 0; r < R; ++r) {
        const float *src = a.ptr() + r * L + start;
        for (std::size_t t = 0; t < win; ++t) dst[r * win + t] = static_cast<T>(src[t]);
    }
}

} // namespace

diff::Tensor<float> WindowSample::eeg() const { return slice(session->eeg, t_start(), win); }

diff::Tensor<float> WindowSample::motion() const { return slice(session->joints, t_start(), win); }

std::vector<float> WindowSample::final_frame() const {
    const std::size_t J = session->num_joints(), T = session->length();
    std::vector<float> v(J);
    for (std::size_t j = 0; j < J; ++j) v[j] = session->joints[j * T + t_end];
    return v;
}

std::vector<WindowSample> segment_windows(const SessionPtr &session, std::size_t session_index,
                                          std::size_t win, std::size_t stride) {
    if (stride < 1) throw ConfigError("segment_windows: stride must be >= 1");
    if (win < 1) throw ConfigError("segment_windows: window must be >= 1");
    const std::size_t T = session->length();
    if (T < win)
        throw InputError("segment_windows: session " + session->key() + " has " + std::to_string(T) +
                         " samples, fewer than one window of " + std::to_string(win));
    const std::size_t n = (T - win) / stride + 1;
    std::vector<WindowSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({session, session_index, i * stride + win - 1, win});
    return out;
}

template <class T>
diff::Tensor<T> stack_eeg(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx) {
    if (idx.empty()) throw InputError("stack_eeg: empty batch");
    const std::size_t C = ws[idx[0]].session->channels(), W = ws[idx[0]].win;
    diff::Tensor<T> out({idx.size(), C, W});
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto &w = ws[idx[n]];
        if (w.session->channels() != C || w.win != W) throw ShapeError("stack_eeg: mixed window shapes");
        copy_rows(w.session->eeg, w.t_start(), W, out.ptr() + n * C * W);
    }
    return out;
}

template <class T>
diff::Tensor<T> stack_motion(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx) {
    if (idx.empty()) throw InputError("stack_motion: empty batch");
    const std::size_t J = ws[idx[0]].session->num_joints(), W = ws[idx[0]].win;
    diff::Tensor<T> out({idx.size(), J, W});
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto &w = ws[idx[n]];
        if (w.session->num_joints() != J || w.win != W) throw ShapeError("stack_motion: mixed window shapes");
        copy_rows(w.session->joints, w.t_start(), W, out.ptr() + n * J * W);
    }
    return out;
}

template <class T>
diff::Tensor<T> stack_final_frames(const std::vector<WindowSample> &ws, const std::vector<std::size_t> &idx) {
    if (idx.empty()) throw InputError("stack_final_frames: empty batch");
    const std::size_t J = ws[idx[0]].session->num_joints();
    diff::Tensor<T> out({idx.size(), J});
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto &w = ws[idx[n]];
        const std::size_t L = w.session->length();
        for (std::size_t j = 0; j < J; ++j) out[n * J + j] = static_cast<T>(w.session->joints[j * L + w.t_end]);
    }
    return out;
}

template diff::Tensor<float> stack_eeg<float>(const std::vector<WindowSample> &, const std::vector<std::size_t> &);
template diff::Tensor<double> stack_eeg<double>(const std::vector<WindowSample> &, const std::vector<std::size_t> &);
template diff::Tensor<float> stack_motion<float>(const std::vector<WindowSample> &, const std::vector<std::size_t> &);
template diff::Tensor<double> stack_motion<double>(const std::vector<WindowSample> &,
                                                   const std::vector<std::size_t> &);
template diff::Tensor<float> stack_final_frames<float>(const std::vector<WindowSample> &,
                                                       const std::vector<std::size_t> &);
template diff::Tensor<double> stack_final_frames<double>(const std::vector<WindowSample> &,
                                                         const std::vector<std::size_t> &);

} // namespace ndg::data
