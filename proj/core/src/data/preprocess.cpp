// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/data/preprocess.hpp"

namespace ndg::data {

PreprocessResult preprocess_session(const RawSession &raw, const PreprocessConfig &cfg) {
    raw.validate();
    sigproc::Array eeg = raw.eeg.cast<double>();
    sigproc::Array joints = raw.joints.cast<double>();

    eeg = sigproc::bandpass(eeg, raw.fs, cfg.filter);
    if (cfg.car) eeg = sigproc::common_average_reference(eeg);
    if (raw.fs != cfg.fs_target) {
        eeg = sigproc::resample(eeg, raw.fs, cfg.fs_target);
        joints = sigproc::resample(joints, raw.fs, cfg.fs_target);
    }

    PreprocessResult out;
    if (cfg.znorm) {
        auto z = sigproc::znorm_joints(joints);
        joints = std::move(z.joints);
        out.joint_stats = std::move(z.stats);
    }
    out.session.subject_id = raw.subject_id;
    out.session.session_id = raw.session_id;
    out.session.fs = cfg.fs_target;
    out.session.channel_names = raw.channel_names;
    out.session.joint_names = raw.joint_names;
    out.session.eeg = eeg.cast<float>();
    out.session.joints = joints.cast<float>();
    return out;
}

} // namespace ndg::data
