// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "ndgait/data/session.hpp"
#include "ndgait/data/synth.hpp"

namespace ndg::data {

inline constexpr char kDataMagic[8] = {'N', 'D', 'G', 'D', 'A', 'T', 'A', '1'};
inline constexpr int kDataFormatVersion = 1;

/// Writes <dir>/meta.json, <dir>/eeg.f32 and <dir>/joints.f32.
void save_session(const RawSession &session, const std::filesystem::path &dir);

/// Throws MagicError, TruncatedError or MetadataMismatchError on a
/// malformed directory, InputError when it does not exist.
RawSession load_session(const std::filesystem::path &dir);

/// One subdirectory per session named <subject>_<session>.
void save_dataset(const std::vector<RawSession> &sessions, const std::filesystem::path &root);

/// Loads every subdirectory holding a meta.json, sorted by name.
std::vector<RawSession> load_dataset(const std::filesystem::path &root);

/// Optional <dir>/events.json with ground-truth event sample times.
void save_event_truth(const EventTruth &ev, const std::filesystem::path &dir);
bool load_event_truth(const std::filesystem::path &dir, EventTruth &ev);

} // namespace ndg::data
