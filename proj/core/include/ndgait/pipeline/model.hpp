// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndgait/objectives/stage1.hpp"
#include "ndgait/pipeline/config.hpp"

namespace ndg::pipeline {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using Real = float;

/// Everything a run trains: the Stage I networks plus one head per source
/// session and the domain scorer. Heads are empty until Stage II.
struct Model {
    RunConfig cfg;
    objectives::Stage1Model<Real> s1;
    nets::SessionHeads<Real> heads;
    nets::DomainScorer<Real> scorer;
    std::vector<std::string> source_sessions; // head order
    std::string stage = "init";
    std::uint64_t step = 0;
    std::string rng_state;

    void visit(const nets::ParamVisitor<Real> &f);
    void visit(const nets::ConstParamVisitor<Real> &f) const;
    bool has_heads() const { return heads.count() > 0; }
};

objectives::DistanceVariant distance_variant(const RunConfig &cfg);

/// Fresh Stage I networks drawn from cfg.seed.
Model init_model(const RunConfig &cfg);

/// Replaces heads and scorer with freshly initialized ones for the given
/// source sessions.
void init_heads(Model &m, const std::vector<std::string> &source_sessions, Rng &rng);

/// Copies the EEG encoder of src into a model for a new dataset shape
/// (joints, source sessions); every other network is re-initialized from
/// cfg.seed. Throws ShapeError when the channel counts differ.
Model transfer_init(const Model &src, const RunConfig &cfg, const std::vector<std::string> &source_sessions = {});

inline constexpr char kCheckpointMagic[8] = {'N', 'D', 'G', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCheckpointVersion = 1;

/// "NDGCKPT1", u64 LE header length, JSON header, then every parameter as
/// little-endian float32 in header order.
std::string checkpoint_bytes(const Model &m);
Model checkpoint_from_bytes(const std::string &bytes);
void save_checkpoint(const Model &m, const std::string &path);
Model load_checkpoint(const std::string &path);

} // namespace ndg::pipeline
