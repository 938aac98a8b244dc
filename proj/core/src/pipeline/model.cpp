// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ndgait/error.hpp"

namespace ndg::pipeline {

using nlohmann::json;

void Model::visit(const nets::ParamVisitor<Real> &f) {
    s1.visit(f);
    if (has_heads()) {
        heads.visit(f);
        scorer.visit(f);
    }
}

void Model::visit(const nets::ConstParamVisitor<Real> &f) const {
    const_cast<Model *>(this)->visit([&f](diff::Parameter<Real> &p, bool buf) { f(p, buf); });
}

objectives::DistanceVariant distance_variant(const RunConfig &cfg) {
    return cfg.ablation.cosine_distance ? objectives::DistanceVariant::Cosine
                                        : objectives::DistanceVariant::CrossAttention;
}

Model init_model(const RunConfig &cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(derive_seed(cfg.seed, 1));
    m.s1 = objectives::Stage1Model<Real>(cfg.net, cfg.token_count, distance_variant(cfg), rng);
    m.rng_state = rng.state();
    return m;
}

void init_heads(Model &m, const std::vector<std::string> &source_sessions, Rng &rng) {
    m.heads = nets::SessionHeads<Real>(source_sessions.size(), m.cfg.net.latent, m.cfg.net.joints, rng);
    m.scorer = nets::DomainScorer<Real>(source_sessions.size(), m.cfg.net.latent, rng);
    m.source_sessions = source_sessions;
}

Model transfer_init(const Model &src, const RunConfig &cfg, const std::vector<std::string> &source_sessions) {
    if (src.cfg.net.channels != cfg.net.channels)
        throw ShapeError("transfer_init: source encoder has " + std::to_string(src.cfg.net.channels) +
                         " channels, target dataset has " + std::to_string(cfg.net.channels));
    RunConfig c = cfg;
    // encoder geometry follows the source so its weights fit
    const auto keep = c.net;
    c.net = src.cfg.net;
    c.net.joints = keep.joints;
    c.net.motor_heads = keep.motor_heads;
    c.net.motor_layers = keep.motor_layers;
    c.net.dec_channels = keep.dec_channels;
    Model m = init_model(c);
    m.s1.eeg = src.s1.eeg;
    if (!source_sessions.empty()) {
        Rng rng(derive_seed(c.seed, 2));
        init_heads(m, source_sessions, rng);
    }
    m.stage = "transfer";
    return m;
}

namespace {

void put_f32(std::string &out, float v) {
    auto u = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    char b[4];
    std::memcpy(b, &u, 4);
    out.append(b, 4);
}

float get_f32(const char *p) {
    std::uint32_t u;
    std::memcpy(&u, p, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    return std::bit_cast<float>(u);
}

void put_u64(std::string &out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const char *p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

} // namespace

std::string checkpoint_bytes(const Model &m) {
    json params = json::array();
    std::string blob;
    m.visit([&](const diff::Parameter<Real> &p, bool buffer) {
        params.push_back({{"name", p.name}, {"shape", p.value.shape}, {"buffer", buffer}});
        for (float v : p.value.data) put_f32(blob, v);
    });
    json h;
    h["format_version"] = kCheckpointVersion;
    h["config"] = json::parse(config_to_json(m.cfg));
    h["stage"] = m.stage;
    h["step"] = m.step;
    h["rng_state"] = m.rng_state;
    h["source_sessions"] = m.source_sessions;
    h["params"] = std::move(params);
    const std::string header = h.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u64(out, header.size());
    out += header;
    out += blob;
    return out;
}

Model checkpoint_from_bytes(const std::string &bytes) {
    if (bytes.size() < 16) throw TruncatedError("checkpoint shorter than its fixed header");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw MagicError("not a checkpoint (bad magic)");
    const std::uint64_t hlen = get_u64(bytes.data() + 8);
    if (hlen > bytes.size() - 16) throw TruncatedError("checkpoint header truncated");
    json h;
    try {
        h = json::parse(bytes.substr(16, hlen));
    } catch (const json::exception &e) {
        throw MetadataMismatchError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (h.value("format_version", 0) != kCheckpointVersion)
        throw MetadataMismatchError("unsupported checkpoint format_version");
    Model m;
    try {
        m.cfg = config_from_json(h.at("config").dump());
        Rng rng(0);
        m.s1 = objectives::Stage1Model<Real>(m.cfg.net, m.cfg.token_count, distance_variant(m.cfg), rng);
        const auto sessions = h.at("source_sessions").get<std::vector<std::string>>();
        if (!sessions.empty()) init_heads(m, sessions, rng);
        m.stage = h.at("stage").get<std::string>();
        m.step = h.at("step").get<std::uint64_t>();
        m.rng_state = h.at("rng_state").get<std::string>();
    } catch (const json::exception &e) {
        throw MetadataMismatchError(std::string("checkpoint header: ") + e.what());
    }

    std::map<std::string, diff::Parameter<Real> *> by_name;
    m.visit([&](diff::Parameter<Real> &p, bool) { by_name[p.name] = &p; });
    const auto &params = h.at("params");
    if (params.size() != by_name.size())
        throw MetadataMismatchError("checkpoint has " + std::to_string(params.size()) + " arrays, model expects " +
                                    std::to_string(by_name.size()));
    std::size_t off = 16 + hlen;
    for (const auto &e : params) {
        const auto name = e.at("name").get<std::string>();
        const auto shape = e.at("shape").get<diff::Shape>();
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw MetadataMismatchError("checkpoint array '" + name + "' is not in the model");
        auto &p = *it->second;
        if (p.value.shape != shape)
            throw MetadataMismatchError("checkpoint array '" + name + "' has shape " + diff::shape_str(shape) +
                                        ", model expects " + diff::shape_str(p.value.shape));
        const std::size_t n = p.value.size();
        if (bytes.size() < off + 4 * n) throw TruncatedError("checkpoint payload truncated at '" + name + "'");
        for (std::size_t i = 0; i < n; ++i) p.value[i] = get_f32(bytes.data() + off + 4 * i);
        off += 4 * n;
    }
    if (off != bytes.size()) throw MetadataMismatchError("checkpoint has trailing bytes");
    return m;
}

void save_checkpoint(const Model &m, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    const auto b = checkpoint_bytes(m);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!os) throw InputError("write failed for " + path);
}

Model load_checkpoint(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return checkpoint_from_bytes(ss.str());
}

} // namespace ndg::pipeline
