// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/data/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ndgait/error.hpp"

namespace ndg::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_blob(const fs::path &path, const diff::Tensor<float> &a) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + path.string());
    f.write(kDataMagic, sizeof kDataMagic);
    if constexpr (std::endian::native == std::endian::little) {
        f.write(reinterpret_cast<const char *>(a.ptr()), static_cast<std::streamsize>(a.size() * sizeof(float)));
    } else {
        for (float v : a.data) {
            auto u = std::bit_cast<std::uint32_t>(v);
            u = (u >> 24) | ((u >> 8) & 0xFF00u) | ((u << 8) & 0xFF0000u) | (u << 24);
            f.write(reinterpret_cast<const char *>(&u), 4);
        }
    }
    if (!f) throw InputError("write failed for " + path.string());
}

diff::Tensor<float> read_blob(const fs::path &path, std::size_t rows, std::size_t cols) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw TruncatedError("missing payload " + path.string());
    const auto bytes = static_cast<std::size_t>(fs::file_size(path));
    char magic[8] = {};
    if (bytes < sizeof magic) throw TruncatedError(path.string() + ": shorter than the magic header");
    f.read(magic, sizeof magic);
    if (std::memcmp(magic, kDataMagic, sizeof magic) != 0) throw MagicError(path.string() + ": bad magic bytes");
    const std::size_t want = rows * cols * sizeof(float);
    const std::size_t have = bytes - sizeof magic;
    if (have < want)
        throw TruncatedError(path.string() + ": payload has " + std::to_string(have) + " bytes, expected " +
                             std::to_string(want));
    if (have > want)
        throw MetadataMismatchError(path.string() + ": payload has " + std::to_string(have) +
                                    " bytes, metadata implies " + std::to_string(want));
    diff::Tensor<float> a({rows, cols});
    f.read(reinterpret_cast<char *>(a.ptr()), static_cast<std::streamsize>(want));
    if (!f) throw TruncatedError(path.string() + ": short read");
    if constexpr (std::endian::native != std::endian::little) {
        for (float &v : a.data) {
            auto u = std::bit_cast<std::uint32_t>(v);
            u = (u >> 24) | ((u >> 8) & 0xFF00u) | ((u << 8) & 0xFF0000u) | (u << 24);
            v = std::bit_cast<float>(u);
        }
    }
    return a;
}

template <class T> T field(const json &j, const char *name, const fs::path &dir) {
    if (!j.contains(name)) throw MetadataMismatchError(dir.string() + "/meta.json: missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception &e) {
        throw MetadataMismatchError(dir.string() + "/meta.json: field '" + name + "': " + e.what());
    }
}

} // namespace

void save_session(const RawSession &s, const fs::path &dir) {
    s.validate();
    fs::create_directories(dir);
    json meta = {{"subject_id", s.subject_id},
                 {"session_id", s.session_id},
                 {"fs", s.fs},
                 {"C", s.channels()},
                 {"J", s.num_joints()},
                 {"T_total", s.length()},
                 {"channel_names", s.channel_names},
                 {"joint_names", s.joint_names},
                 {"format_version", kDataFormatVersion}};
    {
        std::ofstream f(dir / "meta.json", std::ios::trunc);
        if (!f) throw InputError("cannot write " + (dir / "meta.json").string());
        f << meta.dump(2) << '\n';
    }
    write_blob(dir / "eeg.f32", s.eeg);
    write_blob(dir / "joints.f32", s.joints);
}

RawSession load_session(const fs::path &dir) {
    if (!fs::is_directory(dir)) throw InputError("session directory not found: " + dir.string());
    std::ifstream f(dir / "meta.json");
    if (!f) throw MetadataMismatchError(dir.string() + ": missing meta.json");
    json meta;
    try {
        meta = json::parse(f);
    } catch (const json::exception &e) {
        throw MetadataMismatchError(dir.string() + "/meta.json: " + e.what());
    }
    const int version = field<int>(meta, "format_version", dir);
    if (version != kDataFormatVersion)
        throw MetadataMismatchError(dir.string() + ": unsupported format_version " + std::to_string(version));

    RawSession s;
    s.subject_id = field<std::string>(meta, "subject_id", dir);
    s.session_id = field<std::string>(meta, "session_id", dir);
    s.fs = field<double>(meta, "fs", dir);
    const auto C = field<std::size_t>(meta, "C", dir);
    const auto J = field<std::size_t>(meta, "J", dir);
    const auto T = field<std::size_t>(meta, "T_total", dir);
    s.channel_names = field<std::vector<std::string>>(meta, "channel_names", dir);
    s.joint_names = field<std::vector<std::string>>(meta, "joint_names", dir);
    if (s.channel_names.size() != C || s.joint_names.size() != J)
        throw MetadataMismatchError(dir.string() + ": name lists disagree with C/J");
    s.eeg = read_blob(dir / "eeg.f32", C, T);
    s.joints = read_blob(dir / "joints.f32", J, T);
    return s;
}

void save_dataset(const std::vector<RawSession> &sessions, const fs::path &root) {
    fs::create_directories(root);
    for (const auto &s : sessions) save_session(s, root / s.key());
}

std::vector<RawSession> load_dataset(const fs::path &root) {
    if (!fs::is_directory(root)) throw InputError("dataset directory not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto &e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "meta.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw InputError("no sessions under " + root.string());
    std::vector<RawSession> out;
    out.reserve(dirs.size());
    for (const auto &d : dirs) out.push_back(load_session(d));
    return out;
}

void save_event_truth(const EventTruth &ev, const fs::path &dir) {
    json j = {{"hip_l_max", ev.times[0]}, {"knee_l_max", ev.times[1]}, {"hip_r_max", ev.times[2]},
              {"knee_r_max", ev.times[3]}};
    std::ofstream f(dir / "events.json", std::ios::trunc);
    if (!f) throw InputError("cannot write " + (dir / "events.json").string());
    f << j.dump() << '\n';
}

bool load_event_truth(const fs::path &dir, EventTruth &ev) {
    std::ifstream f(dir / "events.json");
    if (!f) return false;
    try {
        const json j = json::parse(f);
        ev.times[0] = j.at("hip_l_max").get<std::vector<double>>();
        ev.times[1] = j.at("knee_l_max").get<std::vector<double>>();
        ev.times[2] = j.at("hip_r_max").get<std::vector<double>>();
        ev.times[3] = j.at("knee_r_max").get<std::vector<double>>();
    } catch (const json::exception &e) {
        throw MetadataMismatchError((dir / "events.json").string() + ": " + e.what());
    }
    return true;
}

} // namespace ndg::data
