// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "livewarp/compose.hpp"
#include "livewarp/engine.hpp"
#include "livewarp/keyframe_store.hpp"
#include "livewarp/png_io.hpp"

namespace livewarp::protocol {

using json = nlohmann::json;

inline constexpr std::array<std::uint8_t, 4> kMagic{'L', 'N', 'V', 'S'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 22;
/// Set in the mode byte when the payload is a PNG stream instead of raw RGB8.
inline constexpr std::uint8_t kPngFlag = 0x80;
inline constexpr double kQuaternionTolerance = 1e-3;

/// Rejected control message; `code` is a stable machine-readable tag.
class ProtocolError : public Error {
public:
    ProtocolError(std::string code, const std::string& message)
        : Error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(std::uint8_t(std::uint64_t(v) >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return T(v);
}

}  // namespace detail

/// Binary frame: "LNVS", version, mode, width, height, frame_index, payload.
/// Integers are little-endian; the raw payload is W*H*3 bytes of row-major RGB8.
struct FrameMessage {
    ViewMode mode = ViewMode::Color;
    bool png = false;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint64_t frame_index = 0;
    std::vector<std::uint8_t> payload;

    static FrameMessage from_image(const ColorImage& img, ViewMode mode, std::uint64_t frame_index,
                                   bool png = false) {
        if (img.channels() != 3) throw Error("frame: expected an RGB image");
        FrameMessage m;
        m.mode = mode;
        m.png = png;
        m.width = std::uint32_t(img.width());
        m.height = std::uint32_t(img.height());
        m.frame_index = frame_index;
        if (png) {
            m.payload = png::encode_rgb8(img);
        } else {
            m.payload.assign(img.data().begin(), img.data().end());
        }
        return m;
    }

    std::vector<std::uint8_t> encode() const {
        if (!png && payload.size() != std::size_t(width) * height * 3) {
            throw Error("frame: payload must be exactly 3*W*H bytes");
        }
        std::vector<std::uint8_t> out;
        out.reserve(kHeaderSize + payload.size());
        for (std::uint8_t b : kMagic) out.push_back(b);
        out.push_back(kVersion);
        out.push_back(std::uint8_t(std::uint8_t(mode) | (png ? kPngFlag : 0)));
        detail::put_le(out, width);
        detail::put_le(out, height);
        detail::put_le(out, frame_index);
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }

    static FrameMessage decode(std::span<const std::uint8_t> bytes) {
        if (bytes.size() < kHeaderSize) throw Error("frame: truncated header");
        if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error("frame: bad magic");
        if (bytes[4] != kVersion) throw Error("frame: unsupported version " + std::to_string(bytes[4]));
        FrameMessage m;
        const std::uint8_t mode = bytes[5] & std::uint8_t(~kPngFlag);
        if (mode > std::uint8_t(ViewMode::Confidence)) throw Error("frame: unknown mode " + std::to_string(mode));
        m.mode = ViewMode(mode);
        m.png = (bytes[5] & kPngFlag) != 0;
        m.width = detail::get_le<std::uint32_t>(bytes.data() + 6);
        m.height = detail::get_le<std::uint32_t>(bytes.data() + 10);
        m.frame_index = detail::get_le<std::uint64_t>(bytes.data() + 14);
        const std::size_t n = bytes.size() - kHeaderSize;
        if (!m.png && n != std::size_t(m.width) * m.height * 3) {
            throw Error("frame: payload is " + std::to_string(n) + " bytes, expected 3*W*H");
        }
        m.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
        return m;
    }

    /// Pixels, decompressed if needed.
    ColorImage image() const {
        if (png) {
            ColorImage img = png::decode_rgb8(payload);
            if (std::uint32_t(img.width()) != width || std::uint32_t(img.height()) != height) {
                throw Error("frame: PNG size does not match header");
            }
            return img;
        }
        ColorImage img(int(width), int(height), 3);
        std::copy(payload.begin(), payload.end(), img.data().begin());
        return img;
    }
};

/// Named runtime overrides; absent fields keep their current value.
struct ParamOverrides {
    std::optional<int> num_views;
    std::optional<int> tile_size;
    std::optional<int> coverage_downsample;
    std::optional<int> encode_budget;
    std::optional<int> deferred_depth_views;
    std::optional<double> band_kappa;
    std::optional<double> delta_a;
    std::optional<double> delta_b;
    std::optional<double> delta_c;
    std::optional<bool> strict_paper_delta;
    std::optional<double> edge_lambda;
    std::optional<double> conf_k;
    std::optional<double> temporal_blend;
    std::optional<double> depth_near;
    std::optional<double> depth_far;
    std::optional<WarpMode> warp_mode;
    std::optional<bool> png;
    std::optional<double> render_fps;

    static ParamOverrides parse(const json& j) {
        if (!j.is_object()) throw ProtocolError("malformed", "set_params: params must be an object");
        ParamOverrides p;
        for (const auto& [key, v] : j.items()) {
            auto integer = [&](std::optional<int>& dst, long lo, long hi) {
                if (!v.is_number_integer()) throw ProtocolError("malformed", "set_params: " + key + " must be an integer");
                const long x = v.get<long>();
                if (x < lo || x > hi) {
                    throw ProtocolError("out_of_range", "set_params: " + key + " must be in [" +
                                                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
                }
                dst = int(x);
            };
            auto real = [&](std::optional<double>& dst) {
                if (!v.is_number()) throw ProtocolError("malformed", "set_params: " + key + " must be a number");
                dst = v.get<double>();
                if (!std::isfinite(*dst)) throw ProtocolError("out_of_range", "set_params: " + key + " must be finite");
            };
            auto boolean = [&](std::optional<bool>& dst) {
                if (!v.is_boolean()) throw ProtocolError("malformed", "set_params: " + key + " must be a boolean");
                dst = v.get<bool>();
            };
            if (key == "num_views") integer(p.num_views, 1, 256);
            else if (key == "tile_size") integer(p.tile_size, 1, 4096);
            else if (key == "coverage_downsample") integer(p.coverage_downsample, 1, 64);
            else if (key == "encode_budget") integer(p.encode_budget, -1, 1024);
            else if (key == "deferred_depth_views") integer(p.deferred_depth_views, 0, 256);
            else if (key == "band_kappa") real(p.band_kappa);
            else if (key == "delta_a") real(p.delta_a);
            else if (key == "delta_b") real(p.delta_b);
            else if (key == "delta_c") real(p.delta_c);
            else if (key == "strict_paper_delta") boolean(p.strict_paper_delta);
            else if (key == "edge_lambda") real(p.edge_lambda);
            else if (key == "conf_k") real(p.conf_k);
            else if (key == "temporal_blend") real(p.temporal_blend);
            else if (key == "depth_near") real(p.depth_near);
            else if (key == "depth_far") real(p.depth_far);
            else if (key == "png") boolean(p.png);
            else if (key == "render_fps") {
                real(p.render_fps);
                if (!(*p.render_fps > 0.0 && *p.render_fps <= 240.0)) {
                    throw ProtocolError("out_of_range", "set_params: render_fps must be in (0, 240]");
                }
            } else if (key == "warp_mode") {
                if (v == "forward") p.warp_mode = WarpMode::Forward;
                else if (v == "deferred") p.warp_mode = WarpMode::Deferred;
                else throw ProtocolError("malformed", "set_params: warp_mode must be forward or deferred");
            } else {
                throw ProtocolError("unknown_param", "set_params: unknown parameter " + key);
            }
        }
        return p;
    }

    /// `base` with the overrides applied; throws if the result is invalid.
    EngineConfig apply(EngineConfig base) const {
        if (num_views) base.select.num_views = *num_views;
        if (tile_size) base.select.tile_size = *tile_size;
        if (coverage_downsample) base.select.coverage_downsample = *coverage_downsample;
        if (encode_budget) base.encode_budget = *encode_budget;
        if (deferred_depth_views) base.deferred_depth_views = *deferred_depth_views;
        if (band_kappa) base.model.band_kappa = *band_kappa;
        if (delta_a) base.model.a = *delta_a;
        if (delta_b) base.model.b = *delta_b;
        if (delta_c) base.model.c = *delta_c;
        if (strict_paper_delta) base.model.strict_paper_mode = *strict_paper_delta;
        if (edge_lambda) base.edge_lambda = float(*edge_lambda);
        if (conf_k) base.compose.conf_k = float(*conf_k);
        if (temporal_blend) base.temporal_blend = float(*temporal_blend);
        if (depth_near) base.compose.depth_near = float(*depth_near);
        if (depth_far) base.compose.depth_far = float(*depth_far);
        if (warp_mode) base.mode = *warp_mode;
        try {
            base.validate();
        } catch (const ProtocolError&) {
            throw;
        } catch (const Error& e) {
            throw ProtocolError("out_of_range", std::string("set_params: ") + e.what());
        }
        return base;
    }
};

struct SetPose {
    Pose pose;
};
struct SetMode {
    ViewMode mode = ViewMode::Color;
};
struct SetParams {
    ParamOverrides params;
};
struct UpdatePoses {
    PoseUpdateBatch batch;
};
struct GetStats {};

struct ControlMessage {
    std::variant<SetPose, SetMode, SetParams, UpdatePoses, GetStats> body;
    std::optional<std::int64_t> seq;  // echoed in the reply

    const char* type() const {
        static constexpr const char* names[] = {"set_pose", "set_mode", "set_params", "update_poses", "get_stats"};
        return names[body.index()];
    }
};

/// "tx ty tz qx qy qz qw" as seven numbers. The quaternion is renormalized
/// when its norm is within kQuaternionTolerance of 1 and rejected otherwise.
inline Pose parse_pose(const json& j) {
    if (!j.is_array() || j.size() != 7) {
        throw ProtocolError("bad_pose", "pose must be an array of 7 numbers tx ty tz qx qy qz qw");
    }
    std::array<double, 7> v{};
    for (std::size_t i = 0; i < 7; ++i) {
        if (!j[i].is_number()) throw ProtocolError("bad_pose", "pose entries must be numbers");
        v[i] = j[i].get<double>();
        if (!std::isfinite(v[i])) throw ProtocolError("bad_pose", "pose entries must be finite");
    }
    const double norm = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
    if (!(std::abs(norm - 1.0) <= kQuaternionTolerance)) {
        throw ProtocolError("bad_pose", "quaternion norm " + std::to_string(norm) + " is not within 1e-3 of 1");
    }
    return Pose::from_tum(v[0], v[1], v[2], v[3] / norm, v[4] / norm, v[5] / norm, v[6] / norm);
}

inline json pose_to_json(const Pose& p) {
    Eigen::Quaterniond q = p.quaternion();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return json::array({p.translation.x(), p.translation.y(), p.translation.z(), q.x(), q.y(), q.z(), q.w()});
}

inline ControlMessage parse_control(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError("malformed", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("malformed", "control message must be a JSON object");
    if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("malformed", "missing string field 'type'");
    ControlMessage m;
    if (j.contains("seq")) {
        if (!j["seq"].is_number_integer()) throw ProtocolError("malformed", "seq must be an integer");
        m.seq = j["seq"].get<std::int64_t>();
    }
    auto field = [&](const char* name) -> const json& {
        if (!j.contains(name)) throw ProtocolError("malformed", std::string("missing field '") + name + "'");
        return j[name];
    };
    const std::string type = j["type"];
    if (type == "set_pose") {
        m.body = SetPose{parse_pose(field("pose"))};
    } else if (type == "set_mode") {
        const json& mode = field("mode");
        const auto v = mode.is_string() ? parse_view_mode(mode.get<std::string>()) : std::nullopt;
        if (!v) throw ProtocolError("malformed", "mode must be color, depth or confidence");
        m.body = SetMode{*v};
    } else if (type == "set_params") {
        m.body = SetParams{ParamOverrides::parse(field("params"))};
    } else if (type == "update_poses") {
        const json& list = field("poses");
        if (!list.is_array()) throw ProtocolError("malformed", "poses must be an array");
        UpdatePoses u;
        for (const json& e : list) {
            if (!e.is_object() || !e.contains("id") || !e["id"].is_number_integer() || !e.contains("pose")) {
                throw ProtocolError("malformed", "update_poses entries need an integer id and a pose");
            }
            u.batch.push_back({e["id"].get<KeyframeId>(), parse_pose(e["pose"])});
        }
        m.body = std::move(u);
    } else if (type == "get_stats") {
        m.body = GetStats{};
    } else {
        throw ProtocolError("unknown_type", "unknown message type '" + type + "'");
    }
    return m;
}

/// Type and seq of a message that may fail validation, for error replies.
struct Envelope {
    std::optional<std::string> type;
    std::optional<std::int64_t> seq;
};

inline Envelope peek_envelope(std::string_view text) {
    Envelope e;
    const json j = json::parse(text, nullptr, false);
    if (!j.is_object()) return e;
    if (j.contains("type") && j["type"].is_string()) e.type = j["type"].get<std::string>();
    if (j.contains("seq") && j["seq"].is_number_integer()) e.seq = j["seq"].get<std::int64_t>();
    return e;
}

inline json make_ack(std::string_view request, std::optional<std::int64_t> seq) {
    json j{{"type", "ack"}, {"request", request}};
    if (seq) j["seq"] = *seq;
    return j;
}

inline json make_error(const ProtocolError& e, std::optional<std::string_view> request,
                       std::optional<std::int64_t> seq) {
    json j{{"type", "error"}, {"code", e.code()}, {"message", e.what()}};
    j["request"] = request ? json(*request) : json(nullptr);
    if (seq) j["seq"] = *seq;
    return j;
}

/// Client-side builders.
inline json set_pose_msg(const Pose& p) { return {{"type", "set_pose"}, {"pose", pose_to_json(p)}}; }
inline json set_mode_msg(ViewMode m) { return {{"type", "set_mode"}, {"mode", to_string(m)}}; }
inline json get_stats_msg() { return {{"type", "get_stats"}}; }
inline json update_poses_msg(const PoseUpdateBatch& batch) {
    json list = json::array();
    for (const auto& u : batch) list.push_back({{"id", u.id}, {"pose", pose_to_json(u.pose)}});
    return {{"type", "update_poses"}, {"poses", list}};
}

}  // namespace livewarp::protocol
