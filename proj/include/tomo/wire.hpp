#pragma once

// Binary wire format: length-prefixed messages and the compact slice-feature
// payload exchanged between agents. All integers and floats little-endian.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/features.hpp"
#include "tomo/tomography.hpp"

namespace tomo::wire {

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr char kHelloMagic[4] = {'T', 'M', 'H', 'I'};
inline constexpr char kPayloadMagic[4] = {'T', 'M', 'S', 'F'};
inline constexpr std::uint32_t kMaxMessageBytes = 256u * 1024u * 1024u;
inline constexpr std::uint32_t kMaxEntries = 1u << 20;
inline constexpr std::uint32_t kMaxFeaturesPerEntry = 1u << 20;

enum class MessageTag : std::uint8_t {
    Hello = 1,
    Slices = 2,
    Result = 3,
    Error = 4,
};

// [tag u8][length u32][body]
inline std::vector<std::uint8_t> encode_message(MessageTag tag,
                                                const std::vector<std::uint8_t>& body) {
    std::vector<std::uint8_t> out;
    out.reserve(body.size() + 5);
    out.push_back(static_cast<std::uint8_t>(tag));
    le::put_u32(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

struct Hello {
    std::uint16_t version = kProtocolVersion;
    std::uint32_t agent_id = 0;
    double grid_size = 0.0;
};

inline std::vector<std::uint8_t> encode_hello(const Hello& h) {
    std::vector<std::uint8_t> body;
    body.reserve(18);
    body.insert(body.end(), kHelloMagic, kHelloMagic + 4);
    le::put_u16(body, h.version);
    le::put_u32(body, h.agent_id);
    le::put_f64(body, h.grid_size);
    return body;
}

inline Hello decode_hello(const std::uint8_t* data, std::size_t size) {
    if (size < 18) throw TruncatedPayload("hello: body too short");
    if (std::memcmp(data, kHelloMagic, 4) != 0) throw CorruptHeader("hello: bad magic");
    Hello h;
    h.version = le::get_u16(data + 4);
    if (h.version != kProtocolVersion) {
        throw VersionMismatch("hello: protocol version " + std::to_string(h.version) +
                              ", expected " + std::to_string(kProtocolVersion));
    }
    h.agent_id = le::get_u32(data + 6);
    h.grid_size = le::get_f64(data + 10);
    if (!std::isfinite(h.grid_size) || !(h.grid_size > 0.0)) {
        throw CorruptHeader("hello: invalid grid size");
    }
    return h;
}

struct SlicePayload {
    std::uint16_t version = kProtocolVersion;
    std::uint32_t agent_id = 0;
    slicing::SliceSet set;  // images empty; features and heights only
};

// Payload layout:
//   "TMSF" version:u16 agent_id:u32 grid:f64 z_min:f64 entries:u32
//   per entry:  height:f32 count:u32
//   per feature: mx:f32 my:f32 descriptor:16B
// Keypoint orientation is consumed when the descriptor is steered and is
// dead weight afterwards, so it does not travel.
inline std::vector<std::uint8_t> serialize_payload(const slicing::SliceSet& set,
                                                   std::uint32_t agent_id) {
    std::vector<std::uint8_t> out;
    std::size_t features = 0;
    for (const auto& e : set.entries) features += e.features.size();
    out.reserve(30 + set.entries.size() * 8 + features * 24);
    out.insert(out.end(), kPayloadMagic, kPayloadMagic + 4);
    le::put_u16(out, kProtocolVersion);
    le::put_u32(out, agent_id);
    le::put_f64(out, set.grid_size);
    le::put_f64(out, set.z_min);
    le::put_u32(out, static_cast<std::uint32_t>(set.entries.size()));
    for (const auto& e : set.entries) {
        le::put_f32(out, static_cast<float>(e.height));
        le::put_u32(out, static_cast<std::uint32_t>(e.features.size()));
        for (const features::Feature& f : e.features) {
            le::put_f32(out, f.mx);
            le::put_f32(out, f.my);
            le::put_u64(out, f.desc.words[0]);
            le::put_u64(out, f.desc.words[1]);
        }
    }
    return out;
}

// Strict inverse of serialize_payload. Entry heights are reconstructed as
// z_min + k*grid from the rounded wire height, so they are bit-identical to
// the sender's doubles; trailing bytes and non-increasing heights are
// rejected.
inline SlicePayload deserialize_payload(const std::uint8_t* data, std::size_t size) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > size) throw TruncatedPayload("payload: truncated at byte " +
                                                   std::to_string(pos));
    };
    need(30);
    if (std::memcmp(data, kPayloadMagic, 4) != 0) throw CorruptHeader("payload: bad magic");
    SlicePayload p;
    p.version = le::get_u16(data + 4);
    if (p.version != kProtocolVersion) {
        throw VersionMismatch("payload: protocol version " + std::to_string(p.version) +
                              ", expected " + std::to_string(kProtocolVersion));
    }
    p.agent_id = le::get_u32(data + 6);
    p.set.grid_size = le::get_f64(data + 10);
    p.set.z_min = le::get_f64(data + 18);
    if (!std::isfinite(p.set.grid_size) || !(p.set.grid_size > 0.0)) {
        throw CorruptHeader("payload: invalid grid size");
    }
    if (!std::isfinite(p.set.z_min)) throw CorruptHeader("payload: invalid z_min");
    const std::uint32_t entries = le::get_u32(data + 26);
    if (entries > kMaxEntries) throw CorruptHeader("payload: entry count too large");
    pos = 30;
    const double g = p.set.grid_size;
    p.set.entries.reserve(entries);
    double prev_height = -std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < entries; ++i) {
        need(8);
        const float h32 = le::get_f32(data + pos);
        const std::uint32_t count = le::get_u32(data + pos + 4);
        pos += 8;
        if (!std::isfinite(h32)) throw CorruptHeader("payload: invalid slice height");
        if (count > kMaxFeaturesPerEntry) {
            throw CorruptHeader("payload: feature count too large");
        }
        const auto k = static_cast<std::int64_t>(
            std::llround((static_cast<double>(h32) - p.set.z_min) / g));
        const double height = p.set.z_min + static_cast<double>(k) * g;
        if (std::abs(height - static_cast<double>(h32)) > 0.25 * g) {
            throw CorruptHeader("payload: slice height off the height grid");
        }
        if (!(height > prev_height)) {
            throw CorruptHeader("payload: slice heights not strictly increasing");
        }
        prev_height = height;
        slicing::SliceEntry e;
        e.height = height;
        e.features.reserve(count);
        for (std::uint32_t f = 0; f < count; ++f) {
            need(24);
            features::Feature feat;
            feat.mx = le::get_f32(data + pos);
            feat.my = le::get_f32(data + pos + 4);
            feat.desc.words[0] = le::get_u64(data + pos + 8);
            feat.desc.words[1] = le::get_u64(data + pos + 16);
            pos += 24;
            e.features.push_back(feat);
        }
        p.set.entries.push_back(std::move(e));
    }
    if (pos != size) throw CorruptHeader("payload: trailing bytes");
    return p;
}

inline SlicePayload deserialize_payload(const std::vector<std::uint8_t>& data) {
    return deserialize_payload(data.data(), data.size());
}

}  // namespace tomo::wire
