#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "ddqa/error.hpp"
#include "ddqa/metrics.hpp"
#include "ddqa/png_io.hpp"

namespace ddqa {

// Score-map file: 8-byte magic, width and height as little-endian u32, then
// width*height little-endian IEEE-754 float32 values in row-major order.
inline constexpr std::string_view kScoreMapMagic = "EIADSM01";
inline constexpr std::size_t kScoreMapHeaderSize = 16;

namespace detail {

inline std::uint32_t load_le32(const std::uint8_t* p) noexcept {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) noexcept {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

}  // namespace detail

inline ScoreMap decode_score_map(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kScoreMapHeaderSize ||
        std::memcmp(bytes.data(), kScoreMapMagic.data(), kScoreMapMagic.size()) != 0) {
        throw DecodeError("score map: missing EIADSM01 header");
    }
    ScoreMap map;
    map.width = detail::load_le32(bytes.data() + 8);
    map.height = detail::load_le32(bytes.data() + 12);
    const std::uint64_t n = static_cast<std::uint64_t>(map.width) * map.height;
    if (bytes.size() != kScoreMapHeaderSize + n * 4) {
        throw DecodeError(fmt::format("score map: {}x{} header needs {} payload bytes, file has {}", map.width,
                                      map.height, n * 4, bytes.size() - kScoreMapHeaderSize));
    }
    map.scores.resize(n);
    const std::uint8_t* p = bytes.data() + kScoreMapHeaderSize;
    for (std::size_t i = 0; i < n; ++i, p += 4) {
        map.scores[i] = std::bit_cast<float>(detail::load_le32(p));
    }
    return map;
}

inline std::vector<std::uint8_t> encode_score_map(const ScoreMap& map) {
    const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
    if (map.scores.size() != n) {
        throw DimensionError("score map buffer does not match its dimensions");
    }
    std::vector<std::uint8_t> out(kScoreMapHeaderSize + n * 4);
    std::memcpy(out.data(), kScoreMapMagic.data(), kScoreMapMagic.size());
    detail::store_le32(out.data() + 8, map.width);
    detail::store_le32(out.data() + 12, map.height);
    std::uint8_t* p = out.data() + kScoreMapHeaderSize;
    for (float v : map.scores) {
        detail::store_le32(p, std::bit_cast<std::uint32_t>(v));
        p += 4;
    }
    return out;
}

inline ScoreMap read_score_map(const std::filesystem::path& path) {
    try {
        return decode_score_map(png::read_file(path));
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what());
    }
}

inline void write_score_map(const std::filesystem::path& path, const ScoreMap& map) {
    png::write_file(path, encode_score_map(map));
}

}  // namespace ddqa
