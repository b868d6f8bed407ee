#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace latomo::bytes {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void append_f32le(std::vector<std::uint8_t>& out, std::span<const float> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * 4);
    std::uint8_t* dst = out.data() + start;
    for (float f : values) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        dst[0] = static_cast<std::uint8_t>(bits);
        dst[1] = static_cast<std::uint8_t>(bits >> 8);
        dst[2] = static_cast<std::uint8_t>(bits >> 16);
        dst[3] = static_cast<std::uint8_t>(bits >> 24);
        dst += 4;
    }
}

inline void read_f32le(const std::uint8_t* src, std::span<float> out) {
    for (auto& f : out) {
        f = std::bit_cast<float>(get_u32le(src));
        src += 4;
    }
}

}  // namespace latomo::bytes
