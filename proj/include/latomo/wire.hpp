#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latomo::wire {

/// Framing of the external denoiser protocol. Every message is
///
///   "TDNZ0001" | u32le header length | UTF-8 header | f32le payload
///
/// The header is newline-separated key=value pairs. Payload length follows
/// from the header: a predict request carries x_t then the condition (when
/// has_condition=1); a predict response carries epsilon; hello, bye and error
/// carry nothing.
inline constexpr std::string_view kMagic = "TDNZ0001";
inline constexpr std::uint32_t kMaxHeaderBytes = 64 * 1024;

enum class Kind { hello, predict, bye, error };

struct Header {
    Kind kind = Kind::hello;
    double t = 0.0;
    double theta_deg = 0.0;
    double dtheta_deg = 0.0;
    bool has_condition = false;
    int depth = 0;
    int height = 0;
    int width = 0;
    std::string message;

    bool operator==(const Header&) const = default;
};

struct Message {
    Header header;
    std::vector<float> payload;
};

enum class Direction { request, response };

std::string_view kind_name(Kind kind);

std::string encode_header(const Header& header);
/// Throws ProtocolError naming base_offset plus the position of the bad field.
Header parse_header(std::string_view text, std::uint64_t base_offset);

/// Number of payload floats implied by a header.
std::size_t payload_floats(const Header& header, Direction dir);

std::vector<std::uint8_t> encode(const Message& msg);

/// Reads one message through read_exact(buffer, n) which must fill exactly n
/// bytes or throw. offset tracks the absolute stream position and is advanced.
Message read_message(const std::function<void(std::uint8_t*, std::size_t)>& read_exact,
                     Direction dir, std::uint64_t& offset);

/// Decodes exactly one message occupying the whole buffer.
Message decode(std::span<const std::uint8_t> bytes, Direction dir);

}  // namespace latomo::wire
