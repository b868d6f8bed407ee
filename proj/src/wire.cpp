#include "latomo/wire.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

#include "bytes.hpp"
#include "latomo/error.hpp"

namespace latomo::wire {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Kind parse_kind(std::string_view v, std::uint64_t offset) {
    if (v == "hello") return Kind::hello;
    if (v == "predict") return Kind::predict;
    if (v == "bye") return Kind::bye;
    if (v == "error") return Kind::error;
    throw ProtocolError("unknown message kind '" + std::string(v) + "'", offset);
}

template <typename T>
T parse_number(std::string_view v, std::string_view key, std::uint64_t offset) {
    T out{};
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ProtocolError("malformed value for header field '" + std::string(key) + "'", offset);
    }
    return out;
}

}  // namespace

std::string_view kind_name(Kind kind) {
    switch (kind) {
        case Kind::hello: return "hello";
        case Kind::predict: return "predict";
        case Kind::bye: return "bye";
        case Kind::error: return "error";
    }
    return "?";
}

std::string encode_header(const Header& h) {
    std::string out;
    out += "kind=";
    out += kind_name(h.kind);
    out += "\nt=" + format_double(h.t);
    out += "\ntheta_deg=" + format_double(h.theta_deg);
    out += "\ndtheta_deg=" + format_double(h.dtheta_deg);
    out += "\nhas_condition=";
    out += h.has_condition ? "1" : "0";
    out += "\nD=" + std::to_string(h.depth);
    out += "\nH=" + std::to_string(h.height);
    out += "\nW=" + std::to_string(h.width);
    if (!h.message.empty()) {
        std::string msg = h.message;
        for (auto& c : msg) if (c == '\n') c = ' ';
        out += "\nmessage=" + msg;
    }
    out += "\n";
    return out;
}

Header parse_header(std::string_view text, std::uint64_t base_offset) {
    Header h;
    bool saw_kind = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        const std::uint64_t at = base_offset + pos;
        if (!line.empty()) {
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ProtocolError("header line without '='", at);
            }
            const std::string_view key = line.substr(0, eq);
            const std::string_view val = line.substr(eq + 1);
            if (key == "kind") {
                h.kind = parse_kind(val, at);
                saw_kind = true;
            } else if (key == "t") {
                h.t = parse_number<double>(val, key, at);
            } else if (key == "theta_deg") {
                h.theta_deg = parse_number<double>(val, key, at);
            } else if (key == "dtheta_deg") {
                h.dtheta_deg = parse_number<double>(val, key, at);
            } else if (key == "has_condition") {
                const int v = parse_number<int>(val, key, at);
                if (v != 0 && v != 1) throw ProtocolError("has_condition must be 0 or 1", at);
                h.has_condition = v == 1;
            } else if (key == "D") {
                h.depth = parse_number<int>(val, key, at);
            } else if (key == "H") {
                h.height = parse_number<int>(val, key, at);
            } else if (key == "W") {
                h.width = parse_number<int>(val, key, at);
            } else if (key == "message") {
                h.message = std::string(val);
            }
            // Unknown keys are ignored.
        }
        pos = eol + 1;
    }
    if (!saw_kind) throw ProtocolError("header has no kind field", base_offset);
    if (h.depth < 0 || h.height < 0 || h.width < 0) {
        throw ProtocolError("negative dimension in header", base_offset);
    }
    const double n = static_cast<double>(h.depth) * h.height * h.width;
    if (n > static_cast<double>(std::size_t{1} << 31)) {
        throw ProtocolError("header dimensions overflow", base_offset);
    }
    if (!std::isfinite(h.t) || !std::isfinite(h.theta_deg) || !std::isfinite(h.dtheta_deg)) {
        throw ProtocolError("non-finite scalar in header", base_offset);
    }
    return h;
}

std::size_t payload_floats(const Header& h, Direction dir) {
    if (h.kind != Kind::predict) return 0;
    const std::size_t n = static_cast<std::size_t>(h.depth) * static_cast<std::size_t>(h.height) *
                          static_cast<std::size_t>(h.width);
    if (dir == Direction::request && h.has_condition) return 2 * n;
    return n;
}

std::vector<std::uint8_t> encode(const Message& msg) {
    const std::string header = encode_header(msg.header);
    std::vector<std::uint8_t> out;
    out.reserve(kMagic.size() + 4 + header.size() + msg.payload.size() * 4);
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    bytes::put_u32le(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    bytes::append_f32le(out, msg.payload);
    return out;
}

Message read_message(const std::function<void(std::uint8_t*, std::size_t)>& read_exact,
                     Direction dir, std::uint64_t& offset) {
    const std::uint64_t start = offset;
    std::uint8_t prefix[12];
    read_exact(prefix, sizeof(prefix));
    offset += sizeof(prefix);
    for (std::size_t i = 0; i < kMagic.size(); ++i) {
        if (prefix[i] != static_cast<std::uint8_t>(kMagic[i])) {
            throw ProtocolError("bad magic, expected TDNZ0001", start + i);
        }
    }
    const std::uint32_t header_len = bytes::get_u32le(prefix + 8);
    if (header_len == 0 || header_len > kMaxHeaderBytes) {
        throw ProtocolError("header length " + std::to_string(header_len) + " out of range",
                            start + 8);
    }
    std::string text(header_len, '\0');
    read_exact(reinterpret_cast<std::uint8_t*>(text.data()), header_len);
    const std::uint64_t header_at = offset;
    offset += header_len;
    Message msg{parse_header(text, header_at), {}};
    const std::size_t n = payload_floats(msg.header, dir);
    if (msg.header.kind == Kind::predict && n == 0) {
        throw ProtocolError("predict message with empty shape", header_at);
    }
    msg.payload.resize(n);
    if (n > 0) {
        std::vector<std::uint8_t> raw(n * 4);
        read_exact(raw.data(), raw.size());
        offset += raw.size();
        bytes::read_f32le(raw.data(), msg.payload);
    }
    return msg;
}

Message decode(std::span<const std::uint8_t> buf, Direction dir) {
    std::size_t pos = 0;
    std::uint64_t offset = 0;
    auto reader = [&](std::uint8_t* dst, std::size_t n) {
        if (buf.size() - pos < n) {
            throw ProtocolError("message truncated", buf.size());
        }
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    };
    Message msg = read_message(reader, dir, offset);
    if (pos != buf.size()) throw ProtocolError("trailing bytes after message", pos);
    return msg;
}

}  // namespace latomo::wire
