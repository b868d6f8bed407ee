#include <doctest.h>

#include <cstring>
#include <string>

#include "latomo/error.hpp"
#include "latomo/wire.hpp"
#include "support.hpp"

using namespace latomo;
using namespace latomo::wire;

namespace {

std::vector<std::uint8_t> golden(const std::string& name) {
    return testing::read_bytes(std::filesystem::path(GOLDEN_DIR) / name);
}

std::vector<float> iota(int n, float start, float step) {
    std::vector<float> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = start + step * static_cast<float>(i);
    return v;
}

Header dims_header(Kind k, int d, int h, int w) {
    Header hd;
    hd.kind = k;
    hd.depth = d;
    hd.height = h;
    hd.width = w;
    return hd;
}

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("encoder reproduces the golden frames byte for byte") {
    Message hello{dims_header(Kind::hello, 40, 128, 128), {}};
    CHECK(encode(hello) == golden("hello_request.bin"));

    Message cond{dims_header(Kind::predict, 2, 2, 3), iota(12, -1.0f, 0.25f)};
    cond.header.t = 0.9795918367346939;
    cond.header.theta_deg = 10;
    cond.header.dtheta_deg = 1;
    cond.header.has_condition = true;
    const auto c = iota(12, 0.5f, 1.0f);
    cond.payload.insert(cond.payload.end(), c.begin(), c.end());
    CHECK(encode(cond) == golden("predict_request_cond.bin"));

    Message uncond{dims_header(Kind::predict, 2, 2, 3), iota(12, -1.0f, 0.25f)};
    uncond.header.t = 0.5;
    uncond.header.theta_deg = 8;
    uncond.header.dtheta_deg = 2;
    CHECK(encode(uncond) == golden("predict_request_uncond.bin"));

    // -0.125 * 0 is negative zero, as in the reference encoder.
    Message resp{dims_header(Kind::predict, 2, 2, 3), {}};
    for (int i = 0; i < 12; ++i) resp.payload.push_back(-0.125f * static_cast<float>(i));
    CHECK(encode(resp) == golden("predict_response.bin"));

    CHECK(encode(Message{dims_header(Kind::bye, 0, 0, 0), {}}) == golden("bye.bin"));
    Message err{dims_header(Kind::error, 0, 0, 0), {}};
    err.header.message = "model exploded";
    CHECK(encode(err) == golden("error.bin"));
}

TEST_CASE("decoder reads the golden frames") {
    const auto m = decode(golden("predict_request_cond.bin"), Direction::request);
    CHECK(m.header.kind == Kind::predict);
    CHECK(m.header.t == 0.9795918367346939);
    CHECK(m.header.has_condition);
    CHECK(m.header.depth == 2);
    CHECK(m.header.width == 3);
    REQUIRE(m.payload.size() == 24);
    CHECK(m.payload[0] == -1.0f);
    CHECK(m.payload[12] == 0.5f);
    const auto r = decode(golden("predict_response.bin"), Direction::response);
    REQUIRE(r.payload.size() == 12);
    CHECK(r.payload[11] == -1.375f);
    CHECK(decode(golden("error.bin"), Direction::response).header.message == "model exploded");
}

TEST_CASE("encode and decode round trip") {
    Message m{dims_header(Kind::predict, 3, 1, 2), {1.5f, -2.0f, 1e-30f, 3.4e38f, 0.0f, -0.0f}};
    m.header.t = 0.123456789;
    m.header.theta_deg = -7.5;
    m.header.dtheta_deg = 0.5;
    const auto back = decode(encode(m), Direction::response);
    CHECK(back.header == m.header);
    CHECK(std::memcmp(back.payload.data(), m.payload.data(), 24) == 0);
}

TEST_CASE("payload sizes follow kind, direction and conditioning") {
    Header h = dims_header(Kind::predict, 2, 3, 4);
    CHECK(payload_floats(h, Direction::request) == 24);
    h.has_condition = true;
    CHECK(payload_floats(h, Direction::request) == 48);
    CHECK(payload_floats(h, Direction::response) == 24);
    h.kind = Kind::hello;
    CHECK(payload_floats(h, Direction::request) == 0);
}

TEST_CASE("bad magic is reported at its offset") {
    auto bytes = golden("bye.bin");
    bytes[3] = 'X';
    try {
        decode(bytes, Direction::request);
        FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
        CHECK(e.offset() == 3);
    }
}

TEST_CASE("malformed frames are protocol errors") {
    auto truncated = golden("predict_response.bin");
    truncated.pop_back();
    CHECK_THROWS_AS(decode(truncated, Direction::response), ProtocolError);

    auto trailing = golden("bye.bin");
    trailing.push_back(0);
    CHECK_THROWS_AS(decode(trailing, Direction::response), ProtocolError);

    // A conditioned request carries twice the floats a response may hold.
    CHECK_THROWS_AS(decode(golden("predict_request_cond.bin"), Direction::response), ProtocolError);

    std::vector<std::uint8_t> huge(kMagic.begin(), kMagic.end());
    for (std::uint8_t b : {0xff, 0xff, 0xff, 0x7f}) huge.push_back(b);
    CHECK_THROWS_AS(decode(huge, Direction::request), ProtocolError);

    std::vector<std::uint8_t> empty(kMagic.begin(), kMagic.end());
    for (int i = 0; i < 4; ++i) empty.push_back(0);
    CHECK_THROWS_AS(decode(empty, Direction::request), ProtocolError);
}

TEST_CASE("header parsing: unknown keys are ignored, bad values rejected") {
    const Header h = parse_header("kind=predict\nfoo=bar\nD=1\nH=2\nW=3\nt=0.5\n", 0);
    CHECK(h.kind == Kind::predict);
    CHECK(h.t == 0.5);
    CHECK(h.width == 3);
    CHECK_THROWS_AS(parse_header("D=1\n", 0), ProtocolError);
    CHECK_THROWS_AS(parse_header("kind=launch\n", 0), ProtocolError);
    CHECK_THROWS_AS(parse_header("kind=predict\nt=abc\n", 0), ProtocolError);
    CHECK_THROWS_AS(parse_header("kind=predict\nhas_condition=2\n", 0), ProtocolError);
    CHECK_THROWS_AS(parse_header("kind=predict\nD=-1\n", 0), ProtocolError);
    CHECK_THROWS_AS(parse_header("kind=predict\nt=nan\n", 0), ProtocolError);
    try {
        parse_header("kind=hello\nbroken line\n", 100);
        FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
        CHECK(e.offset() == 111);
    }
}

TEST_CASE("stream reader advances the offset across messages") {
    auto stream = golden("hello_request.bin");
    const auto second = golden("predict_request_uncond.bin");
    stream.insert(stream.end(), second.begin(), second.end());
    std::size_t pos = 0;
    auto reader = [&](std::uint8_t* dst, std::size_t n) {
        if (stream.size() - pos < n) throw ProtocolError("eof", pos);
        std::memcpy(dst, stream.data() + pos, n);
        pos += n;
    };
    std::uint64_t offset = 0;
    CHECK(read_message(reader, Direction::request, offset).header.kind == Kind::hello);
    CHECK(offset == golden("hello_request.bin").size());
    const auto m = read_message(reader, Direction::request, offset);
    CHECK(m.payload.size() == 12);
    CHECK(offset == stream.size());
}

}
