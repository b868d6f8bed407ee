#include "latomo/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "bytes.hpp"
#include "latomo/error.hpp"

namespace latomo {

namespace {

constexpr std::size_t kMaxHeaderBytes = 64 * 1024;
constexpr std::string_view kVolumeMagic = "TDVOL1";
constexpr std::string_view kTiltMagic = "TDTLT1";

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_meta(std::string& header, const Metadata& meta) {
    for (const auto& [key, value] : meta) {
        if (key.empty() || key.find_first_of("=\n") != std::string::npos ||
            value.find('\n') != std::string::npos) {
            throw ValidationError("metadata key/value may not contain '=' or newlines: " + key);
        }
        header += "meta." + key + "=" + value + "\n";
    }
}

void write_file(const std::filesystem::path& path, const std::string& header,
                std::span<const float> payload) {
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(header.size() + payload.size() * 4);
    bytes::append_f32le(bytes, payload);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeError("failed writing " + path.string());
}

struct HeaderLine {
    std::string key;
    std::string value;
    std::uint64_t offset;
};

struct ParsedHeader {
    std::string magic;
    std::vector<HeaderLine> lines;
    std::uint64_t payload_offset = 0;
    std::uint64_t file_size = 0;
};

ParsedHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
    ParsedHeader ph;
    std::error_code ec;
    ph.file_size = std::filesystem::file_size(path, ec);
    if (ec) throw RuntimeError("cannot stat " + path.string() + ": " + ec.message());

    std::uint64_t offset = 0;
    std::string line;
    bool first = true;
    for (;;) {
        line.clear();
        char c;
        bool got_newline = false;
        while (in.get(c)) {
            if (c == '\n') {
                got_newline = true;
                break;
            }
            line.push_back(c);
            if (offset + line.size() > kMaxHeaderBytes) {
                throw FormatError("header exceeds " + std::to_string(kMaxHeaderBytes) + " bytes",
                                  offset + line.size());
            }
        }
        const std::uint64_t line_offset = offset;
        if (!got_newline) {
            if (first) throw FormatError("bad magic: file is empty or not a TD file", 0);
            throw FormatError("header truncated before END line", line_offset + line.size());
        }
        offset += line.size() + 1;
        if (first) {
            if (line != kVolumeMagic && line != kTiltMagic) {
                throw FormatError("bad magic '" + line.substr(0, 16) + "'", 0);
            }
            ph.magic = line;
            first = false;
            continue;
        }
        if (line == "END") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw FormatError("malformed header line '" + line + "'", line_offset);
        }
        ph.lines.push_back({line.substr(0, eq), line.substr(eq + 1), line_offset});
    }
    ph.payload_offset = offset;
    return ph;
}

const HeaderLine& require(const ParsedHeader& ph, const std::string& key) {
    for (const auto& l : ph.lines) {
        if (l.key == key) return l;
    }
    throw FormatError("header lacks required field '" + key + "'", ph.payload_offset);
}

int parse_dim(const HeaderLine& l) {
    long long v = 0;
    auto res = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
    if (res.ec == std::errc::result_out_of_range) {
        throw FormatError("dimension " + l.key + " overflows", l.offset);
    }
    if (res.ec != std::errc() || res.ptr != l.value.data() + l.value.size()) {
        throw FormatError("dimension " + l.key + " is not an integer", l.offset);
    }
    if (v <= 0) throw FormatError("dimension " + l.key + " must be positive, got " + l.value, l.offset);
    if (v > (1LL << 31) - 1) throw FormatError("dimension " + l.key + " overflows", l.offset);
    return static_cast<int>(v);
}

double parse_real(const HeaderLine& l) {
    double v = 0.0;
    auto res = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
    if (res.ec != std::errc() || res.ptr != l.value.data() + l.value.size()) {
        throw FormatError("field " + l.key + " is not a number", l.offset);
    }
    return v;
}

void check_dtype(const ParsedHeader& ph) {
    const auto& l = require(ph, "dtype");
    if (l.value != "f32le") {
        throw FormatError("unsupported dtype '" + l.value + "' (only f32le)", l.offset);
    }
}

Metadata collect_meta(const ParsedHeader& ph) {
    Metadata meta;
    for (const auto& l : ph.lines) {
        if (l.key.rfind("meta.", 0) == 0) meta[l.key.substr(5)] = l.value;
    }
    return meta;
}

std::vector<float> read_payload(std::ifstream& in, const ParsedHeader& ph, double n_floats) {
    const std::uint64_t available = ph.file_size - ph.payload_offset;
    const double expected_bytes = n_floats * 4.0;
    if (expected_bytes > static_cast<double>(std::uint64_t{1} << 40)) {
        throw FormatError("declared payload size overflows", ph.payload_offset);
    }
    const auto expected = static_cast<std::uint64_t>(expected_bytes);
    if (available < expected) {
        throw FormatError("payload truncated: expected " + std::to_string(expected) +
                              " bytes, file ends",
                          ph.file_size);
    }
    if (available > expected) {
        throw FormatError("trailing bytes after payload", ph.payload_offset + expected);
    }
    std::vector<std::uint8_t> raw(expected);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
    if (static_cast<std::uint64_t>(in.gcount()) != expected) {
        throw FormatError("payload truncated", ph.payload_offset + static_cast<std::uint64_t>(in.gcount()));
    }
    std::vector<float> values(expected / 4);
    bytes::read_f32le(raw.data(), values);
    return values;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open " + path.string());
    return in;
}

}  // namespace

void save_volume(const Volume& v, const std::filesystem::path& path, const Metadata& meta) {
    const Dims& d = v.dims();
    std::string header = std::string(kVolumeMagic) + "\n";
    header += "D=" + std::to_string(d.depth) + "\n";
    header += "H=" + std::to_string(d.height) + "\n";
    header += "W=" + std::to_string(d.width) + "\n";
    header += "dtype=f32le\n";
    write_meta(header, meta);
    header += "END\n";
    write_file(path, header, v.values());
}

Volume load_volume(const std::filesystem::path& path, Metadata* meta) {
    auto in = open_for_read(path);
    const ParsedHeader ph = read_header(in, path);
    if (ph.magic != kVolumeMagic) {
        throw FormatError("expected a TDVOL1 volume file, found " + ph.magic, 0);
    }
    check_dtype(ph);
    const Dims dims{parse_dim(require(ph, "D")), parse_dim(require(ph, "H")),
                    parse_dim(require(ph, "W"))};
    const double n = static_cast<double>(dims.depth) * dims.height * dims.width;
    if (n > static_cast<double>(std::size_t{1} << 31)) {
        throw FormatError("dimensions " + dims.str() + " overflow", require(ph, "D").offset);
    }
    auto values = read_payload(in, ph, n);
    if (meta) *meta = collect_meta(ph);
    try {
        return Volume(dims, std::move(values));
    } catch (const ValidationError& e) {
        throw FormatError(e.what(), ph.payload_offset);
    }
}

void save_tilts(const TiltSeries& y, const std::filesystem::path& path, const Metadata& meta) {
    std::string header = std::string(kTiltMagic) + "\n";
    header += "T=" + std::to_string(y.n_tilts()) + "\n";
    header += "H=" + std::to_string(y.height()) + "\n";
    header += "W=" + std::to_string(y.width()) + "\n";
    header += "range=" + fmt(y.angles().range_deg) + "\n";
    header += "step=" + fmt(y.angles().step_deg) + "\n";
    header += "center=" + fmt(y.angles().center_deg) + "\n";
    header += "dtype=f32le\n";
    write_meta(header, meta);
    header += "END\n";
    write_file(path, header, y.values());
}

TiltSeries load_tilts(const std::filesystem::path& path, Metadata* meta) {
    auto in = open_for_read(path);
    const ParsedHeader ph = read_header(in, path);
    if (ph.magic != kTiltMagic) {
        throw FormatError("expected a TDTLT1 tilt-series file, found " + ph.magic, 0);
    }
    check_dtype(ph);
    const auto& tl = require(ph, "T");
    const int T = parse_dim(tl);
    const int H = parse_dim(require(ph, "H"));
    const int W = parse_dim(require(ph, "W"));
    AngleSpec spec{parse_real(require(ph, "range")), parse_real(require(ph, "step")),
                   parse_real(require(ph, "center"))};
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw FormatError(e.what(), require(ph, "range").offset);
    }
    if (spec.count() != T) {
        throw FormatError("T=" + std::to_string(T) + " disagrees with the angle spec (" +
                              std::to_string(spec.count()) + " tilts)",
                          tl.offset);
    }
    const double n = static_cast<double>(T) * H * W;
    if (n > static_cast<double>(std::size_t{1} << 31)) {
        throw FormatError("dimensions overflow", tl.offset);
    }
    auto values = read_payload(in, ph, n);
    if (meta) *meta = collect_meta(ph);
    try {
        return TiltSeries(spec, H, W, std::move(values));
    } catch (const ValidationError& e) {
        throw FormatError(e.what(), ph.payload_offset);
    }
}

FileKind detect_file_kind(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return FileKind::unknown;
    char buf[7] = {};
    in.read(buf, 7);
    if (in.gcount() < 7 || buf[6] != '\n') return FileKind::unknown;
    const std::string_view magic(buf, 6);
    if (magic == kVolumeMagic) return FileKind::volume;
    if (magic == kTiltMagic) return FileKind::tilts;
    return FileKind::unknown;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ValidationError("invalid image for PNG export");
    }
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw RuntimeError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < image.height; ++r) {
        png_write_row(png, const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(r) * image.width]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw RuntimeError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeError("libpng initialisation failed");
    }
    GrayImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeError("libpng failed reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ValidationError("only 8-bit grayscale PNGs are supported: " + path.string());
    }
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int r = 0; r < img.height; ++r) {
        png_read_row(png, &img.pixels[static_cast<std::size_t>(r) * img.width], nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::vector<std::filesystem::path> export_slices(const Volume& v, int axis,
                                                 const std::string& path_prefix,
                                                 SliceNormalization normalize) {
    if (axis < 0 || axis > 2) throw ValidationError("slice axis must be 0, 1 or 2");
    const Dims& d = v.dims();
    const int n = axis == 0 ? d.depth : axis == 1 ? d.height : d.width;
    // Slice image rows/cols: axis 0 -> (H, W), axis 1 -> (D, W), axis 2 -> (D, H).
    const int rows = axis == 0 ? d.height : d.depth;
    const int cols = axis == 2 ? d.height : d.width;
    auto voxel = [&](int s, int r, int c) {
        if (axis == 0) return v.at(s, r, c);
        if (axis == 1) return v.at(r, s, c);
        return v.at(r, c, s);
    };
    auto range_of = [&](int s0, int s1) {
        float lo = voxel(s0, 0, 0), hi = lo;
        for (int s = s0; s < s1; ++s)
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    const float x = voxel(s, r, c);
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
        return std::pair{lo, hi};
    };
    const auto global = range_of(0, n);

    std::vector<std::filesystem::path> files;
    files.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const auto [lo, hi] = normalize == SliceNormalization::global ? global : range_of(s, s + 1);
        const double span = static_cast<double>(hi) - lo;
        GrayImage img{cols, rows, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols)};
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                std::uint8_t px = 128;
                if (span > 0.0) {
                    const double t = (voxel(s, r, c) - lo) / span;
                    px = static_cast<std::uint8_t>(std::clamp(std::lround(t * 255.0), 0L, 255L));
                }
                img.pixels[static_cast<std::size_t>(r) * cols + c] = px;
            }
        }
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "_%04d.png", s);
        std::filesystem::path file = path_prefix + suffix;
        write_png(file, img);
        files.push_back(std::move(file));
    }
    return files;
}

}  // namespace latomo
