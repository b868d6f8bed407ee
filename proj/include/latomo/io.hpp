#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "latomo/types.hpp"

namespace latomo {

using Metadata = std::map<std::string, std::string>;

/// TDVOL1: text header ("TDVOL1", D=, H=, W=, dtype=f32le, meta.<key>=<value>
/// lines, "END"), then 4*D*H*W bytes of little-endian float32, depth-major.
void save_volume(const Volume& v, const std::filesystem::path& path, const Metadata& meta = {});
Volume load_volume(const std::filesystem::path& path, Metadata* meta = nullptr);

/// TDTLT1: as TDVOL1 with T=, H=, W= and the angle spec (range=, step=,
/// center=) in the header, frames tilt-major.
void save_tilts(const TiltSeries& y, const std::filesystem::path& path, const Metadata& meta = {});
TiltSeries load_tilts(const std::filesystem::path& path, Metadata* meta = nullptr);

enum class FileKind { volume, tilts, unknown };
/// Inspects the magic only.
FileKind detect_file_kind(const std::filesystem::path& path);

enum class SliceNormalization { global, per_slice };

/// Writes one 8-bit grayscale PNG per slice along axis (0, 1 or 2), named
/// <prefix>_<index:04>.png. A degenerate value range maps to mid-gray.
std::vector<std::filesystem::path> export_slices(const Volume& v, int axis,
                                                 const std::string& path_prefix,
                                                 SliceNormalization normalize);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png(const std::filesystem::path& path);

}  // namespace latomo
