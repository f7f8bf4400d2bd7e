#pragma once

#include "lens/imagecore.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lens {

using Bytes = std::vector<std::uint8_t>;

/// automatic stores 8-bit gray when every pixel has R == G == B (lossless), else RGB/RGBA.
enum class PngColor { automatic, color };

/// Decodes any PNG into 8-bit RGB, or RGBA when the file carries transparency.
RasterImage decode_png(std::span<const std::uint8_t> bytes);

/// Encodes deterministically (fixed compression settings, no timestamps).
Bytes encode_png(const RasterImage& image, PngColor color = PngColor::automatic);

/// Baseline or progressive JPEG (gray, RGB or CMYK) to RGB.
RasterImage decode_jpeg(std::span<const std::uint8_t> bytes);

struct ImageHeader {
    int width = 0;
    int height = 0;
};

/// Reads dimensions from the PNG IHDR chunk or JPEG SOF marker without decoding pixels.
std::optional<ImageHeader> probe_image(std::span<const std::uint8_t> bytes);

RasterImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RasterImage& image, PngColor color = PngColor::automatic);

Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over @p path.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// zlib (RFC 1950) stream helpers.
Bytes zlib_compress(std::span<const std::uint8_t> bytes, int level = 9);
Bytes zlib_decompress(std::span<const std::uint8_t> bytes);

} // namespace lens
