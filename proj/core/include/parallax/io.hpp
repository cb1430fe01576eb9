#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "parallax/types.hpp"

namespace parallax::io {

/// 8-bit quantization used at every file boundary: round(v * 255).
std::uint8_t quantize8(float v);
/// 16-bit quantization: round(v * 65535), v clamped to [0, 1].
std::uint16_t quantize16(double v);

std::vector<std::uint8_t> encode_png8(const Raster<std::uint8_t>& raster);
std::vector<std::uint8_t> encode_png16(const Raster<std::uint16_t>& raster);
std::vector<std::uint8_t> encode_gray(const ImageGray& image);

/// Decodes any image format OpenCV understands into [0, 1] grayscale.
/// Throws Error("unreadable image") on failure.
ImageGray decode_gray(std::span<const std::uint8_t> bytes);
Raster<std::uint16_t> decode_png16(std::span<const std::uint8_t> bytes);
Raster<std::uint8_t> decode_png8(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

ImageGray read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const ImageGray& image);
/// Writes a 0/1 mask as 0/255.
void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace parallax::io
