#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "previewflow/grid.hpp"

namespace pflow::io {

// Raw grids: `<stem>.f32` holds little-endian float32 values in (y, x, c)
// order and `<stem>.json` holds {"h","w","d","t"}.
void write_grid(const std::filesystem::path& stem, const LatentGrid& grid);
LatentGrid read_grid(const std::filesystem::path& stem);

void write_f32_le(std::ostream& os, std::span<const float> values);
std::vector<float> read_f32_le(std::istream& is, std::size_t count);

/// [0,1] -> [0,255] with clamping and round-half-away-from-zero.
std::uint8_t to_byte(float v);

/// Writes an 8-bit image of a 1- or 3-channel grid already in [0,1] image
/// space. Uses PNG when built with libpng, otherwise PPM/PGM; returns the
/// path actually written.
std::filesystem::path write_image(const std::filesystem::path& stem, const LatentGrid& image);

/// Writes `text` to `path` via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace pflow::io
