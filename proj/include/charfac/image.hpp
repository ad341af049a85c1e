#pragma once

#include "charfac/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace charfac {

/// 8-bit interleaved RGB image.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool empty() const { return rgb.empty(); }
    bool operator==(const Image&) const = default;

    /// Channel values scaled to [0, 1], row-major, channel-interleaved.
    Vec to_unit_vector() const;
    Image crop(int x0, int y0, int w, int h) const;
    /// Box-filter resize.
    Image resized(int w, int h) const;
};

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace charfac
