#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace s2p {

struct ImageRgb {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

    ImageRgb() = default;
    ImageRgb(int w, int h, std::array<std::uint8_t, 3> fill = {255, 255, 255});

    std::array<std::uint8_t, 3> at(int x, int y) const {
        const std::size_t i = 3 * (std::size_t(y) * width + x);
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    void set(int x, int y, std::array<std::uint8_t, 3> rgb) {
        const std::size_t i = 3 * (std::size_t(y) * width + x);
        pixels[i] = rgb[0];
        pixels[i + 1] = rgb[1];
        pixels[i + 2] = rgb[2];
    }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    /// Hash of the raw pixel content (not the encoded file).
    std::uint64_t content_hash() const;
};

/// 8-bit RGB PNG with fixed encoder settings, so identical pixels yield
/// identical bytes.
std::string encode_png(const ImageRgb& image);
void write_png(const std::filesystem::path& path, const ImageRgb& image);
ImageRgb decode_png(const std::string& bytes);
ImageRgb read_png(const std::filesystem::path& path);

}  // namespace s2p
