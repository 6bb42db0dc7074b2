#include "scene2prompt/image.hpp"

#include <cstring>
#include <stdexcept>

#include <zlib.h>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(char((v >> 24) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char(v & 0xff));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32_be(out, std::uint32_t(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const auto crc =
        crc32(0, reinterpret_cast<const Bytef*>(body.data()), uInt(body.size()));
    put_u32_be(out, std::uint32_t(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

ImageRgb::ImageRgb(int w, int h, std::array<std::uint8_t, 3> fill)
    : width(w), height(h), pixels(std::size_t(w) * h * 3) {
    if (w <= 0 || h <= 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

std::uint64_t ImageRgb::content_hash() const {
    return fnv1a64(pixels.data(), pixels.size());
}

std::string encode_png(const ImageRgb& image) {
    const std::size_t row = std::size_t(image.width) * 3;
    std::string raw;
    raw.reserve((row + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back('\0');  // filter: none
        raw.append(reinterpret_cast<const char*>(image.pixels.data() + y * row), row);
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::string compressed(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                  reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()),
                  6) != Z_OK) {
        throw std::runtime_error("png: deflate failed");
    }
    compressed.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32_be(ihdr, std::uint32_t(image.width));
    put_u32_be(ihdr, std::uint32_t(image.height));
    ihdr += '\x08';  // bit depth
    ihdr += '\x02';  // truecolor
    ihdr += '\x00';  // compression
    ihdr += '\x00';  // filter
    ihdr += '\x00';  // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", "");
    return out;
}

void write_png(const std::filesystem::path& path, const ImageRgb& image) {
    write_if_changed(path, encode_png(image));
}

ImageRgb decode_png(const std::string& bytes) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
    if (bytes.size() < 8 || std::memcmp(p, "\x89PNG\r\n\x1a\n", 8) != 0) {
        throw std::runtime_error("png: bad signature");
    }
    std::size_t pos = 8;
    int width = 0;
    int height = 0;
    std::string idat;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = get_u32_be(p + pos);
        const std::string type(bytes, pos + 4, 4);
        if (pos + 12 + len > bytes.size()) {
            throw std::runtime_error("png: truncated chunk");
        }
        const char* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            width = int(get_u32_be(reinterpret_cast<const std::uint8_t*>(data)));
            height = int(get_u32_be(reinterpret_cast<const std::uint8_t*>(data) + 4));
            if (data[8] != 8 || data[9] != 2 || data[12] != 0) {
                throw std::runtime_error("png: only 8-bit non-interlaced RGB supported");
            }
        } else if (type == "IDAT") {
            idat.append(data, len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) {
        throw std::runtime_error("png: missing IHDR");
    }
    const std::size_t row = std::size_t(width) * 3;
    std::string raw((row + 1) * height, '\0');
    uLongf raw_len = uLongf(raw.size());
    if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &raw_len,
                   reinterpret_cast<const Bytef*>(idat.data()),
                   uLong(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw std::runtime_error("png: inflate failed");
    }

    ImageRgb img(width, height);
    std::vector<std::uint8_t> prev(row, 0);
    for (int y = 0; y < height; ++y) {
        const auto* src = reinterpret_cast<const std::uint8_t*>(raw.data()) +
                          std::size_t(y) * (row + 1);
        const std::uint8_t filter = src[0];
        auto* dst = img.pixels.data() + std::size_t(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            const int x = src[1 + i];
            const int a = i >= 3 ? dst[i - 3] : 0;
            const int b = prev[i];
            const int c = i >= 3 ? prev[i - 3] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + paeth(a, b, c); break;
                default: throw std::runtime_error("png: unknown filter");
            }
            dst[i] = std::uint8_t(v & 0xff);
        }
        std::memcpy(prev.data(), dst, row);
    }
    return img;
}

ImageRgb read_png(const std::filesystem::path& path) {
    return decode_png(read_file(path));
}

}  // namespace s2p
