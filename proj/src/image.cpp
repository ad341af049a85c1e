#include "charfac/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>

namespace charfac {

Vec Image::to_unit_vector() const {
    Vec v(static_cast<Eigen::Index>(rgb.size()));
    for (std::size_t i = 0; i < rgb.size(); ++i) v[static_cast<Eigen::Index>(i)] = rgb[i] / 255.0;
    return v;
}

Image Image::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width || y0 + h > height) {
        throw Error("Image::crop: region outside image");
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        std::memcpy(out.rgb.data() + static_cast<std::size_t>(y) * w * 3, rgb.data() + (static_cast<std::size_t>(y0 + y) * width + x0) * 3, static_cast<std::size_t>(w) * 3);
    }
    return out;
}

Image Image::resized(int w, int h) const {
    if (empty() || w <= 0 || h <= 0) throw Error("Image::resized: empty image or target");
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy0 = y * height / h;
        const int sy1 = std::max(sy0 + 1, (y + 1) * height / h);
        for (int x = 0; x < w; ++x) {
            const int sx0 = x * width / w;
            const int sx1 = std::max(sx0 + 1, (x + 1) * width / w);
            for (int c = 0; c < 3; ++c) {
                int acc = 0;
                for (int sy = sy0; sy < sy1; ++sy)
                    for (int sx = sx0; sx < sx1; ++sx) acc += at(sx, sy, c);
                const int n = (sy1 - sy0) * (sx1 - sx0);
                out.at(x, y, c) = static_cast<std::uint8_t>((acc + n / 2) / n);
            }
        }
    }
    return out;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(img.width);
    desc.height = static_cast<png_uint_32>(img.height);
    desc.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&desc, path.c_str(), 0, img.rgb.data(), 0, nullptr)) {
        throw Error("write_png " + path.string() + ": " + desc.message);
    }
}

Image read_png(const std::filesystem::path& path) {
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&desc, path.c_str())) {
        throw Error("read_png " + path.string() + ": " + desc.message);
    }
    desc.format = PNG_FORMAT_RGB;
    Image img(static_cast<int>(desc.width), static_cast<int>(desc.height));
    if (!png_image_finish_read(&desc, nullptr, img.rgb.data(), 0, nullptr)) {
        png_image_free(&desc);
        throw Error("read_png " + path.string() + ": " + desc.message);
    }
    return img;
}

}  // namespace charfac
