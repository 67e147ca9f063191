#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <png.h>

#include "ddqa/error.hpp"

namespace ddqa::png {

/// An 8-bit single-channel raster, row-major.
struct GrayImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;
};

namespace detail {

class ImageGuard {
public:
    explicit ImageGuard(png_image& image) : image_(image) {}
    ~ImageGuard() { png_image_free(&image_); }
    ImageGuard(const ImageGuard&) = delete;
    ImageGuard& operator=(const ImageGuard&) = delete;

private:
    png_image& image_;
};

inline std::string message_of(const png_image& image) {
    return image.message[0] != '\0' ? std::string(image.message) : std::string("unknown libpng error");
}

}  // namespace detail

/// Decodes a single-channel PNG. Colour or alpha images are rejected rather
/// than converted, and so are 16-bit images; 1/2/4-bit greyscale is widened to 8 bits.
inline GrayImage decode_gray8(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    detail::ImageGuard guard(image);

    if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
        throw DecodeError("png decode error: " + detail::message_of(image));
    }
    if ((image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) != 0) {
        throw DecodeError("multi-channel image: masks must be single-channel greyscale");
    }
    if ((image.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
        throw DecodeError("unsupported bit depth: masks must be 8-bit");
    }
    image.format = PNG_FORMAT_GRAY;

    GrayImage out;
    out.width = image.width;
    out.height = image.height;
    out.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
    if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
        throw DecodeError("png decode error: " + detail::message_of(image));
    }
    return out;
}

inline std::vector<std::uint8_t> encode_gray8(const GrayImage& img) {
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw DimensionError("encode_gray8: pixel buffer does not match width*height");
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = img.width;
    image.height = img.height;
    image.format = PNG_FORMAT_GRAY;
    detail::ImageGuard guard(image);

    png_alloc_size_t size = 0;
    if (png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr) == 0) {
        throw Error("png encode error: " + detail::message_of(image));
    }
    std::vector<std::uint8_t> out(size);
    if (png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr) == 0) {
        throw Error("png encode error: " + detail::message_of(image));
    }
    out.resize(size);
    return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed for " + path.string());
    }
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace ddqa::png
