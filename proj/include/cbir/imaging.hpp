#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cbir {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Decoded RGB raster, row-major. Channel values are bytes, so the [0, 255]
// range holds by construction.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, Rgb fill = {});
    RasterImage(int width, int height, std::vector<Rgb> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const Rgb> pixels() const { return pixels_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

// Quantized gray levels in [0, levels-1], row-major.
class GrayImage {
public:
    GrayImage(int width, int height, int levels, std::vector<std::uint16_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int levels() const { return levels_; }
    int at(int x, int y) const {
        return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                     static_cast<std::size_t>(x)];
    }
    std::span<const std::uint16_t> data() const { return data_; }

private:
    int width_;
    int height_;
    int levels_;
    std::vector<std::uint16_t> data_;
};

struct CropRect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    friend bool operator==(const CropRect&, const CropRect&) = default;
};

// Parses "x,y,w,h". Throws InvalidArgument on malformed text.
CropRect parse_crop_rect(const std::string& text);

bool fits_inside(const CropRect& rect, const RasterImage& img);

// JPEG/PNG (and anything else the codec backend understands) to RGB.
// Alpha is dropped. Throws DecodeError.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
RasterImage read_image_file(const std::string& path);

// Lossless PNG encoding, used for crop round-trips and tests.
std::vector<std::uint8_t> encode_png(const RasterImage& img);
std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality = 90);

// Pixel (i, j) of the result is img pixel (rect.x + i, rect.y + j).
// Throws OutOfBounds when rect is not fully inside img.
RasterImage crop(const RasterImage& img, const CropRect& rect);

// BT.601 luma rounded to the nearest integer, in [0, 255].
int luma(const Rgb& px);

// Uniform quantization floor(luma * levels / 256). 2 <= levels <= 256.
GrayImage to_gray(const RasterImage& img, int levels);

// Area-averaged downscale so the longest side is at most max_side.
// Images already small enough are returned unchanged.
RasterImage downscale_to_fit(const RasterImage& img, int max_side);

}  // namespace cbir
