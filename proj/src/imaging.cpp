#include "cbir/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cbir/errors.hpp"

namespace cbir {

RasterImage::RasterImage(int width, int height, Rgb fill)
    : RasterImage(width, height,
                  std::vector<Rgb>(static_cast<std::size_t>(std::max(width, 0)) *
                                       static_cast<std::size_t>(std::max(height, 0)),
                                   fill)) {}

RasterImage::RasterImage(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
        throw InvalidArgument("image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidArgument("pixel count does not match width x height");
    }
}

GrayImage::GrayImage(int width, int height, int levels, std::vector<std::uint16_t> data)
    : width_(width), height_(height), levels_(levels), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw InvalidArgument("gray image dimensions must be positive");
    }
    if (levels < 2) {
        throw InvalidArgument("gray image needs at least two levels");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidArgument("level count does not match width x height");
    }
    for (auto v : data_) {
        if (v >= levels) {
            throw InvalidArgument("gray level out of range");
        }
    }
}

CropRect parse_crop_rect(const std::string& text) {
    std::string compact;
    for (char c : text) {
        if (c != ' ' && c != '\t') compact.push_back(c);
    }
    int parts[4];
    const char* p = compact.data();
    const char* end = compact.data() + compact.size();
    for (int k = 0; k < 4; ++k) {
        auto [next, ec] = std::from_chars(p, end, parts[k]);
        if (ec != std::errc{}) {
            throw InvalidArgument("crop must be x,y,w,h: '" + text + "'");
        }
        p = next;
        if (k < 3) {
            if (p == end || *p != ',') {
                throw InvalidArgument("crop must be x,y,w,h: '" + text + "'");
            }
            ++p;
        }
    }
    if (p != end) {
        throw InvalidArgument("trailing characters in crop: '" + text + "'");
    }
    CropRect rect{parts[0], parts[1], parts[2], parts[3]};
    if (rect.x < 0 || rect.y < 0 || rect.w < 1 || rect.h < 1) {
        throw InvalidArgument("crop needs x,y >= 0 and w,h >= 1");
    }
    return rect;
}

bool fits_inside(const CropRect& rect, const RasterImage& img) {
    if (rect.x < 0 || rect.y < 0 || rect.w < 1 || rect.h < 1) {
        return false;
    }
    // 64-bit sums so huge user-supplied values cannot overflow.
    return static_cast<long long>(rect.x) + rect.w <= img.width() &&
           static_cast<long long>(rect.y) + rect.h <= img.height();
}

namespace {

RasterImage from_bgr(const cv::Mat& bgr) {
    std::vector<Rgb> pixels(static_cast<std::size_t>(bgr.rows) * static_cast<std::size_t>(bgr.cols));
    std::size_t k = 0;
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            pixels[k++] = Rgb{row[x][2], row[x][1], row[x][0]};
        }
    }
    return RasterImage(bgr.cols, bgr.rows, std::move(pixels));
}

cv::Mat to_bgr(const RasterImage& img) {
    cv::Mat bgr(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width(); ++x) {
            const Rgb& px = img.at(x, y);
            row[x] = cv::Vec3b(px.b, px.g, px.r);
        }
    }
    return bgr;
}

std::vector<std::uint8_t> encode(const RasterImage& img, const std::string& ext,
                                 const std::vector<int>& params) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(ext, to_bgr(img), out, params)) {
        throw Error("failed to encode image as " + ext);
    }
    return out;
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw DecodeError("empty image data");
    }
    cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                   const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(buffer, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw DecodeError(std::string("image decoder failed: ") + e.what());
    }
    if (bgr.empty() || bgr.type() != CV_8UC3) {
        throw DecodeError("malformed or unsupported image data");
    }
    return from_bgr(bgr);
}

RasterImage read_image_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open image file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    return encode(img, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality) {
    return encode(img, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

RasterImage crop(const RasterImage& img, const CropRect& rect) {
    if (!fits_inside(rect, img)) {
        throw OutOfBounds("crop rectangle " + std::to_string(rect.x) + "," + std::to_string(rect.y) +
                          "," + std::to_string(rect.w) + "," + std::to_string(rect.h) +
                          " exceeds image " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()));
    }
    std::vector<Rgb> pixels;
    pixels.reserve(static_cast<std::size_t>(rect.w) * static_cast<std::size_t>(rect.h));
    for (int j = 0; j < rect.h; ++j) {
        for (int i = 0; i < rect.w; ++i) {
            pixels.push_back(img.at(rect.x + i, rect.y + j));
        }
    }
    return RasterImage(rect.w, rect.h, std::move(pixels));
}

int luma(const Rgb& px) {
    // Integer form of round(0.299 r + 0.587 g + 0.114 b), exact at the .5 boundary.
    return (299 * px.r + 587 * px.g + 114 * px.b + 500) / 1000;
}

GrayImage to_gray(const RasterImage& img, int levels) {
    if (levels < 2 || levels > 256) {
        throw InvalidArgument("gray level count must lie in [2, 256]");
    }
    std::vector<std::uint16_t> data;
    data.reserve(img.size());
    for (const Rgb& px : img.pixels()) {
        int level = luma(px) * levels / 256;
        data.push_back(static_cast<std::uint16_t>(std::clamp(level, 0, levels - 1)));
    }
    return GrayImage(img.width(), img.height(), levels, std::move(data));
}

RasterImage downscale_to_fit(const RasterImage& img, int max_side) {
    if (max_side < 1) {
        throw InvalidArgument("thumbnail size must be positive");
    }
    int longest = std::max(img.width(), img.height());
    if (longest <= max_side) {
        return img;
    }
    double scale = static_cast<double>(max_side) / longest;
    int w = std::max(1, static_cast<int>(img.width() * scale + 0.5));
    int h = std::max(1, static_cast<int>(img.height() * scale + 0.5));
    w = std::min(w, max_side);
    h = std::min(h, max_side);
    cv::Mat resized;
    cv::resize(to_bgr(img), resized, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    return from_bgr(resized);
}

}  // namespace cbir
