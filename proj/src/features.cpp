#include "cbir/features.hpp"

#include <algorithm>
#include <cmath>

#include "cbir/errors.hpp"

namespace cbir {

namespace {

struct TechniqueInfo {
    std::string_view name;
    std::string_view label;
    std::size_t dim;
};

constexpr std::size_t kHistogramBins =
    kHistogramBinsPerChannel * kHistogramBinsPerChannel * kHistogramBinsPerChannel;

constexpr std::array<TechniqueInfo, kTechniqueCount> kInfo = {{
    {"avgrgb", "Average RGB", 3},
    {"colormoments", "Color Moments", 9},
    {"cooccurrence", "Co-occurrence", 16},
    {"lch", "Local Color Histogram", kLocalHistogramGrid * kLocalHistogramGrid * kHistogramBins},
    {"gch", "Global Color Histogram", kHistogramBins},
    {"geomoment", "Geometric Moment", 1},
}};

void require_non_empty(const RasterImage& img) {
    if (img.empty()) {
        throw InvalidArgument("image is empty");
    }
}

std::size_t color_bin(const Rgb& px) {
    constexpr int n = kHistogramBinsPerChannel;
    std::size_t r = px.r * n / 256;
    std::size_t g = px.g * n / 256;
    std::size_t b = px.b * n / 256;
    return (r * n + g) * n + b;
}

// Normalized histogram of the pixels in [x0, x1) x [y0, y1), written into out.
void histogram_block(const RasterImage& img, int x0, int x1, int y0, int y1, double* out) {
    std::array<std::size_t, kHistogramBins> counts{};
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            ++counts[color_bin(img.at(x, y))];
        }
    }
    double total = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
    for (std::size_t k = 0; k < kHistogramBins; ++k) {
        out[k] = static_cast<double>(counts[k]) / total;
    }
}

}  // namespace

std::string_view technique_name(Technique t) { return kInfo[technique_index(t)].name; }

std::string_view technique_label(Technique t) { return kInfo[technique_index(t)].label; }

std::size_t technique_dim(Technique t) { return kInfo[technique_index(t)].dim; }

std::optional<Technique> parse_technique(std::string_view name) {
    for (Technique t : kAllTechniques) {
        if (technique_name(t) == name) {
            return t;
        }
    }
    return std::nullopt;
}

std::size_t TechniqueSet::size() const {
    std::size_t n = 0;
    for (Technique t : kAllTechniques) {
        n += contains(t) ? 1 : 0;
    }
    return n;
}

std::vector<Technique> TechniqueSet::members() const {
    std::vector<Technique> out;
    for (Technique t : kAllTechniques) {
        if (contains(t)) {
            out.push_back(t);
        }
    }
    return out;
}

std::string TechniqueSet::to_string() const {
    std::string out;
    for (Technique t : members()) {
        if (!out.empty()) {
            out += ',';
        }
        out += technique_name(t);
    }
    return out;
}

TechniqueSet parse_technique_set(std::string_view text) {
    if (text == "all") {
        return TechniqueSet::all();
    }
    TechniqueSet set;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        std::string_view name =
            text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        auto t = parse_technique(name);
        if (!t) {
            throw UnknownTechnique("unknown technique '" + std::string(name) + "'");
        }
        set.insert(*t);
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return set;
}

bool lexicographically_less(const TechniqueSet& a, const TechniqueSet& b) {
    const auto x = a.members();
    const auto y = b.members();
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

FeatureVector average_rgb(const RasterImage& img) {
    require_non_empty(img);
    double sum[3] = {0, 0, 0};
    for (const Rgb& px : img.pixels()) {
        sum[0] += px.r;
        sum[1] += px.g;
        sum[2] += px.b;
    }
    double n = static_cast<double>(img.size());
    return {Technique::AverageRGB, {sum[0] / n, sum[1] / n, sum[2] / n}};
}

FeatureVector color_moments(const RasterImage& img) {
    require_non_empty(img);
    const double n = static_cast<double>(img.size());
    auto channel = [](const Rgb& px, int c) -> double {
        return c == 0 ? px.r : (c == 1 ? px.g : px.b);
    };

    FeatureVector out{Technique::ColorMoments, {}};
    out.values.reserve(9);
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (const Rgb& px : img.pixels()) {
            sum += channel(px, c);
        }
        const double mean = sum / n;
        double m2 = 0.0;
        double m3 = 0.0;
        for (const Rgb& px : img.pixels()) {
            double d = channel(px, c) - mean;
            m2 += d * d;
            m3 += d * d * d;
        }
        out.values.push_back(mean);
        out.values.push_back(m2 / n);
        out.values.push_back(std::cbrt(m3 / n));
    }
    return out;
}

GlcmMatrix glcm(const GrayImage& gray, GlcmOffset offset) {
    const int levels = gray.levels();
    std::vector<double> counts(static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels), 0.0);

    const int x_begin = std::max(0, -offset.dx);
    const int x_end = std::min(gray.width(), gray.width() - offset.dx);
    const int y_begin = std::max(0, -offset.dy);
    const int y_end = std::min(gray.height(), gray.height() - offset.dy);

    std::size_t pairs = 0;
    for (int y = y_begin; y < y_end; ++y) {
        for (int x = x_begin; x < x_end; ++x) {
            auto i = static_cast<std::size_t>(gray.at(x, y));
            auto j = static_cast<std::size_t>(gray.at(x + offset.dx, y + offset.dy));
            // Symmetric: each pair contributes to (i, j) and to (j, i).
            counts[i * levels + j] += 1.0;
            counts[j * levels + i] += 1.0;
            ++pairs;
        }
    }
    if (pairs == 0) {
        throw EmptyCooccurrence("no pixel pair fits offset (" + std::to_string(offset.dx) + ", " +
                                std::to_string(offset.dy) + ") in a " +
                                std::to_string(gray.width()) + "x" +
                                std::to_string(gray.height()) + " image");
    }
    const double total = 2.0 * static_cast<double>(pairs);
    for (double& c : counts) {
        c /= total;
    }
    return {levels, offset, std::move(counts)};
}

GlcmFeatures glcm_features(const GlcmMatrix& m) {
    GlcmFeatures f;
    for (int i = 0; i < m.levels; ++i) {
        for (int j = 0; j < m.levels; ++j) {
            const double p = m.at(i, j);
            if (p == 0.0) {
                continue;
            }
            const double d = static_cast<double>(i - j);
            f.energy += p * p;
            f.entropy -= p * std::log2(p);
            f.contrast += d * d * p;
            f.homogeneity += p / (1.0 + std::abs(d));
        }
    }
    return f;
}

FeatureVector cooccurrence_vector(const RasterImage& img, int levels) {
    const GrayImage gray = to_gray(img, levels);
    FeatureVector out{Technique::Cooccurrence, {}};
    out.values.reserve(16);
    for (const GlcmOffset& offset : kGlcmOffsets) {
        GlcmFeatures f = glcm_features(glcm(gray, offset));
        out.values.insert(out.values.end(), {f.energy, f.entropy, f.contrast, f.homogeneity});
    }
    return out;
}

FeatureVector global_color_histogram(const RasterImage& img) {
    require_non_empty(img);
    FeatureVector out{Technique::GlobalColorHistogram, std::vector<double>(kHistogramBins)};
    histogram_block(img, 0, img.width(), 0, img.height(), out.values.data());
    return out;
}

FeatureVector local_color_histogram(const RasterImage& img) {
    constexpr int grid = kLocalHistogramGrid;
    if (img.width() < grid || img.height() < grid) {
        throw ImageTooSmall("local color histogram needs at least a 4x4 image, got " +
                            std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    FeatureVector out{Technique::LocalColorHistogram,
                      std::vector<double>(grid * grid * kHistogramBins)};
    const int w = img.width();
    const int h = img.height();
    for (int v = 0; v < grid; ++v) {
        for (int u = 0; u < grid; ++u) {
            double* block = out.values.data() + static_cast<std::size_t>(v * grid + u) * kHistogramBins;
            histogram_block(img, u * w / grid, (u + 1) * w / grid, v * h / grid, (v + 1) * h / grid,
                            block);
        }
    }
    return out;
}

FeatureVector geometric_moment(const RasterImage& img) {
    require_non_empty(img);
    double m00 = 0.0;
    double m10 = 0.0;
    double m01 = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double intensity = luma(img.at(x, y));
            m00 += intensity;
            m10 += x * intensity;
            m01 += y * intensity;
        }
    }
    if (m00 == 0.0) {
        return {Technique::GeometricMoment, {0.0}};
    }
    const double cx = m10 / m00;
    const double cy = m01 / m00;
    double mu20 = 0.0;
    double mu02 = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double intensity = luma(img.at(x, y));
            if (intensity == 0.0) {
                continue;
            }
            const double dx = x - cx;
            const double dy = y - cy;
            mu20 += dx * dx * intensity;
            mu02 += dy * dy * intensity;
        }
    }
    return {Technique::GeometricMoment, {(mu20 + mu02) / (m00 * m00)}};
}

FeatureVector extract(const RasterImage& img, Technique t) {
    switch (t) {
        case Technique::AverageRGB:
            return average_rgb(img);
        case Technique::ColorMoments:
            return color_moments(img);
        case Technique::Cooccurrence:
            return cooccurrence_vector(img);
        case Technique::LocalColorHistogram:
            return local_color_histogram(img);
        case Technique::GlobalColorHistogram:
            return global_color_histogram(img);
        case Technique::GeometricMoment:
            return geometric_moment(img);
    }
    throw UnknownTechnique("unknown technique");
}

}  // namespace cbir
