#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbir/imaging.hpp"

namespace cbir {

enum class Technique {
    AverageRGB,
    ColorMoments,
    Cooccurrence,
    LocalColorHistogram,
    GlobalColorHistogram,
    GeometricMoment,
};

inline constexpr std::size_t kTechniqueCount = 6;

inline constexpr std::array<Technique, kTechniqueCount> kAllTechniques = {
    Technique::AverageRGB,           Technique::ColorMoments,
    Technique::Cooccurrence,         Technique::LocalColorHistogram,
    Technique::GlobalColorHistogram, Technique::GeometricMoment,
};

constexpr std::size_t technique_index(Technique t) { return static_cast<std::size_t>(t); }

// Short machine name used on the command line, in the index file and in the API.
std::string_view technique_name(Technique t);
// Human-readable name for reports.
std::string_view technique_label(Technique t);
std::optional<Technique> parse_technique(std::string_view name);

// Fixed vector length per technique.
std::size_t technique_dim(Technique t);

// Subset of the six techniques. Iteration follows enum order, which is
// also the order used for lexicographic comparison of subsets.
class TechniqueSet {
public:
    constexpr TechniqueSet() = default;
    TechniqueSet(std::initializer_list<Technique> ts) {
        for (Technique t : ts) {
            insert(t);
        }
    }

    static constexpr TechniqueSet all() { return from_mask((1u << kTechniqueCount) - 1); }
    static constexpr TechniqueSet from_mask(unsigned mask) {
        TechniqueSet s;
        s.mask_ = mask & ((1u << kTechniqueCount) - 1);
        return s;
    }

    void insert(Technique t) { mask_ |= 1u << technique_index(t); }
    bool contains(Technique t) const { return (mask_ >> technique_index(t)) & 1u; }
    bool empty() const { return mask_ == 0; }
    std::size_t size() const;
    unsigned mask() const { return mask_; }
    bool is_subset_of(const TechniqueSet& other) const { return (mask_ & ~other.mask_) == 0; }

    std::vector<Technique> members() const;

    // Comma-separated short names, e.g. "avgrgb,gch".
    std::string to_string() const;

    friend bool operator==(const TechniqueSet&, const TechniqueSet&) = default;

private:
    unsigned mask_ = 0;
};

// Parses a comma-separated list of short names ("all" selects every technique).
// Throws UnknownTechnique.
TechniqueSet parse_technique_set(std::string_view text);

// Compares member sequences lexicographically in enum order.
bool lexicographically_less(const TechniqueSet& a, const TechniqueSet& b);

struct FeatureVector {
    Technique technique = Technique::AverageRGB;
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct GlcmOffset {
    int dx = 1;
    int dy = 0;
};

// The four unit-distance directions, in the order their features are laid out
// in the co-occurrence vector.
inline constexpr std::array<GlcmOffset, 4> kGlcmOffsets = {{{1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

inline constexpr int kDefaultGrayLevels = 16;
inline constexpr int kHistogramBinsPerChannel = 4;
inline constexpr int kLocalHistogramGrid = 4;

// Normalized, symmetric gray-level co-occurrence matrix.
struct GlcmMatrix {
    int levels = 0;
    GlcmOffset offset;
    std::vector<double> p;  // levels x levels, row-major

    double at(int i, int j) const {
        return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(levels) +
                 static_cast<std::size_t>(j)];
    }
};

struct GlcmFeatures {
    double energy = 0.0;
    double entropy = 0.0;
    double contrast = 0.0;
    double homogeneity = 0.0;
};

FeatureVector average_rgb(const RasterImage& img);

// Per channel: mean, population variance and the signed cube root of the third
// central moment. Layout [mu_r, var_r, skew_r, mu_g, ...].
FeatureVector color_moments(const RasterImage& img);

// Throws EmptyCooccurrence when no pixel pair fits the offset.
GlcmMatrix glcm(const GrayImage& gray, GlcmOffset offset);
GlcmFeatures glcm_features(const GlcmMatrix& m);

// Energy, entropy, contrast, homogeneity for each of kGlcmOffsets. Images
// narrower or shorter than 2 pixels throw EmptyCooccurrence.
FeatureVector cooccurrence_vector(const RasterImage& img, int levels = kDefaultGrayLevels);

FeatureVector global_color_histogram(const RasterImage& img);

// 4x4 block grid, 64-bin histogram per block, blocks in row-major order.
// Throws ImageTooSmall below 4x4.
FeatureVector local_color_histogram(const RasterImage& img);

// eta20 + eta02 of the luma image; 0 for an all-black image.
FeatureVector geometric_moment(const RasterImage& img);

FeatureVector extract(const RasterImage& img, Technique t);

}  // namespace cbir
