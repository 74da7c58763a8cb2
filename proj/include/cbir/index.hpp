#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cbir/errors.hpp"
#include "cbir/features.hpp"
#include "cbir/imaging.hpp"

namespace cbir {

inline constexpr int kIndexFormatVersion = 1;
inline constexpr double kDefaultThresholdPercentile = 10.0;

struct ImageRecord {
    std::string id;
    std::string path;
    std::optional<std::string> class_label;
    std::array<FeatureVector, kTechniqueCount> vectors;

    const FeatureVector& vector(Technique t) const { return vectors[technique_index(t)]; }

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Componentwise min and max of each technique's vectors over a corpus.
struct NormalizationStats {
    std::array<std::vector<double>, kTechniqueCount> min;
    std::array<std::vector<double>, kTechniqueCount> max;

    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

enum class DistanceSpace { Normalized, Raw };

// Per-technique distance cutoffs and the space they are measured in.
struct ThresholdConfig {
    std::array<double, kTechniqueCount> cutoff{};
    DistanceSpace space = DistanceSpace::Normalized;

    double operator[](Technique t) const { return cutoff[technique_index(t)]; }
    double& operator[](Technique t) { return cutoff[technique_index(t)]; }

    friend bool operator==(const ThresholdConfig&, const ThresholdConfig&) = default;
};

void validate(const ThresholdConfig& cfg);

struct FeatureIndex {
    std::vector<ImageRecord> records;  // sorted by id
    NormalizationStats stats;
    ThresholdConfig thresholds;
    int format_version = kIndexFormatVersion;

    const ImageRecord* find(const std::string& id) const;
    bool labeled() const;

    friend bool operator==(const FeatureIndex&, const FeatureIndex&) = default;
};

struct CorpusImage {
    std::string id;
    std::string path;
    std::optional<std::string> class_label;
    RasterImage image;
};

class ExtractionError : public Error {
public:
    ExtractionError(std::string id, Technique technique, const std::string& cause);

    const std::string& id() const { return id_; }
    Technique technique() const { return technique_; }

private:
    std::string id_;
    Technique technique_;
};

struct BuildOptions {
    double threshold_percentile = kDefaultThresholdPercentile;
    DistanceSpace space = DistanceSpace::Normalized;
    // Upper bound on the number of record pairs sampled for calibration.
    std::size_t max_calibration_pairs = 200000;
    unsigned threads = 0;  // 0: hardware concurrency
    // Drop images whose extraction fails instead of aborting the build.
    bool skip_failed_images = false;
};

struct SkippedImage {
    std::string id;
    std::string reason;
};

struct BuildReport {
    std::vector<SkippedImage> skipped;
    std::array<double, kTechniqueCount> extraction_seconds{};
};

// Extracts all six vectors per image, computes stats and calibrates default
// thresholds. Output does not depend on the thread count.
// Throws DuplicateId, ExtractionError (unless skipping), InvalidArgument.
FeatureIndex build_index(std::vector<CorpusImage> corpus, const BuildOptions& options = {},
                         BuildReport* report = nullptr);

// Builds a record for one image; throws ExtractionError. When timings is given,
// per-technique extraction seconds are added to it.
ImageRecord make_record(const CorpusImage& item,
                        std::array<double, kTechniqueCount>* timings = nullptr);

NormalizationStats compute_stats(const std::vector<ImageRecord>& records);

// p-th percentile (linear interpolation) of pairwise distances per technique.
ThresholdConfig calibrate_thresholds(const FeatureIndex& ix, double percentile,
                                     DistanceSpace space = DistanceSpace::Normalized,
                                     std::size_t max_pairs = 200000);

void write_index(const FeatureIndex& ix, std::ostream& out);
FeatureIndex read_index(std::istream& in);

void save_index(const FeatureIndex& ix, const std::filesystem::path& destination);
FeatureIndex load_index(const std::filesystem::path& source);

}  // namespace cbir
