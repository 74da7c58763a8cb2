#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cbir/features.hpp"
#include "cbir/index.hpp"

namespace cbir {

struct Hit {
    std::string id;
    double distance = 0.0;

    friend bool operator==(const Hit&, const Hit&) = default;
};

struct RetrievalResult {
    TechniqueSet techniques;
    std::vector<Hit> hits;  // ascending distance, ties by id
    double elapsed = 0.0;   // wall-clock seconds
    // Record-vector comparisons performed; the deterministic cost proxy.
    std::size_t scanned = 0;
};

// Min-max scaling of each component; degenerate components map to 0.
// Throws DimMismatch.
FeatureVector normalize(const FeatureVector& v, const NormalizationStats& stats);

// Throws DimMismatch, TechniqueMismatch.
double euclidean(const FeatureVector& a, const FeatureVector& b);

// Distance from query to every record of ix, in record order, measured in the
// requested space.
std::vector<double> distances_to_all(const FeatureVector& query, const FeatureIndex& ix,
                                     DistanceSpace space = DistanceSpace::Normalized);

// All records within cutoff of query.
RetrievalResult retrieve_single(const FeatureVector& query, const FeatureIndex& ix, double cutoff,
                                DistanceSpace space = DistanceSpace::Normalized);

// Per-technique query vectors. Only entries for techniques in the requested
// set need to be populated.
using QueryVectors = std::array<FeatureVector, kTechniqueCount>;

QueryVectors extract_query(const RasterImage& img, const TechniqueSet& ts);

// Records that fall within every selected technique's cutoff. Reported
// distance is the mean of the per-technique distances.
RetrievalResult retrieve_combined(const QueryVectors& query, const FeatureIndex& ix,
                                  const TechniqueSet& ts, const ThresholdConfig& cfg);

// Same, extracting the query vectors first; elapsed includes extraction.
RetrievalResult retrieve_combined(const RasterImage& query, const FeatureIndex& ix,
                                  const TechniqueSet& ts, const ThresholdConfig& cfg);

// Orders hits ascending by distance, ties by id.
void sort_hits(std::vector<Hit>& hits);

}  // namespace cbir
