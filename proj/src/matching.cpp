#include "cbir/matching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cbir/errors.hpp"

namespace cbir {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_indexed(const FeatureVector& v) {
    if (technique_index(v.technique) >= kTechniqueCount) {
        throw UnknownTechnique("query vector carries an unknown technique");
    }
    if (v.dim() != technique_dim(v.technique)) {
        throw DimMismatch("query vector for " + std::string(technique_name(v.technique)) +
                          " has " + std::to_string(v.dim()) + " components, expected " +
                          std::to_string(technique_dim(v.technique)));
    }
}

}  // namespace

FeatureVector normalize(const FeatureVector& v, const NormalizationStats& stats) {
    const auto k = technique_index(v.technique);
    const auto& lo = stats.min[k];
    const auto& hi = stats.max[k];
    if (lo.size() != v.dim() || hi.size() != v.dim()) {
        throw DimMismatch("vector has " + std::to_string(v.dim()) +
                          " components but normalization stats have " + std::to_string(lo.size()));
    }
    FeatureVector out{v.technique, std::vector<double>(v.dim())};
    for (std::size_t c = 0; c < v.dim(); ++c) {
        const double range = hi[c] - lo[c];
        out.values[c] = range > 0.0 ? (v.values[c] - lo[c]) / range : 0.0;
    }
    return out;
}

double euclidean(const FeatureVector& a, const FeatureVector& b) {
    if (a.technique != b.technique) {
        throw TechniqueMismatch("cannot compare " + std::string(technique_name(a.technique)) +
                                " with " + std::string(technique_name(b.technique)));
    }
    if (a.dim() != b.dim()) {
        throw DimMismatch("vector lengths differ: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < a.dim(); ++c) {
        const double d = a.values[c] - b.values[c];
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::vector<double> distances_to_all(const FeatureVector& query, const FeatureIndex& ix,
                                     DistanceSpace space) {
    require_indexed(query);
    const Technique t = query.technique;
    std::vector<double> out;
    out.reserve(ix.records.size());
    if (space == DistanceSpace::Raw) {
        for (const ImageRecord& rec : ix.records) {
            out.push_back(euclidean(query, rec.vector(t)));
        }
        return out;
    }
    const FeatureVector q = normalize(query, ix.stats);
    for (const ImageRecord& rec : ix.records) {
        out.push_back(euclidean(q, normalize(rec.vector(t), ix.stats)));
    }
    return out;
}

void sort_hits(std::vector<Hit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.distance != b.distance) {
            return a.distance < b.distance;
        }
        return a.id < b.id;
    });
}

RetrievalResult retrieve_single(const FeatureVector& query, const FeatureIndex& ix, double cutoff,
                                DistanceSpace space) {
    if (!(cutoff >= 0.0) || !std::isfinite(cutoff)) {
        throw InvalidArgument("distance cutoff must be finite and non-negative");
    }
    const auto start = Clock::now();
    const std::vector<double> dist = distances_to_all(query, ix, space);

    RetrievalResult result;
    result.techniques.insert(query.technique);
    for (std::size_t r = 0; r < dist.size(); ++r) {
        if (dist[r] <= cutoff) {
            result.hits.push_back({ix.records[r].id, dist[r]});
        }
    }
    sort_hits(result.hits);
    result.scanned = ix.records.size();
    result.elapsed = seconds_since(start);
    return result;
}

QueryVectors extract_query(const RasterImage& img, const TechniqueSet& ts) {
    QueryVectors q;
    for (Technique t : ts.members()) {
        q[technique_index(t)] = extract(img, t);
    }
    return q;
}

RetrievalResult retrieve_combined(const QueryVectors& query, const FeatureIndex& ix,
                                  const TechniqueSet& ts, const ThresholdConfig& cfg) {
    if (ts.empty()) {
        throw InvalidArgument("technique set must not be empty");
    }
    validate(cfg);
    const auto start = Clock::now();
    const std::size_t n = ix.records.size();

    std::vector<double> sum(n, 0.0);
    std::vector<bool> alive(n, true);
    for (Technique t : ts.members()) {
        const FeatureVector& q = query[technique_index(t)];
        if (q.technique != t) {
            throw TechniqueMismatch("query vector slot for " + std::string(technique_name(t)) +
                                    " holds a different technique");
        }
        const std::vector<double> dist = distances_to_all(q, ix, cfg.space);
        const double cutoff = cfg[t];
        for (std::size_t r = 0; r < n; ++r) {
            if (dist[r] > cutoff) {
                alive[r] = false;
            }
            sum[r] += dist[r];
        }
    }

    RetrievalResult result;
    result.techniques = ts;
    const double count = static_cast<double>(ts.size());
    for (std::size_t r = 0; r < n; ++r) {
        if (alive[r]) {
            result.hits.push_back({ix.records[r].id, sum[r] / count});
        }
    }
    sort_hits(result.hits);
    result.scanned = n * ts.size();
    result.elapsed = seconds_since(start);
    return result;
}

RetrievalResult retrieve_combined(const RasterImage& query, const FeatureIndex& ix,
                                  const TechniqueSet& ts, const ThresholdConfig& cfg) {
    if (ts.empty()) {
        throw InvalidArgument("technique set must not be empty");
    }
    const auto start = Clock::now();
    const QueryVectors q = extract_query(query, ts);
    RetrievalResult result = retrieve_combined(q, ix, ts, cfg);
    result.elapsed = seconds_since(start);
    return result;
}

}  // namespace cbir
