#pragma once

// Brute-force reference implementations. Deliberately naive and written
// without reusing any library code path beyond the image container.

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cbir/evaluation.hpp"
#include "cbir/features.hpp"
#include "cbir/imaging.hpp"
#include "cbir/index.hpp"
#include "cbir/synthetic.hpp"

namespace oracle {

inline int luma(const cbir::Rgb& p) {
    return static_cast<int>(std::floor((299.0 * p.r + 587.0 * p.g + 114.0 * p.b) / 1000.0 + 0.5));
}

inline int level(const cbir::Rgb& p, int levels) {
    return std::min(levels - 1, oracle::luma(p) * levels / 256);
}

struct Texture {
    double energy = 0, entropy = 0, contrast = 0, homogeneity = 0;
};

// Visits every ordered pixel pair and keeps those displaced by (dx, dy).
inline Texture glcm_texture(const cbir::RasterImage& img, int levels, int dx, int dy) {
    std::map<std::pair<int, int>, double> counts;
    double total = 0;
    const int n = img.width() * img.height();
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            const int ax = a % img.width(), ay = a / img.width();
            const int bx = b % img.width(), by = b / img.width();
            if (bx - ax != dx || by - ay != dy) continue;
            const int i = level(img.at(ax, ay), levels);
            const int j = level(img.at(bx, by), levels);
            counts[{i, j}] += 1;
            counts[{j, i}] += 1;
            total += 2;
        }
    }
    Texture t;
    for (const auto& [ij, c] : counts) {
        const double p = c / total;
        const double d = ij.first - ij.second;
        t.energy += p * p;
        t.entropy -= p * std::log2(p);
        t.contrast += d * d * p;
        t.homogeneity += p / (1 + std::abs(d));
    }
    return t;
}

inline std::vector<double> channel(const cbir::RasterImage& img, int c) {
    std::vector<double> out;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto& p = img.at(x, y);
            out.push_back(c == 0 ? p.r : c == 1 ? p.g : p.b);
        }
    }
    return out;
}

inline std::array<double, 3> average_rgb(const cbir::RasterImage& img) {
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) {
        long double s = 0;
        for (double v : channel(img, c)) s += v;
        out[c] = static_cast<double>(s / (img.width() * img.height()));
    }
    return out;
}

// [mean, variance, cbrt(third central moment)] per channel.
inline std::array<double, 9> color_moments(const cbir::RasterImage& img) {
    std::array<double, 9> out{};
    for (int c = 0; c < 3; ++c) {
        const auto xs = channel(img, c);
        long double mu = 0;
        for (double v : xs) mu += v;
        mu /= xs.size();
        long double m2 = 0, m3 = 0;
        for (double v : xs) {
            m2 += std::pow(v - mu, 2.0L);
            m3 += std::pow(v - mu, 3.0L);
        }
        m2 /= xs.size();
        m3 /= xs.size();
        out[3 * c] = static_cast<double>(mu);
        out[3 * c + 1] = static_cast<double>(m2);
        out[3 * c + 2] = std::cbrt(static_cast<double>(m3));
    }
    return out;
}

inline std::vector<double> global_histogram(const cbir::RasterImage& img) {
    std::vector<double> out;
    for (int br = 0; br < 4; ++br)
        for (int bg = 0; bg < 4; ++bg)
            for (int bb = 0; bb < 4; ++bb) {
                int n = 0;
                for (const auto& p : img.pixels())
                    if (p.r / 64 == br && p.g / 64 == bg && p.b / 64 == bb) ++n;
                out.push_back(static_cast<double>(n) / static_cast<double>(img.size()));
            }
    return out;
}

inline double geometric_moment(const cbir::RasterImage& img) {
    long double m00 = 0, m10 = 0, m01 = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const long double v = oracle::luma(img.at(x, y));
            m00 += v;
            m10 += x * v;
            m01 += y * v;
        }
    if (m00 == 0) return 0;
    const long double cx = m10 / m00, cy = m01 / m00;
    long double mu20 = 0, mu02 = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const long double v = oracle::luma(img.at(x, y));
            mu20 += (x - cx) * (x - cx) * v;
            mu02 += (y - cy) * (y - cy) * v;
        }
    return static_cast<double>((mu20 + mu02) / (m00 * m00));
}

// Double accumulation in component order, so values at a cutoff boundary
// compare the same way the engine's do.
inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

// Min-max normalizes every record's vector for technique t, with min and max
// recomputed from the records themselves.
inline std::map<std::string, std::vector<double>> normalized(const cbir::FeatureIndex& ix,
                                                             cbir::Technique t) {
    const std::size_t ti = cbir::technique_index(t);
    const std::size_t dim = ix.records.front().vectors[ti].values.size();
    std::vector<double> lo(dim, INFINITY), hi(dim, -INFINITY);
    for (const auto& rec : ix.records) {
        for (std::size_t k = 0; k < dim; ++k) {
            lo[k] = std::min(lo[k], rec.vectors[ti].values[k]);
            hi[k] = std::max(hi[k], rec.vectors[ti].values[k]);
        }
    }
    std::map<std::string, std::vector<double>> out;
    for (const auto& rec : ix.records) {
        std::vector<double> v(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const double span = hi[k] - lo[k];
            v[k] = span > 0 ? (rec.vectors[ti].values[k] - lo[k]) / span : 0;
        }
        out[rec.id] = std::move(v);
    }
    return out;
}

// Per technique, the ids within that technique's cutoff of the query record.
inline std::array<std::set<std::string>, cbir::kTechniqueCount> per_technique_hits(
    const cbir::FeatureIndex& ix, const std::string& query_id, const cbir::ThresholdConfig& cfg) {
    std::array<std::set<std::string>, cbir::kTechniqueCount> out;
    for (std::size_t ti = 0; ti < cbir::kTechniqueCount; ++ti) {
        const auto norm = normalized(ix, static_cast<cbir::Technique>(ti));
        const auto& q = norm.at(query_id);
        for (const auto& [id, v] : norm)
            if (distance(q, v) <= cfg.cutoff[ti]) out[ti].insert(id);
    }
    return out;
}

// Explicit set intersection of the per-technique hit sets selected by mask.
inline std::set<std::string> intersection_hits(
    const std::array<std::set<std::string>, cbir::kTechniqueCount>& per_technique, unsigned mask) {
    std::set<std::string> acc;
    bool first = true;
    for (std::size_t ti = 0; ti < cbir::kTechniqueCount; ++ti) {
        if (!((mask >> ti) & 1u)) continue;
        if (first) {
            acc = per_technique[ti];
            first = false;
            continue;
        }
        std::set<std::string> both;
        std::set_intersection(acc.begin(), acc.end(), per_technique[ti].begin(),
                              per_technique[ti].end(), std::inserter(both, both.end()));
        acc = std::move(both);
    }
    return acc;
}

struct Choice {
    unsigned mask = 0;
    double accuracy = 0;
    double cost = 0;
    double rf = 0;
};

// Exhaustive argmax under accuracy, then cost (records x techniques), then
// |rf|, then the subset whose member list sorts first.
inline std::map<std::string, Choice> best_subsets(const cbir::FeatureIndex& ix,
                                                  const std::map<std::string, std::string>& queries,
                                                  const cbir::ThresholdConfig& cfg) {
    std::map<std::string, std::size_t> class_size;
    for (const auto& rec : ix.records) class_size[*rec.class_label]++;

    auto members = [](unsigned mask) {
        std::vector<int> m;
        for (int i = 0; i < 6; ++i)
            if ((mask >> i) & 1u) m.push_back(i);
        return m;
    };

    std::map<std::string, Choice> out;
    for (const auto& [label, qid] : queries) {
        const auto per_technique = per_technique_hits(ix, qid, cfg);
        std::vector<Choice> all;
        for (unsigned mask = 1; mask < 64; ++mask) {
            const auto hits = intersection_hits(per_technique, mask);
            std::size_t rel = 0;
            for (const auto& id : hits)
                if (*ix.find(id)->class_label == label) ++rel;
            const double ret = static_cast<double>(hits.size());
            Choice c;
            c.mask = mask;
            c.accuracy = hits.empty() ? 0.0
                                      : 100.0 * std::min<double>(rel, 50) / std::min<double>(ret, 50);
            c.cost = static_cast<double>(ix.records.size() * members(mask).size());
            c.rf = (ret - static_cast<double>(class_size[label])) /
                   static_cast<double>(class_size[label]);
            all.push_back(c);
        }
        std::sort(all.begin(), all.end(), [&](const Choice& a, const Choice& b) {
            if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
            if (a.cost != b.cost) return a.cost < b.cost;
            if (std::abs(a.rf) != std::abs(b.rf)) return std::abs(a.rf) < std::abs(b.rf);
            return members(a.mask) < members(b.mask);
        });
        out[label] = all.front();
    }
    return out;
}

}  // namespace oracle

namespace support {

inline std::vector<cbir::CorpusImage> to_corpus(const std::vector<cbir::synthetic::Image>& images) {
    std::vector<cbir::CorpusImage> out;
    for (const auto& im : images) out.push_back({im.id, im.id, im.class_label, im.image});
    return out;
}

inline cbir::FeatureIndex synthetic_index(int classes, int per_class, int side = 32,
                                          std::uint64_t seed = 7) {
    cbir::synthetic::CorpusSpec spec;
    spec.classes = classes;
    spec.per_class = per_class;
    spec.width = side;
    spec.height = side;
    spec.seed = seed;
    return cbir::build_index(to_corpus(cbir::synthetic::make_corpus(spec)));
}

// First record of every class serves as that class's query.
inline cbir::QueryAssignment first_of_each_class(const cbir::FeatureIndex& ix) {
    cbir::QueryAssignment q;
    for (const auto& rec : ix.records) q.emplace(*rec.class_label, rec.id);
    return q;
}

}  // namespace support
