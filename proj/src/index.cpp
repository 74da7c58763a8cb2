#include "cbir/index.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "cbir/matching.hpp"

namespace cbir {

namespace {

constexpr std::string_view kMagic = "CBIRIDX";

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(v)) {
        throw FormatError("bad number '" + std::string(text) + "'");
    }
    return v;
}

// Label field of an unlabeled record. escape() never produces it.
constexpr std::string_view kNoLabel = "%N";

// Percent-escapes the characters that would break the tab/line structure.
std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '%': out += "%25"; break;
            case '\t': out += "%09"; break;
            case '\n': out += "%0A"; break;
            case '\r': out += "%0D"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] != '%') {
            out += s[k];
            continue;
        }
        if (k + 2 >= s.size()) {
            throw FormatError("truncated escape sequence");
        }
        std::string_view code = s.substr(k + 1, 2);
        if (code == "25") out += '%';
        else if (code == "09") out += '\t';
        else if (code == "0A") out += '\n';
        else if (code == "0D") out += '\r';
        else throw FormatError("bad escape sequence '%" + std::string(code) + "'");
        k += 2;
    }
    return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join_values(const std::vector<double>& values) {
    std::string out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) out += ' ';
        out += format_double(values[k]);
    }
    return out;
}

std::vector<double> parse_values(std::string_view text, std::size_t expected) {
    std::vector<double> out;
    out.reserve(expected);
    if (!text.empty()) {
        for (std::string_view part : split(text, ' ')) {
            out.push_back(parse_double(part));
        }
    }
    if (out.size() != expected) {
        throw FormatError("expected " + std::to_string(expected) + " values, found " +
                          std::to_string(out.size()));
    }
    return out;
}

Technique parse_technique_field(std::string_view name) {
    auto t = parse_technique(name);
    if (!t) {
        throw FormatError("unknown technique '" + std::string(name) + "'");
    }
    return *t;
}

std::string_view space_name(DistanceSpace s) {
    return s == DistanceSpace::Normalized ? "normalized" : "raw";
}

double percentile_of(std::vector<double> values, double p) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

}  // namespace

void validate(const ThresholdConfig& cfg) {
    for (double c : cfg.cutoff) {
        if (!std::isfinite(c) || c < 0.0) {
            throw InvalidArgument("thresholds must be finite and non-negative");
        }
    }
}

const ImageRecord* FeatureIndex::find(const std::string& id) const {
    auto it = std::lower_bound(records.begin(), records.end(), id,
                               [](const ImageRecord& r, const std::string& key) { return r.id < key; });
    if (it != records.end() && it->id == id) {
        return &*it;
    }
    return nullptr;
}

bool FeatureIndex::labeled() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(),
                       [](const ImageRecord& r) { return r.class_label.has_value(); });
}

ExtractionError::ExtractionError(std::string id, Technique technique, const std::string& cause)
    : Error("extraction of " + std::string(technique_name(technique)) + " failed for '" + id +
            "': " + cause),
      id_(std::move(id)),
      technique_(technique) {}

ImageRecord make_record(const CorpusImage& item, std::array<double, kTechniqueCount>* timings) {
    using Clock = std::chrono::steady_clock;
    ImageRecord rec{item.id, item.path, item.class_label, {}};
    for (Technique t : kAllTechniques) {
        const auto start = Clock::now();
        try {
            rec.vectors[technique_index(t)] = extract(item.image, t);
        } catch (const Error& e) {
            throw ExtractionError(item.id, t, e.what());
        }
        if (timings) {
            (*timings)[technique_index(t)] +=
                std::chrono::duration<double>(Clock::now() - start).count();
        }
    }
    return rec;
}

NormalizationStats compute_stats(const std::vector<ImageRecord>& records) {
    NormalizationStats stats;
    if (records.empty()) {
        return stats;
    }
    for (Technique t : kAllTechniques) {
        const auto k = technique_index(t);
        stats.min[k] = records.front().vectors[k].values;
        stats.max[k] = records.front().vectors[k].values;
        for (const ImageRecord& rec : records) {
            const auto& v = rec.vectors[k].values;
            if (v.size() != stats.min[k].size()) {
                throw DimMismatch("record '" + rec.id + "' has a " + std::to_string(v.size()) +
                                  "-component " + std::string(technique_name(t)) + " vector");
            }
            for (std::size_t c = 0; c < v.size(); ++c) {
                stats.min[k][c] = std::min(stats.min[k][c], v[c]);
                stats.max[k][c] = std::max(stats.max[k][c], v[c]);
            }
        }
    }
    return stats;
}

ThresholdConfig calibrate_thresholds(const FeatureIndex& ix, double percentile, DistanceSpace space,
                                     std::size_t max_pairs) {
    if (!(percentile >= 0.0 && percentile <= 100.0)) {
        throw InvalidArgument("percentile must lie in [0, 100]");
    }
    const std::size_t n = ix.records.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;
    if (total <= max_pairs) {
        pairs.reserve(total);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                pairs.emplace_back(i, j);
            }
        }
    } else {
        // Fixed seed keeps calibration reproducible for a given corpus.
        std::mt19937_64 rng(0x5eed'cb1au);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        pairs.reserve(max_pairs);
        while (pairs.size() < max_pairs) {
            std::size_t i = pick(rng);
            std::size_t j = pick(rng);
            if (i != j) {
                pairs.emplace_back(std::min(i, j), std::max(i, j));
            }
        }
    }

    ThresholdConfig cfg;
    cfg.space = space;
    for (Technique t : kAllTechniques) {
        std::vector<FeatureVector> vs;
        vs.reserve(n);
        for (const ImageRecord& rec : ix.records) {
            vs.push_back(space == DistanceSpace::Normalized ? normalize(rec.vector(t), ix.stats)
                                                            : rec.vector(t));
        }
        std::vector<double> dist;
        dist.reserve(pairs.size());
        for (auto [i, j] : pairs) {
            dist.push_back(euclidean(vs[i], vs[j]));
        }
        cfg[t] = percentile_of(std::move(dist), percentile);
    }
    return cfg;
}

FeatureIndex build_index(std::vector<CorpusImage> corpus, const BuildOptions& options,
                         BuildReport* report) {
    if (corpus.empty()) {
        throw InvalidArgument("cannot build an index from an empty corpus");
    }
    std::sort(corpus.begin(), corpus.end(),
              [](const CorpusImage& a, const CorpusImage& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < corpus.size(); ++k) {
        if (corpus[k].id == corpus[k - 1].id) {
            throw DuplicateId("duplicate image id '" + corpus[k].id + "'");
        }
    }

    const std::size_t n = corpus.size();
    std::vector<ImageRecord> records(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::array<double, kTechniqueCount>> timings(n);
    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));

    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t k = begin; k < n; k += step) {
            try {
                records[k] = make_record(corpus[k], &timings[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back(work, w, threads);
        }
    }
    if (report) {
        *report = {};
        for (const auto& per_image : timings) {
            for (std::size_t t = 0; t < kTechniqueCount; ++t) {
                report->extraction_seconds[t] += per_image[t];
            }
        }
    }

    FeatureIndex ix;
    // Failures are handled in id order so the outcome is thread-independent.
    for (std::size_t k = 0; k < n; ++k) {
        if (!errors[k]) {
            ix.records.push_back(std::move(records[k]));
            continue;
        }
        if (!options.skip_failed_images) {
            std::rethrow_exception(errors[k]);
        }
        if (report) {
            try {
                std::rethrow_exception(errors[k]);
            } catch (const std::exception& e) {
                report->skipped.push_back({corpus[k].id, e.what()});
            }
        }
    }
    if (ix.records.empty()) {
        throw InvalidArgument("no image in the corpus could be indexed");
    }
    ix.stats = compute_stats(ix.records);
    ix.thresholds = calibrate_thresholds(ix, options.threshold_percentile, options.space,
                                         options.max_calibration_pairs);
    return ix;
}

void write_index(const FeatureIndex& ix, std::ostream& out) {
    out << kMagic << '\t' << ix.format_version << '\n';
    out << "space\t" << space_name(ix.thresholds.space) << '\n';
    for (Technique t : kAllTechniques) {
        out << "threshold\t" << technique_name(t) << '\t' << format_double(ix.thresholds[t]) << '\n';
    }
    out << "records\t" << ix.records.size() << '\n';
    for (const ImageRecord& rec : ix.records) {
        out << "record\t" << escape(rec.id) << '\t' << escape(rec.path) << '\t'
            << (rec.class_label ? escape(*rec.class_label) : std::string(kNoLabel)) << '\n';
        for (Technique t : kAllTechniques) {
            out << "vector\t" << technique_name(t) << '\t' << join_values(rec.vector(t).values)
                << '\n';
        }
    }
    for (Technique t : kAllTechniques) {
        const auto k = technique_index(t);
        out << "min\t" << technique_name(t) << '\t' << join_values(ix.stats.min[k]) << '\n';
        out << "max\t" << technique_name(t) << '\t' << join_values(ix.stats.max[k]) << '\n';
    }
    out << "end\n";
}

FeatureIndex read_index(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&](std::string_view what) -> std::vector<std::string_view> {
        if (!std::getline(in, line)) {
            throw FormatError("unexpected end of index file, expected " + std::string(what));
        }
        ++line_no;
        return split(line, '\t');
    };
    auto expect = [&](const std::vector<std::string_view>& f, std::string_view tag, std::size_t n) {
        if (f.empty() || f[0] != tag || f.size() != n) {
            throw FormatError("line " + std::to_string(line_no) + ": expected '" +
                              std::string(tag) + "' with " + std::to_string(n) + " fields");
        }
    };

    FeatureIndex ix;
    auto header = next("header");
    if (header.size() != 2 || header[0] != kMagic) {
        throw FormatError("not a feature index file (bad magic header)");
    }
    int version = 0;
    auto [p, ec] = std::from_chars(header[1].data(), header[1].data() + header[1].size(), version);
    if (ec != std::errc{} || p != header[1].data() + header[1].size()) {
        throw FormatError("bad format version '" + std::string(header[1]) + "'");
    }
    if (version != kIndexFormatVersion) {
        throw FormatError("unsupported index format version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kIndexFormatVersion) + ")");
    }
    ix.format_version = version;

    auto space = next("space");
    expect(space, "space", 2);
    if (space[1] == "normalized") ix.thresholds.space = DistanceSpace::Normalized;
    else if (space[1] == "raw") ix.thresholds.space = DistanceSpace::Raw;
    else throw FormatError("unknown distance space '" + std::string(space[1]) + "'");

    for (Technique t : kAllTechniques) {
        auto f = next("threshold");
        expect(f, "threshold", 3);
        if (parse_technique_field(f[1]) != t) {
            throw FormatError("thresholds out of order at line " + std::to_string(line_no));
        }
        ix.thresholds[t] = parse_double(f[2]);
    }
    try {
        validate(ix.thresholds);
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }

    auto count_line = next("records");
    expect(count_line, "records", 2);
    std::size_t count = 0;
    {
        auto [q, ec2] = std::from_chars(count_line[1].data(),
                                        count_line[1].data() + count_line[1].size(), count);
        if (ec2 != std::errc{} || q != count_line[1].data() + count_line[1].size()) {
            throw FormatError("bad record count");
        }
    }

    ix.records.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        auto f = next("record");
        expect(f, "record", 4);
        ImageRecord rec;
        rec.id = unescape(f[1]);
        rec.path = unescape(f[2]);
        if (f[3] != kNoLabel) {
            rec.class_label = unescape(f[3]);
        }
        for (Technique t : kAllTechniques) {
            auto v = next("vector");
            expect(v, "vector", 3);
            if (parse_technique_field(v[1]) != t) {
                throw FormatError("vectors out of order at line " + std::to_string(line_no));
            }
            rec.vectors[technique_index(t)] = {t, parse_values(v[2], technique_dim(t))};
        }
        if (!ix.records.empty() && !(ix.records.back().id < rec.id)) {
            throw FormatError("records not in strictly ascending id order at '" + rec.id + "'");
        }
        ix.records.push_back(std::move(rec));
    }

    for (Technique t : kAllTechniques) {
        const auto k = technique_index(t);
        const std::size_t dim = ix.records.empty() ? 0 : technique_dim(t);
        auto lo = next("min");
        expect(lo, "min", 3);
        if (parse_technique_field(lo[1]) != t) throw FormatError("stats out of order");
        ix.stats.min[k] = parse_values(lo[2], dim);
        auto hi = next("max");
        expect(hi, "max", 3);
        if (parse_technique_field(hi[1]) != t) throw FormatError("stats out of order");
        ix.stats.max[k] = parse_values(hi[2], dim);
    }
    auto end = next("end");
    expect(end, "end", 1);

    if (compute_stats(ix.records) != ix.stats) {
        throw FormatError("stored normalization stats do not match the records");
    }
    return ix;
}

void save_index(const FeatureIndex& ix, const std::filesystem::path& destination) {
    // Write to a sibling file and rename so readers never observe a partial index.
    std::filesystem::path tmp = destination;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write index file " + tmp.string());
        }
        write_index(ix, out);
        out.flush();
        if (!out) {
            throw IoError("failed writing index file " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, destination, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot install index file " + destination.string());
    }
}

FeatureIndex load_index(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw IoError("cannot open index file " + source.string());
    }
    return read_index(in);
}

}  // namespace cbir
