#include "cbir/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "cbir/errors.hpp"

namespace fs = std::filesystem;

namespace cbir {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".tif" ||
           ext == ".tiff" || ext == ".ppm" || ext == ".pgm";
}

namespace {

std::optional<std::string> label_for(const fs::path& rel, LabelRule rule) {
    switch (rule) {
        case LabelRule::None:
            return std::nullopt;
        case LabelRule::DirName: {
            fs::path parent = rel.parent_path();
            if (parent.empty()) {
                return std::nullopt;
            }
            return parent.filename().string();
        }
        case LabelRule::WangNumbering: {
            const std::string stem = rel.stem().string();
            unsigned long n = 0;
            auto [p, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), n);
            if (ec != std::errc{} || p != stem.data() + stem.size()) {
                return std::nullopt;
            }
            return "class" + std::to_string(n / 100 + 1);
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<CorpusEntry> scan_corpus(const fs::path& dir, LabelRule rule,
                                     std::vector<LoadFailure>* failures) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw IoError("not a readable directory: " + dir.string());
    }
    std::vector<CorpusEntry> out;
    std::vector<LoadFailure> unlabeled;
    fs::recursive_directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec);
    if (ec) {
        throw IoError("cannot read directory " + dir.string() + ": " + ec.message());
    }
    for (const fs::directory_entry& entry : it) {
        if (!entry.is_regular_file(ec) || !has_image_extension(entry.path())) {
            continue;
        }
        const fs::path rel = entry.path().lexically_relative(dir);
        std::optional<std::string> label = label_for(rel, rule);
        const std::string stored = (dir / rel).lexically_normal().generic_string();
        if (rule != LabelRule::None && !label) {
            unlabeled.push_back({stored, "cannot derive a class label"});
            continue;
        }
        out.push_back({rel.generic_string(), stored, std::move(label)});
    }
    std::sort(out.begin(), out.end(),
              [](const CorpusEntry& a, const CorpusEntry& b) { return a.id < b.id; });
    if (failures) {
        std::sort(unlabeled.begin(), unlabeled.end(),
                  [](const LoadFailure& a, const LoadFailure& b) { return a.path < b.path; });
        failures->insert(failures->end(), unlabeled.begin(), unlabeled.end());
    }
    return out;
}

LoadedCorpus load_corpus(const std::vector<CorpusEntry>& entries) {
    LoadedCorpus out;
    for (const CorpusEntry& e : entries) {
        try {
            out.images.push_back({e.id, e.path, e.class_label, read_image_file(e.path)});
        } catch (const Error& err) {
            out.failures.push_back({e.path, err.what()});
        }
    }
    return out;
}

}  // namespace cbir
