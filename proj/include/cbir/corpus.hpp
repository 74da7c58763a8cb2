#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbir/index.hpp"

namespace cbir {

enum class LabelRule {
    None,
    DirName,        // parent directory name, e.g. beach/12.jpg -> "beach"
    WangNumbering,  // numeric file stem n -> "class<n/100 + 1>"
};

struct CorpusEntry {
    std::string id;    // path relative to the corpus root, '/' separated
    std::string path;  // path as stored in the index
    std::optional<std::string> class_label;
};

struct LoadFailure {
    std::string path;
    std::string reason;
};

struct LoadedCorpus {
    std::vector<CorpusImage> images;
    std::vector<LoadFailure> failures;
};

bool has_image_extension(const std::filesystem::path& p);

// Recursively lists image files under dir, sorted by id. Throws IoError when
// dir is not a readable directory. Files the label rule cannot label are
// reported as failures rather than silently dropped.
std::vector<CorpusEntry> scan_corpus(const std::filesystem::path& dir, LabelRule rule,
                                     std::vector<LoadFailure>* failures = nullptr);

// Decodes every entry; undecodable files become failures.
LoadedCorpus load_corpus(const std::vector<CorpusEntry>& entries);

}  // namespace cbir
