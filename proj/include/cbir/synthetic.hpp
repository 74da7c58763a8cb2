#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbir/imaging.hpp"

namespace cbir::synthetic {

// Labeled corpus of generated images. Classes are built from a palette and a
// texture; pairs of classes share a palette, so color-only techniques confuse
// them while texture-sensitive ones do not, and vice versa.
struct CorpusSpec {
    int classes = 10;
    int per_class = 20;
    int width = 48;
    int height = 48;
    std::uint64_t seed = 20130917;
};

struct Image {
    std::string id;           // "<label>/<nn>.png"
    std::string class_label;  // "class<k>", k from 1
    RasterImage image;
};

std::vector<Image> make_corpus(const CorpusSpec& spec);

// Writes images as PNG under dir/<label>/<nn>.png.
void write_corpus(const std::vector<Image>& images, const std::filesystem::path& dir);

// Uniformly random image, used by property tests.
RasterImage random_image(int width, int height, std::uint64_t seed);

}  // namespace cbir::synthetic
