#include "cbir/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>

#include "cbir/errors.hpp"

namespace fs = std::filesystem;

namespace cbir::synthetic {

namespace {

struct Palette {
    Rgb background;
    Rgb foreground;
};

constexpr std::array<Palette, 6> kPalettes = {{
    {{40, 110, 40}, {200, 190, 60}},   // grass / yellow
    {{30, 60, 150}, {220, 220, 230}},  // sky / cloud
    {{120, 70, 30}, {230, 160, 90}},   // earth / sand
    {{150, 30, 40}, {250, 200, 200}},  // red / pink
    {{60, 60, 60}, {160, 200, 220}},   // slate / ice
    {{90, 20, 110}, {240, 230, 120}},  // purple / lemon
}};

enum class Texture { FineStripes, CoarseChecker, Blob };

constexpr std::array<Texture, 3> kTextures = {Texture::FineStripes, Texture::CoarseChecker,
                                              Texture::Blob};

std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

Rgb jitter(const Rgb& c, int dr, int dg, int db) {
    return {clamp_byte(c.r + dr), clamp_byte(c.g + dg), clamp_byte(c.b + db)};
}

}  // namespace

std::vector<Image> make_corpus(const CorpusSpec& spec) {
    if (spec.classes < 1 || spec.per_class < 1 || spec.width < 4 || spec.height < 4) {
        throw InvalidArgument("synthetic corpus needs >= 1 class, >= 1 image, >= 4x4 pixels");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> color_jitter(-14, 14);
    std::uniform_int_distribution<int> noise(-10, 10);

    std::vector<Image> out;
    for (int c = 0; c < spec.classes; ++c) {
        // Classes 2k and 2k+1 share a palette and differ in texture.
        const Palette& pal = kPalettes[static_cast<std::size_t>(c / 2) % kPalettes.size()];
        const Texture tex = kTextures[static_cast<std::size_t>(c % 2 + c / 12) % kTextures.size()];
        const std::string label = "class" + std::to_string(c + 1);

        for (int k = 0; k < spec.per_class; ++k) {
            const Rgb bg = jitter(pal.background, color_jitter(rng), color_jitter(rng), color_jitter(rng));
            const Rgb fg = jitter(pal.foreground, color_jitter(rng), color_jitter(rng), color_jitter(rng));
            std::uniform_int_distribution<int> phase(0, 15);
            const int px = phase(rng);
            const int py = phase(rng);
            const int cx = spec.width / 4 + phase(rng) % std::max(1, spec.width / 2);
            const int cy = spec.height / 4 + phase(rng) % std::max(1, spec.height / 2);
            const int radius = std::min(spec.width, spec.height) / 3;

            RasterImage img(spec.width, spec.height);
            for (int y = 0; y < spec.height; ++y) {
                for (int x = 0; x < spec.width; ++x) {
                    bool on = false;
                    switch (tex) {
                        case Texture::FineStripes:
                            on = ((x + px) / 2) % 2 == 0;
                            break;
                        case Texture::CoarseChecker:
                            on = (((x + px) / 8) + ((y + py) / 8)) % 2 == 0;
                            break;
                        case Texture::Blob: {
                            const int dx = x - cx;
                            const int dy = y - cy;
                            on = dx * dx + dy * dy <= radius * radius;
                            break;
                        }
                    }
                    const Rgb base = on ? fg : bg;
                    const int n = noise(rng);
                    img.at(x, y) = jitter(base, n, n, n);
                }
            }
            char name[32];
            std::snprintf(name, sizeof(name), "%02d.png", k);
            out.push_back({label + "/" + name, label, std::move(img)});
        }
    }
    return out;
}

void write_corpus(const std::vector<Image>& images, const fs::path& dir) {
    for (const Image& im : images) {
        const fs::path path = dir / im.id;
        fs::create_directories(path.parent_path());
        const auto bytes = encode_png(im.image);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
    }
}

RasterImage random_image(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    RasterImage img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.at(x, y) = Rgb{static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                               static_cast<std::uint8_t>(byte(rng))};
        }
    }
    return img;
}

}  // namespace cbir::synthetic
