// cbir-synth: write the labeled synthetic corpus as PNG files, plus a query manifest.

#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbir/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a labeled synthetic image corpus"};
    std::string out_dir;
    std::string manifest;
    cbir::synthetic::CorpusSpec spec;
    app.add_option("out-dir", out_dir, "Output directory")->required();
    app.add_option("--classes", spec.classes, "Number of classes")->check(CLI::Range(1, 1000));
    app.add_option("--per-class", spec.per_class, "Images per class")->check(CLI::Range(1, 10000));
    app.add_option("--size", spec.width, "Image side in pixels")->check(CLI::Range(4, 4096));
    app.add_option("--seed", spec.seed, "Generator seed");
    app.add_option("--manifest", manifest, "Also write a manifest naming the first image of each class");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    spec.height = spec.width;

    try {
        const auto images = cbir::synthetic::make_corpus(spec);
        cbir::synthetic::write_corpus(images, out_dir);
        if (!manifest.empty()) {
            nlohmann::json j = nlohmann::json::object();
            for (const auto& img : images) {
                if (!j.contains(img.class_label)) j[img.class_label] = img.id;
            }
            std::ofstream(manifest) << j.dump(2) << "\n";
        }
        std::cout << images.size() << " images written to " << out_dir << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
