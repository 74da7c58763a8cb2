#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cbir/corpus.hpp"
#include "cbir/errors.hpp"
#include "cbir/synthetic.hpp"

using namespace cbir;
namespace fs = std::filesystem;

namespace {

class CorpusDir : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("cbir_corpus_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    void put_png(const fs::path& rel, std::uint64_t seed) {
        fs::create_directories((root_ / rel).parent_path());
        const auto bytes = encode_png(synthetic::random_image(8, 8, seed));
        std::ofstream(root_ / rel, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                           static_cast<std::streamsize>(bytes.size()));
    }
    void put_text(const fs::path& rel, const std::string& text) {
        fs::create_directories((root_ / rel).parent_path());
        std::ofstream(root_ / rel) << text;
    }

    fs::path root_;
};

}  // namespace

TEST(Extensions, CaseInsensitive) {
    EXPECT_TRUE(has_image_extension("a/B.JPG"));
    EXPECT_TRUE(has_image_extension("x.png"));
    EXPECT_TRUE(has_image_extension("x.jpeg"));
    EXPECT_FALSE(has_image_extension("notes.txt"));
    EXPECT_FALSE(has_image_extension("noext"));
}

TEST_F(CorpusDir, DirNameLabels) {
    put_png("beach/2.png", 1);
    put_png("beach/10.png", 2);
    put_png("bus/1.png", 3);
    put_text("bus/readme.txt", "ignored");
    const auto entries = scan_corpus(root_, LabelRule::DirName);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].id, "beach/10.png");
    EXPECT_EQ(entries[0].class_label, "beach");
    EXPECT_EQ(entries[2].id, "bus/1.png");
    EXPECT_EQ(entries[2].class_label, "bus");
    EXPECT_EQ(entries[2].path, (root_ / "bus/1.png").lexically_normal().generic_string());
}

TEST_F(CorpusDir, DirNameNeedsASubdirectory) {
    put_png("top.png", 1);
    put_png("cls/a.png", 2);
    std::vector<LoadFailure> failures;
    const auto entries = scan_corpus(root_, LabelRule::DirName, &failures);
    ASSERT_EQ(entries.size(), 1u);
    ASSERT_EQ(failures.size(), 1u);
    EXPECT_NE(failures[0].path.find("top.png"), std::string::npos);
}

TEST_F(CorpusDir, WangNumbering) {
    put_png("0.jpg", 1);
    put_png("99.jpg", 2);
    put_png("100.jpg", 3);
    put_png("999.jpg", 4);
    put_png("cover.jpg", 5);
    std::vector<LoadFailure> failures;
    const auto entries = scan_corpus(root_, LabelRule::WangNumbering, &failures);
    ASSERT_EQ(entries.size(), 4u);
    std::map<std::string, std::string> labels;
    for (const auto& e : entries) labels[e.id] = *e.class_label;
    EXPECT_EQ(labels["0.jpg"], "class1");
    EXPECT_EQ(labels["99.jpg"], "class1");
    EXPECT_EQ(labels["100.jpg"], "class2");
    EXPECT_EQ(labels["999.jpg"], "class10");
    EXPECT_EQ(failures.size(), 1u);
}

TEST_F(CorpusDir, UnlabeledScanAndCorruptFiles) {
    for (int i = 0; i < 9; ++i) put_png("img" + std::to_string(i) + ".png", i);
    put_text("broken.png", "definitely not a png");
    const auto entries = scan_corpus(root_, LabelRule::None);
    EXPECT_EQ(entries.size(), 10u);
    for (const auto& e : entries) EXPECT_FALSE(e.class_label.has_value());
    const LoadedCorpus loaded = load_corpus(entries);
    EXPECT_EQ(loaded.images.size(), 9u);
    ASSERT_EQ(loaded.failures.size(), 1u);
    EXPECT_NE(loaded.failures[0].path.find("broken.png"), std::string::npos);
}

TEST_F(CorpusDir, MissingDirectory) {
    EXPECT_THROW(scan_corpus(root_ / "absent", LabelRule::None), IoError);
    put_text("file.txt", "x");
    EXPECT_THROW(scan_corpus(root_ / "file.txt", LabelRule::None), IoError);
}

TEST_F(CorpusDir, SyntheticWriterProducesLabeledTree) {
    synthetic::CorpusSpec spec;
    spec.classes = 3;
    spec.per_class = 4;
    spec.width = spec.height = 16;
    const auto images = synthetic::make_corpus(spec);
    synthetic::write_corpus(images, root_);
    const auto entries = scan_corpus(root_, LabelRule::DirName);
    ASSERT_EQ(entries.size(), 12u);
    const LoadedCorpus loaded = load_corpus(entries);
    ASSERT_EQ(loaded.images.size(), 12u);
    for (const auto& img : images) {
        const auto it = std::find_if(loaded.images.begin(), loaded.images.end(),
                                     [&](const CorpusImage& c) { return c.id == img.id; });
        ASSERT_NE(it, loaded.images.end()) << img.id;
        EXPECT_EQ(it->image, img.image);
        EXPECT_EQ(it->class_label, img.class_label);
    }
}

TEST(Synthetic, DeterministicForSeed) {
    synthetic::CorpusSpec spec;
    spec.classes = 4;
    spec.per_class = 3;
    const auto a = synthetic::make_corpus(spec);
    const auto b = synthetic::make_corpus(spec);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].image, b[i].image);
    }
    spec.seed += 1;
    EXPECT_NE(synthetic::make_corpus(spec)[0].image, a[0].image);
}
