#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include <httplib.h>

#include "cbir/corpus.hpp"
#include "cbir/matching.hpp"
#include "cbir/service.hpp"
#include "cbir/synthetic.hpp"

using namespace cbir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("cbir_service_" + std::to_string(getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                             static_cast<std::streamsize>(bytes.size()));
}

std::string as_string(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

// A running service on an ephemeral port.
class Running {
public:
    explicit Running(ServiceConfig cfg, std::shared_ptr<const FeatureIndex> ix = nullptr)
        : service_(std::move(cfg), std::move(ix)) {
        port_ = service_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { service_.run(); });
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(30, 0);
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }
    Service& service() { return service_; }
    httplib::Client& client() { return *client_; }
    int port() const { return port_; }

private:
    Service service_;
    int port_ = -1;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        corpus_dir_ = new fs::path(scratch("corpus"));
        synthetic::CorpusSpec spec;
        spec.classes = 3;
        spec.per_class = 10;
        spec.width = spec.height = 32;
        spec.seed = 7;
        images_ = new std::vector<synthetic::Image>(synthetic::make_corpus(spec));
        synthetic::write_corpus(*images_, *corpus_dir_);
    }
    static void TearDownTestSuite() {
        fs::remove_all(*corpus_dir_);
        delete corpus_dir_;
        delete images_;
    }

    void SetUp() override {
        server_ = std::make_unique<Running>(ServiceConfig{});
        const auto reply =
            server_->service().build({{"corpus_dir", corpus_dir_->string()}, {"labeling", "dirname"}, {"wait", true}});
        ASSERT_EQ(reply.status, 200) << reply.body.dump();
    }

    httplib::Result query_bytes(const std::string& bytes, const std::string& crop = "",
                                const std::string& techniques = "all") {
        httplib::MultipartFormDataItems items = {{"image", bytes, "q.png", "image/png"},
                                                 {"techniques", techniques, "", ""}};
        if (!crop.empty()) items.push_back({"crop", crop, "", ""});
        return server_->client().Post("/api/query", items);
    }

    static json body(const httplib::Result& r) { return json::parse(r->body); }

    static std::vector<std::string> hit_ids(const json& j) {
        std::vector<std::string> out;
        for (const auto& h : j.at("hits")) out.push_back(h.at("id"));
        return out;
    }

    static fs::path* corpus_dir_;
    static std::vector<synthetic::Image>* images_;
    std::unique_ptr<Running> server_;
};

fs::path* ServiceTest::corpus_dir_ = nullptr;
std::vector<synthetic::Image>* ServiceTest::images_ = nullptr;

}  // namespace

TEST_F(ServiceTest, TechniquesListsSixWithThresholds) {
    auto r = server_->client().Get("/api/techniques");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const json j = body(r);
    ASSERT_EQ(j.size(), 6u);
    const auto ix = server_->service().snapshot();
    const std::vector<int> dims = {3, 9, 16, 1024, 64, 1};
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(j[k].at("dim"), dims[k]);
        EXPECT_EQ(j[k].at("default_threshold").get<double>(), ix->thresholds.cutoff[k]);
    }
}

TEST_F(ServiceTest, StatusReportsReadyIndex) {
    const json j = body(server_->client().Get("/api/index/status"));
    EXPECT_EQ(j.at("state"), "ready");
    EXPECT_EQ(j.at("record_count"), 30);
    EXPECT_EQ(j.at("last_build").at("record_count"), 30);
}

TEST_F(ServiceTest, ImagesListing) {
    const json j = body(server_->client().Get("/api/images"));
    ASSERT_EQ(j.size(), 30u);
    EXPECT_EQ(j[0].at("id"), "class1/00.png");
    EXPECT_EQ(j[0].at("class_label"), "class1");
    EXPECT_EQ(j[0].at("thumbnail"), "/api/images/class1/00.png/thumbnail");
}

TEST_F(ServiceTest, SelfQueryByBytesRanksFirst) {
    const auto& img = (*images_)[13];
    auto r = query_bytes(as_string(encode_png(img.image)));
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const json j = body(r);
    ASSERT_FALSE(j.at("hits").empty());
    EXPECT_EQ(j["hits"][0].at("id"), img.id);
    EXPECT_EQ(j["hits"][0].at("distance"), 0.0);
    EXPECT_EQ(j["hits"][0].at("class_label"), img.class_label);
    EXPECT_EQ(j.at("techniques_used").size(), 6u);
    EXPECT_EQ(j.at("applied_thresholds").size(), 6u);
    EXPECT_GE(j.at("elapsed").get<double>(), 0.0);
}

TEST_F(ServiceTest, FullFrameCropIsIdentical) {
    const auto bytes = as_string(encode_png((*images_)[5].image));
    const json plain = body(query_bytes(bytes));
    const json cropped = body(query_bytes(bytes, "0,0,32,32"));
    EXPECT_EQ(plain.at("hits"), cropped.at("hits"));
}

TEST_F(ServiceTest, CropEquivalenceThroughApi) {
    const RasterImage& full = (*images_)[21].image;
    const CropRect rect{5, 7, 20, 16};
    const json with_rect = body(query_bytes(as_string(encode_png(full)), "5,7,20,16"));
    const json pre_cropped = body(query_bytes(as_string(encode_png(crop(full, rect)))));
    EXPECT_EQ(with_rect.at("hits"), pre_cropped.at("hits"));
}

TEST_F(ServiceTest, QueryErrors) {
    const auto good = as_string(encode_png((*images_)[0].image));
    auto oob = query_bytes(good, "20,20,16,16");
    EXPECT_EQ(oob->status, 400);
    auto malformed_crop = query_bytes(good, "1,2");
    EXPECT_EQ(malformed_crop->status, 400);
    auto junk = query_bytes("this is not an image");
    EXPECT_EQ(junk->status, 415);
    auto bad_technique = query_bytes(good, "", "avgrgb,nope");
    EXPECT_EQ(bad_technique->status, 400);

    httplib::MultipartFormDataItems both = {{"image", good, "q.png", "image/png"},
                                            {"image_id", "class1/00.png", "", ""}};
    EXPECT_EQ(server_->client().Post("/api/query", both)->status, 400);
    EXPECT_EQ(server_->client().Post("/api/query", "{}", "application/json")->status, 400);
    EXPECT_EQ(server_->client().Post("/api/query", "{not json", "application/json")->status, 400);
    EXPECT_EQ(server_->client()
                  .Post("/api/query", R"({"image_id":"class9/99.png"})", "application/json")
                  ->status,
              404);
    EXPECT_EQ(server_->client()
                  .Post("/api/query", R"({"image_id":"class1/00.png","thresholds":{"avgrgb":-1}})",
                        "application/json")
                  ->status,
              400);
}

TEST_F(ServiceTest, QueryByIdMatchesQueryByBytes) {
    const auto& img = (*images_)[17];
    const json by_bytes = body(query_bytes(as_string(encode_png(img.image))));
    const json req = {{"image_id", img.id}, {"techniques", {"avgrgb", "gch", "cooccurrence"}}};
    const json by_id = body(server_->client().Post("/api/query", req.dump(), "application/json"));
    const json by_bytes_sub = body(query_bytes(as_string(encode_png(img.image)), "", "avgrgb,gch,cooccurrence"));
    EXPECT_EQ(by_id.at("hits"), by_bytes_sub.at("hits"));
    EXPECT_GE(by_id.at("hits").size(), by_bytes.at("hits").size());

    const json cropped = {{"image_id", img.id}, {"crop", "0,0,32,32"}};
    const json by_id_cropped = body(server_->client().Post("/api/query", cropped.dump(), "application/json"));
    EXPECT_EQ(by_id_cropped.at("hits"), by_bytes.at("hits"));
}

TEST_F(ServiceTest, LimitAndThresholdOverrides) {
    const json loose = {{"image_id", "class2/03.png"},
                        {"techniques", "avgrgb"},
                        {"thresholds", {{"avgrgb", 10.0}}},
                        {"limit", 4}};
    const json j = body(server_->client().Post("/api/query", loose.dump(), "application/json"));
    EXPECT_EQ(j.at("hits").size(), 4u);
    EXPECT_EQ(j.at("total_hits"), 30);
    EXPECT_EQ(j.at("applied_thresholds").at("avgrgb"), 10.0);
    double prev = -1;
    for (const auto& h : j.at("hits")) {
        EXPECT_GE(h.at("distance").get<double>(), prev);
        prev = h.at("distance");
    }
}

TEST_F(ServiceTest, IdenticalRequestsIdenticalHitsUnderConcurrency) {
    const json req = {{"image_id", "class3/02.png"}};
    const json first = body(server_->client().Post("/api/query", req.dump(), "application/json"));
    std::vector<std::thread> workers;
    std::vector<json> results(4);
    for (int w = 0; w < 4; ++w) {
        workers.emplace_back([&, w] {
            httplib::Client c("127.0.0.1", server_->port());
            auto r = c.Post("/api/query", req.dump(), "application/json");
            if (r) results[w] = json::parse(r->body);
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& r : results) EXPECT_EQ(r.at("hits"), first.at("hits"));
}

TEST_F(ServiceTest, OriginalAndThumbnailBytes) {
    auto orig = server_->client().Get("/api/images/class1/04.png");
    ASSERT_EQ(orig->status, 200);
    EXPECT_EQ(orig->get_header_value("Content-Type"), "image/png");
    const RasterImage decoded = decode_image(std::span(
        reinterpret_cast<const std::uint8_t*>(orig->body.data()), orig->body.size()));
    EXPECT_EQ(decoded, (*images_)[4].image);

    auto thumb = server_->client().Get("/api/images/class1/04.png/thumbnail");
    ASSERT_EQ(thumb->status, 200);
    EXPECT_EQ(thumb->get_header_value("Content-Type"), "image/jpeg");

    EXPECT_EQ(server_->client().Get("/api/images/nope.png")->status, 404);
    EXPECT_EQ(server_->client().Get("/api/images/nope.png/thumbnail")->status, 404);
}

TEST_F(ServiceTest, EvaluateMatchesSharedEvaluationPath) {
    json queries = json::object();
    queries["class1"] = "class1/00.png";
    queries["class2"] = "class2/00.png";
    queries["class3"] = "class3/00.png";
    const json req = {{"mode", "combined"}, {"queries", queries}, {"deterministic_cost", true}};
    auto r = server_->client().Post("/api/evaluate", req.dump(), "application/json");
    ASSERT_EQ(r->status, 200) << r->body;

    EvalRequest er;
    er.mode = EvalMode::Combined;
    er.options.time_source = TimeSource::ScanCount;
    const auto ix = server_->service().snapshot();
    const QueryAssignment qa{{"class1", "class1/00.png"}, {"class2", "class2/00.png"}, {"class3", "class3/00.png"}};
    EXPECT_EQ(json::parse(r->body), to_json(run_evaluation(*ix, qa, ix->thresholds, er)));

    const json opt = {{"mode", "optimize"}, {"queries", queries}, {"deterministic_cost", true}};
    const json o = body(server_->client().Post("/api/evaluate", opt.dump(), "application/json"));
    EXPECT_EQ(o.at("outcomes").size(), 3u);

    const json bad = {{"mode", "combined"}, {"queries", {{"class1", "class2/00.png"}}}};
    EXPECT_EQ(server_->client().Post("/api/evaluate", bad.dump(), "application/json")->status, 400);
    const json bad_mode = {{"mode", "sideways"}, {"queries", queries}};
    EXPECT_EQ(server_->client().Post("/api/evaluate", bad_mode.dump(), "application/json")->status, 400);
}

TEST(ServiceNoIndex, QueriesConflictUntilBuilt) {
    Running server(ServiceConfig{});
    EXPECT_EQ(json::parse(server.client().Get("/api/index/status")->body).at("state"), "idle");
    EXPECT_EQ(server.client().Post("/api/query", R"({"image_id":"a"})", "application/json")->status, 409);
    EXPECT_EQ(server.client().Post("/api/evaluate", R"({"queries":{}})", "application/json")->status, 409);
    const json t = json::parse(server.client().Get("/api/techniques")->body);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_TRUE(t[0].at("default_threshold").is_null());
}

TEST(ServiceBuild, SummaryFailuresAndErrors) {
    const fs::path dir = scratch("build");
    for (int i = 0; i < 9; ++i) write_bytes(dir / ("ok" + std::to_string(i) + ".png"), encode_png(synthetic::random_image(12, 12, i)));
    std::ofstream(dir / "corrupt.png") << "garbage";
    const fs::path empty = scratch("empty");
    const fs::path saved = scratch("saved") / "built.idx";

    ServiceConfig cfg;
    cfg.index_path = saved;
    Running server(cfg);
    auto post = [&](const json& j) { return server.client().Post("/api/index/build", j.dump(), "application/json"); };

    auto ok = post({{"corpus_dir", dir.string()}, {"wait", true}});
    ASSERT_EQ(ok->status, 200) << ok->body;
    const json summary = json::parse(ok->body);
    EXPECT_EQ(summary.at("record_count"), 9);
    ASSERT_EQ(summary.at("failures").size(), 1u);
    EXPECT_NE(summary["failures"][0].at("path").get<std::string>().find("corrupt.png"), std::string::npos);
    EXPECT_EQ(summary.at("timings").size(), 6u);
    EXPECT_TRUE(fs::exists(saved));
    EXPECT_EQ(load_index(saved).records.size(), 9u);

    EXPECT_EQ(post({{"corpus_dir", empty.string()}})->status, 400);
    EXPECT_EQ(post({{"corpus_dir", (empty / "missing").string()}})->status, 400);
    EXPECT_EQ(post({{"corpus_dir", dir.string()}, {"labeling", "astrology"}})->status, 400);
    EXPECT_EQ(server.client().Post("/api/index/build", "nope", "application/json")->status, 400);

    fs::remove_all(dir);
    fs::remove_all(empty);
    fs::remove_all(saved.parent_path());
}

TEST(ServiceBuild, AsyncBuildSwapsAtomicallyAndRejectsOverlap) {
    const fs::path dir = scratch("async");
    synthetic::CorpusSpec spec;
    spec.classes = 4;
    spec.per_class = 50;
    synthetic::write_corpus(synthetic::make_corpus(spec), dir);

    Service service(ServiceConfig{});
    const auto first = service.build({{"corpus_dir", dir.string()}, {"labeling", "dirname"}});
    EXPECT_EQ(first.status, 202);
    const auto second = service.build({{"corpus_dir", dir.string()}});
    EXPECT_EQ(second.status, 409);
    const auto during = service.status().body;
    EXPECT_TRUE(during.at("state") == "building" || during.at("state") == "ready");
    service.wait_for_build();
    const auto after = service.status().body;
    EXPECT_EQ(after.at("state"), "ready");
    EXPECT_EQ(after.at("record_count"), 200);
    EXPECT_TRUE(service.snapshot()->labeled());
    fs::remove_all(dir);
}

TEST(ServiceBuild, UnlabeledIndexCannotBeEvaluated) {
    const fs::path dir = scratch("unlabeled");
    for (int i = 0; i < 4; ++i) write_bytes(dir / ("u" + std::to_string(i) + ".png"), encode_png(synthetic::random_image(8, 8, i)));
    Service service(ServiceConfig{});
    ASSERT_EQ(service.build({{"corpus_dir", dir.string()}, {"wait", true}}).status, 200);
    const auto r = service.evaluate({{"mode", "combined"}, {"queries", {{"x", "u0.png"}}}});
    EXPECT_EQ(r.status, 409);
    fs::remove_all(dir);
}

TEST(ServiceThumbnails, LongestSideBounded) {
    const fs::path dir = scratch("thumbs");
    write_bytes(dir / "wide.png", encode_png(RasterImage(1024, 512, Rgb{40, 80, 120})));
    ServiceConfig cfg;
    cfg.corpus_root = dir;
    Running server(cfg);
    ASSERT_EQ(server.service().build({{"corpus_dir", dir.string()}, {"wait", true}}).status, 200);
    auto r = server.client().Get("/api/images/wide.png/thumbnail");
    ASSERT_EQ(r->status, 200);
    const RasterImage t = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(r->body.data()), r->body.size()));
    EXPECT_EQ(t.width(), 256);
    EXPECT_EQ(t.height(), 128);
    fs::remove_all(dir);
}
