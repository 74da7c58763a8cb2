// cbir: build feature indexes, query them, run the evaluation tables, serve the API.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbir/corpus.hpp"
#include "cbir/evaluation.hpp"
#include "cbir/index.hpp"
#include "cbir/matching.hpp"
#include "cbir/service.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct IndexArgs {
    std::string corpus_dir;
    std::string index_path;
    bool dirname = false;
    bool wang = false;
    double percentile = cbir::kDefaultThresholdPercentile;
    unsigned threads = 0;
};

int run_index(const IndexArgs& a) {
    cbir::LabelRule rule = cbir::LabelRule::None;
    if (a.dirname) rule = cbir::LabelRule::DirName;
    if (a.wang) rule = cbir::LabelRule::WangNumbering;

    std::vector<cbir::LoadFailure> failures;
    auto entries = cbir::scan_corpus(a.corpus_dir, rule, &failures);
    auto loaded = cbir::load_corpus(entries);
    failures.insert(failures.end(), loaded.failures.begin(), loaded.failures.end());

    cbir::BuildOptions options;
    options.threshold_percentile = a.percentile;
    options.threads = a.threads;
    options.skip_failed_images = true;
    cbir::BuildReport report;
    const cbir::FeatureIndex ix = cbir::build_index(std::move(loaded.images), options, &report);
    for (const auto& s : report.skipped) failures.push_back({s.id, s.reason});

    cbir::save_index(ix, a.index_path);

    for (const auto& f : failures) {
        std::cerr << "warning: skipped " << f.path << ": " << f.reason << "\n";
    }
    std::cout << ix.records.size() << " records\n";
    std::cout << "thresholds:\n";
    for (cbir::Technique t : cbir::kAllTechniques) {
        std::cout << "  " << cbir::technique_name(t) << "\t" << fixed(ix.thresholds[t], 6) << "\n";
    }
    return 0;
}

struct QueryArgs {
    std::string image;
    std::string index_path;
    std::string techniques = "all";
    std::string crop;
    std::optional<std::size_t> limit;
};

int run_query(const QueryArgs& a) {
    cbir::TechniqueSet ts;
    std::optional<cbir::CropRect> rect;
    try {
        ts = cbir::parse_technique_set(a.techniques);
        if (!a.crop.empty()) rect = cbir::parse_crop_rect(a.crop);
    } catch (const cbir::Error& e) {
        throw UsageError(e.what());
    }
    const cbir::FeatureIndex ix = cbir::load_index(a.index_path);
    cbir::RasterImage img = cbir::read_image_file(a.image);
    if (rect) img = cbir::crop(img, *rect);

    cbir::RetrievalResult result = cbir::retrieve_combined(img, ix, ts, ix.thresholds);
    const std::size_t total = result.hits.size();
    if (a.limit && result.hits.size() > *a.limit) result.hits.resize(*a.limit);

    std::size_t rank = 1;
    for (const auto& h : result.hits) {
        const cbir::ImageRecord* rec = ix.find(h.id);
        std::cout << rank++ << "\t" << h.id << "\t" << fixed(h.distance, 6) << "\t"
                  << (rec && rec->class_label ? *rec->class_label : "-") << "\n";
    }
    std::cerr << total << " hits for " << ts.to_string() << " in " << fixed(result.elapsed, 4)
              << " s\n";
    return 0;
}

struct EvalArgs {
    std::string index_path;
    std::string queries;
    std::string techniques;
    bool each = false;
    bool combined = false;
    bool optimize = false;
    std::string format = "text";
    bool deterministic_cost = false;
};

cbir::QueryAssignment read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cbir::IoError("cannot read manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw cbir::FormatError("manifest " + path + ": " + e.what());
    }
    if (!j.is_object()) throw cbir::FormatError("manifest must map class labels to image ids");
    cbir::QueryAssignment out;
    for (const auto& [label, id] : j.items()) {
        if (!id.is_string()) throw cbir::FormatError("manifest entry for " + label + " is not a string");
        out[label] = id.get<std::string>();
    }
    return out;
}

int run_eval(const EvalArgs& a) {
    cbir::EvalRequest req;
    if (!a.techniques.empty()) {
        req.mode = cbir::EvalMode::Techniques;
        try {
            req.techniques = cbir::parse_technique_set(a.techniques);
        } catch (const cbir::Error& e) {
            throw UsageError(e.what());
        }
    } else if (a.each) {
        req.mode = cbir::EvalMode::Each;
    } else if (a.optimize) {
        req.mode = cbir::EvalMode::Optimize;
    } else {
        req.mode = cbir::EvalMode::Combined;
    }
    if (a.deterministic_cost) req.options.time_source = cbir::TimeSource::ScanCount;

    const cbir::FeatureIndex ix = cbir::load_index(a.index_path);
    const cbir::QueryAssignment queries = read_manifest(a.queries);
    const cbir::EvaluationReport report = cbir::run_evaluation(ix, queries, ix.thresholds, req);
    if (a.format == "structured") {
        std::cout << cbir::to_json(report).dump(2) << "\n";
    } else {
        std::cout << cbir::render_report_text(report);
    }
    return 0;
}

struct ServeArgs {
    std::string index_path;
    std::string listen = "127.0.0.1:8080";
    std::string corpus_root;
    int thumbnail_size = 256;
};

std::pair<std::string, int> split_address(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw UsageError("--listen expects host:port");
    const std::string port_text = addr.substr(colon + 1);
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(port_text, &used);
        if (used != port_text.size()) port = -1;
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535) throw UsageError("invalid port in --listen: " + addr);
    return {addr.substr(0, colon), port};
}

int run_serve(const ServeArgs& a) {
    const auto [host, port] = split_address(a.listen);

    // Block termination signals before any thread starts so sigwait owns them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    std::shared_ptr<const cbir::FeatureIndex> ix;
    if (fs::exists(a.index_path)) {
        ix = std::make_shared<const cbir::FeatureIndex>(cbir::load_index(a.index_path));
    } else {
        std::cerr << "no index at " << a.index_path << "; starting empty\n";
    }

    cbir::ServiceConfig config;
    config.index_path = a.index_path;
    config.corpus_root = a.corpus_root;
    config.thumbnail_size = a.thumbnail_size;
    cbir::Service service(config, ix);

    const int bound = service.bind(host, port);
    if (bound < 0) {
        std::cerr << "error: cannot listen on " << a.listen << "\n";
        return kRuntimeError;
    }
    std::cerr << "listening on " << host << ":" << bound << "\n";

    std::thread server([&service] { service.run(); });
    int received = 0;
    sigwait(&signals, &received);
    std::cerr << "shutting down\n";
    service.stop();
    server.join();
    service.wait_for_build();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Content-based image retrieval with six feature techniques"};
    app.require_subcommand(1);

    IndexArgs ia;
    auto* index_cmd = app.add_subcommand("index", "Extract features from a corpus and write an index");
    index_cmd->add_option("corpus-dir", ia.corpus_dir, "Directory of images")->required();
    index_cmd->add_option("--index", ia.index_path, "Index file to write")->required();
    auto* by_dir = index_cmd->add_flag("--class-from-dirname", ia.dirname,
                                       "Label images by their parent directory");
    auto* by_num = index_cmd->add_flag("--class-wang-numbering", ia.wang,
                                       "Label images n.jpg as class<n/100+1>");
    by_dir->excludes(by_num);
    index_cmd->add_option("--percentile", ia.percentile, "Percentile of pair distances used as cutoff")
        ->check(CLI::Range(0.0, 100.0));
    index_cmd->add_option("--threads", ia.threads, "Extraction threads (0: all cores)");

    QueryArgs qa;
    auto* query_cmd = app.add_subcommand("query", "Retrieve indexed images similar to an image file");
    query_cmd->add_option("image", qa.image, "Query image file")->required();
    query_cmd->add_option("--index", qa.index_path, "Index file")->required();
    query_cmd->add_option("--techniques", qa.techniques, "Comma-separated techniques or 'all'");
    query_cmd->add_option("--crop", qa.crop, "Region of interest x,y,w,h");
    query_cmd->add_option("--limit", qa.limit, "Print at most N hits");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval against class labels");
    eval_cmd->add_option("--index", ea.index_path, "Index file")->required();
    eval_cmd->add_option("--queries", ea.queries, "JSON manifest mapping class label to query id")
        ->required();
    auto* o_tech = eval_cmd->add_option("--techniques", ea.techniques, "Evaluate one technique set");
    auto* o_each = eval_cmd->add_flag("--each", ea.each, "One table per technique");
    auto* o_comb = eval_cmd->add_flag("--combined", ea.combined, "All six techniques combined");
    auto* o_opt = eval_cmd->add_flag("--optimize", ea.optimize, "Best technique subset per class");
    o_tech->excludes(o_each, o_comb, o_opt);
    o_each->excludes(o_comb, o_opt);
    o_comb->excludes(o_opt);
    eval_cmd->add_option("--format", ea.format, "text or structured")
        ->check(CLI::IsMember({"text", "structured"}));
    eval_cmd->add_flag("--deterministic-cost", ea.deterministic_cost,
                       "Report comparison counts instead of seconds");

    ServeArgs sa;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--index", sa.index_path, "Index file (loaded if present, target of builds)")
        ->required()
        ->envname("CBIR_INDEX");
    serve_cmd->add_option("--listen", sa.listen, "host:port")->envname("CBIR_LISTEN");
    serve_cmd->add_option("--corpus-root", sa.corpus_root, "Base for relative image paths")
        ->envname("CBIR_CORPUS_ROOT");
    serve_cmd->add_option("--thumbnail-size", sa.thumbnail_size, "Longest thumbnail side in pixels")
        ->check(CLI::PositiveNumber)
        ->envname("CBIR_THUMBNAIL_SIZE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*index_cmd) return run_index(ia);
        if (*query_cmd) return run_query(qa);
        if (*eval_cmd) return run_eval(ea);
        if (*serve_cmd) return run_serve(sa);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
