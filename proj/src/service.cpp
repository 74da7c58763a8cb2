#include "cbir/service.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iterator>

#include <httplib.h>

#include "cbir/errors.hpp"
#include "cbir/matching.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cbir {

namespace {

json error_body(const std::string& message) { return {{"error", message}}; }

Service::Reply fail(int status, const std::string& message) { return {status, error_body(message)}; }

std::string content_type_for(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    return "application/octet-stream";
}

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

json thresholds_json(const ThresholdConfig& cfg) {
    json out = json::object();
    for (Technique t : kAllTechniques) {
        out[std::string(technique_name(t))] = cfg[t];
    }
    return out;
}

std::optional<LabelRule> parse_label_rule(const std::string& name) {
    if (name == "none") return LabelRule::None;
    if (name == "dirname") return LabelRule::DirName;
    if (name == "wang") return LabelRule::WangNumbering;
    return std::nullopt;
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

TechniqueSet techniques_from_json(const json& j) {
    if (j.is_string()) {
        return parse_technique_set(j.get<std::string>());
    }
    if (!j.is_array()) {
        throw InvalidArgument("techniques must be a list or a comma-separated string");
    }
    TechniqueSet ts;
    for (const json& name : j) {
        if (!name.is_string()) {
            throw InvalidArgument("technique names must be strings");
        }
        auto t = parse_technique(name.get<std::string>());
        if (!t) {
            throw UnknownTechnique("unknown technique '" + name.get<std::string>() + "'");
        }
        ts.insert(*t);
    }
    return ts;
}

std::size_t parse_limit(const std::string& text) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
        throw InvalidArgument("limit must be a non-negative integer");
    }
    return v;
}

QueryRequest parse_json_query(const std::string& body) {
    const json j = json::parse(body);
    if (!j.is_object()) {
        throw InvalidArgument("query body must be an object");
    }
    QueryRequest q;
    if (j.contains("image_id")) q.image_id = j.at("image_id").get<std::string>();
    if (j.contains("crop") && !j.at("crop").is_null()) {
        const json& c = j.at("crop");
        if (c.is_string()) {
            q.crop = parse_crop_rect(c.get<std::string>());
        } else {
            q.crop = CropRect{c.at("x").get<int>(), c.at("y").get<int>(), c.at("w").get<int>(),
                              c.at("h").get<int>()};
        }
    }
    if (j.contains("techniques")) q.techniques = techniques_from_json(j.at("techniques"));
    if (j.contains("thresholds")) q.threshold_overrides = j.at("thresholds");
    if (j.contains("limit") && !j.at("limit").is_null()) q.limit = j.at("limit").get<std::size_t>();
    return q;
}

QueryRequest parse_multipart_query(const httplib::Request& req) {
    QueryRequest q;
    if (req.has_file("image")) q.image_bytes = req.get_file_value("image").content;
    if (req.has_file("image_id")) q.image_id = req.get_file_value("image_id").content;
    if (req.has_file("crop")) {
        const std::string text = req.get_file_value("crop").content;
        if (!text.empty()) q.crop = parse_crop_rect(text);
    }
    if (req.has_file("techniques")) {
        q.techniques = parse_technique_set(req.get_file_value("techniques").content);
    }
    if (req.has_file("thresholds")) {
        q.threshold_overrides = json::parse(req.get_file_value("thresholds").content);
    }
    if (req.has_file("limit")) {
        const std::string text = req.get_file_value("limit").content;
        if (!text.empty()) q.limit = parse_limit(text);
    }
    return q;
}

// Percent-encodes an image id for use in a URL path; '/' is kept so ids read
// naturally as nested paths.
std::string path_escape(const std::string& id) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : id) {
        if (std::isalnum(c) || c == '/' || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string image_url(const std::string& id) { return "/api/images/" + path_escape(id); }
std::string thumbnail_url(const std::string& id) { return image_url(id) + "/thumbnail"; }

void send(httplib::Response& res, const Service::Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

}  // namespace

Service::Service(ServiceConfig config, std::shared_ptr<const FeatureIndex> index)
    : config_(std::move(config)), http_(std::make_unique<httplib::Server>()), index_(std::move(index)) {
    register_routes();
}

Service::~Service() {
    stop();
    wait_for_build();
}

std::shared_ptr<const FeatureIndex> Service::snapshot() const {
    std::lock_guard lock(index_mutex_);
    return index_;
}

void Service::install(std::shared_ptr<const FeatureIndex> index) {
    std::lock_guard lock(index_mutex_);
    index_ = std::move(index);
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        return http_->bind_to_any_port(host);
    }
    return http_->bind_to_port(host, port) ? port : -1;
}

bool Service::run() { return http_->listen_after_bind(); }

void Service::stop() {
    if (http_) {
        http_->stop();
    }
}

void Service::wait_for_build() {
    std::thread t;
    {
        std::lock_guard lock(build_mutex_);
        t = std::move(builder_);
    }
    if (t.joinable()) {
        t.join();
    }
}

fs::path Service::resolve(const ImageRecord& rec) const {
    if (config_.corpus_root.empty()) {
        return rec.path;
    }
    return config_.corpus_root / rec.id;
}

Service::Reply Service::techniques() const {
    const auto ix = snapshot();
    json list = json::array();
    for (Technique t : kAllTechniques) {
        json entry = {{"name", technique_name(t)},
                      {"label", technique_label(t)},
                      {"dim", technique_dim(t)},
                      {"default_threshold", nullptr}};
        if (ix) entry["default_threshold"] = ix->thresholds[t];
        list.push_back(std::move(entry));
    }
    return {200, list};
}

Service::Reply Service::status() const {
    const auto ix = snapshot();
    std::lock_guard lock(build_mutex_);
    std::string state = building_ ? "building" : (ix ? "ready" : "idle");
    json body = {{"state", state}, {"record_count", ix ? ix->records.size() : 0}};
    if (!last_build_.is_null()) body["last_build"] = last_build_;
    if (!build_error_.empty()) body["last_error"] = build_error_;
    return {200, body};
}

Service::Reply Service::images() const {
    const auto ix = snapshot();
    if (!ix) {
        return fail(409, "no index installed");
    }
    json list = json::array();
    for (const ImageRecord& rec : ix->records) {
        list.push_back({{"id", rec.id},
                        {"class_label", rec.class_label ? json(*rec.class_label) : json(nullptr)},
                        {"image", image_url(rec.id)},
                        {"thumbnail", thumbnail_url(rec.id)}});
    }
    return {200, list};
}

Service::Reply Service::query(const QueryRequest& request) const {
    const auto ix = snapshot();
    if (!ix) {
        return fail(409, "no index installed");
    }
    if (request.image_id.has_value() == request.image_bytes.has_value()) {
        return fail(400, "exactly one of an uploaded image or image_id is required");
    }
    if (request.techniques.empty()) {
        return fail(400, "at least one technique is required");
    }

    ThresholdConfig cfg = ix->thresholds;
    if (!request.threshold_overrides.is_object()) {
        return fail(400, "thresholds must be an object mapping technique names to cutoffs");
    }
    for (const auto& [name, value] : request.threshold_overrides.items()) {
        auto t = parse_technique(name);
        if (!t) return fail(400, "unknown technique '" + name + "' in thresholds");
        if (!value.is_number() || !(value.get<double>() >= 0.0) ||
            !std::isfinite(value.get<double>())) {
            return fail(400, "threshold for '" + name + "' must be a non-negative number");
        }
        cfg[*t] = value.get<double>();
    }

    RetrievalResult result;
    try {
        std::optional<RasterImage> image;
        if (request.image_bytes) {
            image = decode_image(as_bytes(*request.image_bytes));
        } else {
            const ImageRecord* rec = ix->find(*request.image_id);
            if (!rec) return fail(404, "unknown image id '" + *request.image_id + "'");
            if (request.crop) {
                image = read_image_file(resolve(*rec).string());
            } else {
                result = retrieve_combined(rec->vectors, *ix, request.techniques, cfg);
            }
        }
        if (image) {
            if (request.crop) {
                *image = crop(*image, *request.crop);
            }
            result = retrieve_combined(*image, *ix, request.techniques, cfg);
        }
    } catch (const DecodeError& e) {
        return fail(415, e.what());
    } catch (const IoError& e) {
        return fail(404, e.what());
    } catch (const OutOfBounds& e) {
        return fail(400, e.what());
    } catch (const ExtractionError& e) {
        return fail(400, e.what());
    } catch (const Error& e) {
        return fail(400, e.what());
    }

    const std::size_t total = result.hits.size();
    if (request.limit && result.hits.size() > *request.limit) {
        result.hits.resize(*request.limit);
    }
    json hits = json::array();
    for (const Hit& h : result.hits) {
        const ImageRecord* rec = ix->find(h.id);
        hits.push_back({{"id", h.id},
                        {"distance", h.distance},
                        {"class_label", rec && rec->class_label ? json(*rec->class_label) : json(nullptr)},
                        {"thumbnail", thumbnail_url(h.id)}});
    }
    json used = json::array();
    for (Technique t : request.techniques.members()) used.push_back(technique_name(t));
    json applied = json::object();
    for (Technique t : request.techniques.members()) applied[std::string(technique_name(t))] = cfg[t];
    return {200,
            {{"hits", hits},
             {"total_hits", total},
             {"elapsed", result.elapsed},
             {"techniques_used", used},
             {"applied_thresholds", applied}}};
}

Service::Reply Service::evaluate(const json& request) const {
    const auto ix = snapshot();
    if (!ix) {
        return fail(409, "no index installed");
    }
    if (!ix->labeled()) {
        return fail(409, "index has no class labels");
    }
    try {
        EvalRequest req;
        const std::string mode = request.value("mode", std::string("combined"));
        auto m = parse_mode(mode);
        if (!m) return fail(400, "unknown evaluation mode '" + mode + "'");
        req.mode = *m;
        if (request.contains("techniques")) {
            req.techniques = techniques_from_json(request.at("techniques"));
        }
        if (request.value("deterministic_cost", false)) {
            req.options.time_source = TimeSource::ScanCount;
        }
        if (request.contains("accuracy_cap")) {
            const json& cap = request.at("accuracy_cap");
            req.options.accuracy_cap =
                cap.is_null() ? std::nullopt : std::optional<std::size_t>(cap.get<std::size_t>());
        }
        if (!request.contains("queries") || !request.at("queries").is_object()) {
            return fail(400, "queries must map class labels to image ids");
        }
        QueryAssignment queries;
        for (const auto& [label, id] : request.at("queries").items()) {
            queries[label] = id.get<std::string>();
        }
        return {200, to_json(run_evaluation(*ix, queries, ix->thresholds, req))};
    } catch (const json::exception& e) {
        return fail(400, e.what());
    } catch (const Error& e) {
        return fail(400, e.what());
    }
}

Service::Reply Service::build(const json& request) {
    if (!request.is_object() || !request.contains("corpus_dir") || !request.at("corpus_dir").is_string()) {
        return fail(400, "corpus_dir is required");
    }
    const fs::path dir = request.at("corpus_dir").get<std::string>();
    const std::string rule_name = request.value("labeling", std::string("none"));
    const auto rule = parse_label_rule(rule_name);
    if (!rule) {
        return fail(400, "labeling must be one of none, dirname, wang");
    }
    const bool wait = request.value("wait", false);

    std::vector<LoadFailure> scan_failures;
    std::vector<CorpusEntry> entries;
    try {
        entries = scan_corpus(dir, *rule, &scan_failures);
    } catch (const IoError& e) {
        return fail(400, e.what());
    }
    if (entries.empty()) {
        return fail(400, "no images found in " + dir.string());
    }

    bool expected = false;
    if (!building_.compare_exchange_strong(expected, true)) {
        return fail(409, "an index build is already in progress");
    }
    wait_for_build();

    auto job = [this, entries = std::move(entries), scan_failures = std::move(scan_failures)]() mutable {
        json summary;
        std::string error;
        try {
            LoadedCorpus loaded = load_corpus(entries);
            BuildOptions options = config_.build;
            options.skip_failed_images = true;
            json failures = json::array();
            for (const auto& f : scan_failures) failures.push_back({{"path", f.path}, {"reason", f.reason}});
            for (const auto& f : loaded.failures) failures.push_back({{"path", f.path}, {"reason", f.reason}});
            if (loaded.images.empty()) {
                throw InvalidArgument("no image in the corpus could be decoded");
            }
            BuildReport report;
            auto ix = std::make_shared<const FeatureIndex>(
                build_index(std::move(loaded.images), options, &report));
            for (const auto& s : report.skipped) failures.push_back({{"path", s.id}, {"reason", s.reason}});
            if (!config_.index_path.empty()) {
                save_index(*ix, config_.index_path);
            }
            json timings = json::object();
            for (Technique t : kAllTechniques) {
                timings[std::string(technique_name(t))] = report.extraction_seconds[technique_index(t)];
            }
            summary = {{"record_count", ix->records.size()},
                       {"failures", failures},
                       {"timings", timings},
                       {"thresholds", thresholds_json(ix->thresholds)}};
            install(std::move(ix));
        } catch (const std::exception& e) {
            error = e.what();
        }
        std::lock_guard lock(build_mutex_);
        last_build_ = summary;
        build_error_ = error;
        building_ = false;
    };

    if (wait) {
        job();
        std::lock_guard lock(build_mutex_);
        if (!build_error_.empty()) {
            return fail(400, build_error_);
        }
        return {200, last_build_};
    }
    {
        std::lock_guard lock(build_mutex_);
        builder_ = std::thread(std::move(job));
    }
    return {202, {{"state", "building"}}};
}

void Service::register_routes() {
    auto& s = *http_;

    s.Get("/api/techniques", [this](const httplib::Request&, httplib::Response& res) {
        send(res, techniques());
    });
    s.Get("/api/index/status", [this](const httplib::Request&, httplib::Response& res) {
        send(res, status());
    });
    s.Post("/api/index/build", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            send(res, fail(400, e.what()));
            return;
        }
        send(res, build(body));
    });
    s.Get("/api/images", [this](const httplib::Request&, httplib::Response& res) {
        send(res, images());
    });
    s.Get(R"(/api/images/(.+)/thumbnail)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto ix = snapshot();
        const ImageRecord* rec = ix ? ix->find(req.matches[1]) : nullptr;
        if (!rec) {
            send(res, fail(404, "unknown image id"));
            return;
        }
        try {
            const RasterImage img = read_image_file(resolve(*rec).string());
            const auto bytes = encode_jpeg(downscale_to_fit(img, config_.thumbnail_size));
            res.set_content(std::string(bytes.begin(), bytes.end()), "image/jpeg");
        } catch (const Error& e) {
            send(res, fail(404, e.what()));
        }
    });
    s.Get(R"(/api/images/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto ix = snapshot();
        const ImageRecord* rec = ix ? ix->find(req.matches[1]) : nullptr;
        if (!rec) {
            send(res, fail(404, "unknown image id"));
            return;
        }
        const fs::path path = resolve(*rec);
        auto bytes = read_file(path);
        if (!bytes) {
            send(res, fail(404, "image file is not readable"));
            return;
        }
        res.set_content(std::move(*bytes), content_type_for(path));
    });
    s.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
        QueryRequest q;
        try {
            q = req.is_multipart_form_data() ? parse_multipart_query(req) : parse_json_query(req.body);
        } catch (const json::exception& e) {
            send(res, fail(400, e.what()));
            return;
        } catch (const Error& e) {
            send(res, fail(400, e.what()));
            return;
        }
        send(res, query(q));
    });
    s.Post("/api/evaluate", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            send(res, fail(400, e.what()));
            return;
        }
        send(res, evaluate(body));
    });
}

}  // namespace cbir
