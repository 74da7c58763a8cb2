#include "cbir/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cbir/errors.hpp"

namespace cbir {

double accuracy(std::size_t relevant, std::size_t retrieved, std::optional<std::size_t> cap) {
    if (relevant > retrieved) {
        throw InvalidCounts("relevant count " + std::to_string(relevant) +
                            " exceeds retrieved count " + std::to_string(retrieved));
    }
    if (retrieved == 0) {
        return 0.0;
    }
    if (cap) {
        relevant = std::min(relevant, *cap);
        retrieved = std::min(retrieved, *cap);
    }
    return 100.0 * static_cast<double>(relevant) / static_cast<double>(retrieved);
}

double redundancy_factor(std::size_t retrieved, std::size_t class_size) {
    if (class_size == 0) {
        throw InvalidArgument("class size must be at least 1");
    }
    return (static_cast<double>(retrieved) - static_cast<double>(class_size)) /
           static_cast<double>(class_size);
}

bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            // Compare digit runs by value: strip leading zeros, then length, then text.
            std::string_view ra(a.data() + i, ie - i);
            std::string_view rb(b.data() + j, je - j);
            while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
            while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
            if (ra.size() != rb.size()) return ra.size() < rb.size();
            if (ra != rb) return ra < rb;
            i = ie;
            j = je;
            continue;
        }
        if (a[i] != b[j]) {
            return a[i] < b[j];
        }
        ++i;
        ++j;
    }
    if ((a.size() - i) != (b.size() - j)) {
        return (a.size() - i) < (b.size() - j);
    }
    return a < b;
}

std::vector<ClassSpec> classes_from_index(const FeatureIndex& ix) {
    std::map<std::string, std::vector<std::string>> members;
    for (const ImageRecord& rec : ix.records) {
        if (!rec.class_label) {
            throw InvalidArgument("index is not labeled: record '" + rec.id + "' has no class");
        }
        members[*rec.class_label].push_back(rec.id);
    }
    std::vector<ClassSpec> out;
    for (auto& [label, ids] : members) {
        out.push_back({label, std::move(ids)});
    }
    std::sort(out.begin(), out.end(), [](const ClassSpec& a, const ClassSpec& b) {
        return natural_less(a.class_label, b.class_label);
    });
    return out;
}

namespace {

const ImageRecord& query_record(const FeatureIndex& ix, const std::string& class_label,
                                const std::string& id) {
    const ImageRecord* rec = ix.find(id);
    if (!rec) {
        throw InvalidArgument("query image '" + id + "' for class '" + class_label +
                              "' is not in the index");
    }
    if (rec->class_label != class_label) {
        throw InvalidArgument("query image '" + id + "' belongs to class '" +
                              rec->class_label.value_or("") + "', not '" + class_label + "'");
    }
    return *rec;
}

void check_assignment(const std::vector<ClassSpec>& classes, const QueryAssignment& queries) {
    if (queries.empty()) {
        throw InvalidArgument("no query images assigned");
    }
    for (const auto& [label, id] : queries) {
        auto it = std::find_if(classes.begin(), classes.end(),
                               [&](const ClassSpec& c) { return c.class_label == label; });
        if (it == classes.end()) {
            throw InvalidArgument("query manifest names unknown class '" + label + "'");
        }
    }
}

QueryVectors vectors_of(const ImageRecord& rec) { return rec.vectors; }

EvaluationRow evaluate_class(const FeatureIndex& ix, const ClassSpec& cls,
                             const std::unordered_set<std::string>& members,
                             const QueryVectors& query, const TechniqueSet& ts,
                             const ThresholdConfig& cfg, const EvalOptions& options) {
    const RetrievalResult result = retrieve_combined(query, ix, ts, cfg);
    EvaluationRow row;
    row.class_label = cls.class_label;
    row.images_retrieved = result.hits.size();
    row.relevant = static_cast<std::size_t>(std::count_if(
        result.hits.begin(), result.hits.end(), [&](const Hit& h) { return members.contains(h.id); }));
    row.time = options.time_source == TimeSource::ScanCount ? static_cast<double>(result.scanned)
                                                            : result.elapsed;
    row.accuracy = accuracy(row.relevant, row.images_retrieved, options.accuracy_cap);
    row.rf = redundancy_factor(row.images_retrieved, cls.size());
    return row;
}

}  // namespace

std::vector<EvaluationRow> evaluate_technique_set(const FeatureIndex& ix,
                                                  const std::vector<ClassSpec>& classes,
                                                  const QueryAssignment& queries,
                                                  const TechniqueSet& ts,
                                                  const ThresholdConfig& cfg,
                                                  const EvalOptions& options) {
    check_assignment(classes, queries);
    std::vector<EvaluationRow> rows;
    for (const ClassSpec& cls : classes) {
        auto q = queries.find(cls.class_label);
        if (q == queries.end()) {
            continue;
        }
        const ImageRecord& rec = query_record(ix, cls.class_label, q->second);
        const std::unordered_set<std::string> members(cls.member_ids.begin(), cls.member_ids.end());
        rows.push_back(evaluate_class(ix, cls, members, vectors_of(rec), ts, cfg, options));
    }
    return rows;
}

Summary mean_summary(std::span<const EvaluationRow> rows) {
    if (rows.empty()) {
        throw EmptyInput("cannot summarize zero rows");
    }
    Summary s;
    for (const EvaluationRow& r : rows) {
        s.mean_time += r.time;
        s.mean_accuracy += r.accuracy;
        s.mean_rf += r.rf;
    }
    const double n = static_cast<double>(rows.size());
    s.mean_time /= n;
    s.mean_accuracy /= n;
    s.mean_rf /= n;
    return s;
}

Summary mean_of_summaries(std::span<const Summary> summaries) {
    if (summaries.empty()) {
        throw EmptyInput("cannot average zero summaries");
    }
    Summary s;
    for (const Summary& x : summaries) {
        s.mean_time += x.mean_time;
        s.mean_accuracy += x.mean_accuracy;
        s.mean_rf += x.mean_rf;
    }
    const double n = static_cast<double>(summaries.size());
    s.mean_time /= n;
    s.mean_accuracy /= n;
    s.mean_rf /= n;
    return s;
}

bool outcome_precedes(const EvaluationRow& a, const TechniqueSet& sa, const EvaluationRow& b,
                      const TechniqueSet& sb) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.time != b.time) return a.time < b.time;
    const double ra = std::abs(a.rf);
    const double rb = std::abs(b.rf);
    if (ra != rb) return ra < rb;
    return lexicographically_less(sa, sb);
}

std::vector<OptimizationOutcome> optimize_per_class(const FeatureIndex& ix,
                                                    const std::vector<ClassSpec>& classes,
                                                    const QueryAssignment& queries,
                                                    const ThresholdConfig& cfg,
                                                    const EvalOptions& options) {
    check_assignment(classes, queries);
    std::vector<OptimizationOutcome> out;
    for (const ClassSpec& cls : classes) {
        auto q = queries.find(cls.class_label);
        if (q == queries.end()) {
            continue;
        }
        const ImageRecord& rec = query_record(ix, cls.class_label, q->second);
        const std::unordered_set<std::string> members(cls.member_ids.begin(), cls.member_ids.end());
        const QueryVectors query = vectors_of(rec);

        std::optional<OptimizationOutcome> best;
        for (unsigned mask = 1; mask < (1u << kTechniqueCount); ++mask) {
            const TechniqueSet ts = TechniqueSet::from_mask(mask);
            EvaluationRow row = evaluate_class(ix, cls, members, query, ts, cfg, options);
            if (!best || outcome_precedes(row, ts, best->row, best->chosen)) {
                best = OptimizationOutcome{cls.class_label, ts, std::move(row)};
            }
        }
        out.push_back(std::move(*best));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string format_number(double v) {
    if (std::abs(v) < 0.0005) {
        v = 0.0;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    std::string s(buf);
    if (s.back() == '0') {
        s.pop_back();
    }
    return s;
}

std::string_view mode_name(EvalMode mode) {
    switch (mode) {
        case EvalMode::Techniques: return "techniques";
        case EvalMode::Each: return "each";
        case EvalMode::Combined: return "combined";
        case EvalMode::Optimize: return "optimize";
    }
    return "techniques";
}

std::optional<EvalMode> parse_mode(std::string_view name) {
    for (EvalMode m : {EvalMode::Techniques, EvalMode::Each, EvalMode::Combined, EvalMode::Optimize}) {
        if (mode_name(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

namespace {

std::string set_title(const TechniqueSet& ts) {
    if (ts == TechniqueSet::all()) {
        return "Combined Approach";
    }
    std::string out;
    for (Technique t : ts.members()) {
        if (!out.empty()) out += " + ";
        out += technique_label(t);
    }
    return out;
}

std::string time_header(TimeSource source) {
    return source == TimeSource::ScanCount ? "Time (scans)" : "Time (sec)";
}

std::string time_unit(TimeSource source) {
    return source == TimeSource::ScanCount ? "scans" : "seconds";
}

// Left-aligned columns separated by two spaces.
std::string render_grid(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> widths;
    for (const auto& row : cells) {
        widths.resize(std::max(widths.size(), row.size()), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::ostringstream out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c];
            if (c + 1 < row.size()) {
                line += std::string(widths[c] - row[c].size() + 2, ' ');
            }
        }
        out << line << '\n';
    }
    return out.str();
}

std::string means_line(const Summary& s, TimeSource source) {
    return "Mean Time: " + format_number(s.mean_time) +
           (source == TimeSource::ScanCount ? " scans" : " sec") +
           "  Mean Accuracy: " + format_number(s.mean_accuracy) +
           "%  Mean RF: " + format_number(s.mean_rf) + "\n";
}

}  // namespace

EvaluationTable make_table(std::string title, const TechniqueSet& ts,
                           std::vector<EvaluationRow> rows) {
    EvaluationTable table{std::move(title), ts, std::move(rows), {}};
    table.means = mean_summary(table.rows);
    return table;
}

std::string render_table_text(const EvaluationTable& table, TimeSource time_source) {
    if (table.rows.empty()) {
        throw EmptyInput("cannot render an empty table");
    }
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Image Class", "Images retrieved", time_header(time_source), "Relevant Images",
                     "Accuracy (%)", "RF"});
    for (const EvaluationRow& r : table.rows) {
        cells.push_back({r.class_label, std::to_string(r.images_retrieved), format_number(r.time),
                         std::to_string(r.relevant), format_number(r.accuracy),
                         format_number(r.rf)});
    }
    return "Results for " + table.title + "\n" + render_grid(cells) +
           means_line(table.means, time_source);
}

std::string render_outcomes_text(std::span<const OptimizationOutcome> outcomes,
                                 TimeSource time_source) {
    if (outcomes.empty()) {
        throw EmptyInput("cannot render zero optimization outcomes");
    }
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Image Class", "Techniques", "Images retrieved", time_header(time_source),
                     "Relevant Images", "Accuracy (%)", "RF"});
    std::vector<EvaluationRow> rows;
    for (const OptimizationOutcome& o : outcomes) {
        const EvaluationRow& r = o.row;
        cells.push_back({o.class_label, o.chosen.to_string(), std::to_string(r.images_retrieved),
                         format_number(r.time), std::to_string(r.relevant),
                         format_number(r.accuracy), format_number(r.rf)});
        rows.push_back(r);
    }
    return "Results obtained by Optimization\n" + render_grid(cells) +
           means_line(mean_summary(rows), time_source);
}

std::string render_comparison_text(const Comparison& c, TimeSource time_source) {
    const std::string time_label =
        time_source == TimeSource::ScanCount ? "Mean Time (scans)" : "Mean Time (sec)";
    std::vector<std::vector<std::string>> cells = {
        {"Parameters", "Individual Approach", "Combined Approach", "Optimized Approach"},
        {time_label, format_number(c.individual.mean_time), format_number(c.combined.mean_time),
         format_number(c.optimized.mean_time)},
        {"Mean Accuracy (%)", format_number(c.individual.mean_accuracy),
         format_number(c.combined.mean_accuracy), format_number(c.optimized.mean_accuracy)},
        {"Mean RF", format_number(c.individual.mean_rf), format_number(c.combined.mean_rf),
         format_number(c.optimized.mean_rf)},
    };
    return "Comparison between the individual, combined and optimized approaches\n" +
           render_grid(cells);
}

std::string render_report_text(const EvaluationReport& report) {
    std::string out;
    if (report.mode == EvalMode::Optimize) {
        out += render_outcomes_text(report.outcomes, report.time_source);
        if (report.comparison) {
            out += "\n" + render_comparison_text(*report.comparison, report.time_source);
        }
        return out;
    }
    for (std::size_t k = 0; k < report.tables.size(); ++k) {
        if (k) out += "\n";
        out += render_table_text(report.tables[k], report.time_source);
    }
    if (report.mode == EvalMode::Each && report.individual_means) {
        out += "\nIndividual approach: " + means_line(*report.individual_means, report.time_source);
    }
    return out;
}

nlohmann::json to_json(const EvaluationRow& row) {
    return {
        {"class", row.class_label},         {"images_retrieved", row.images_retrieved},
        {"time", row.time},                 {"relevant", row.relevant},
        {"accuracy", row.accuracy},         {"rf", row.rf},
    };
}

nlohmann::json to_json(const Summary& s) {
    return {{"mean_time", s.mean_time}, {"mean_accuracy", s.mean_accuracy}, {"mean_rf", s.mean_rf}};
}

nlohmann::json to_json(const EvaluationReport& report) {
    nlohmann::json doc;
    doc["mode"] = mode_name(report.mode);
    doc["time_unit"] = time_unit(report.time_source);
    doc["tables"] = nlohmann::json::array();
    for (const EvaluationTable& t : report.tables) {
        nlohmann::json jt;
        jt["title"] = t.title;
        jt["techniques"] = t.techniques.to_string();
        jt["rows"] = nlohmann::json::array();
        for (const EvaluationRow& r : t.rows) jt["rows"].push_back(to_json(r));
        jt["means"] = to_json(t.means);
        doc["tables"].push_back(std::move(jt));
    }
    if (report.individual_means) doc["individual_means"] = to_json(*report.individual_means);
    if (!report.outcomes.empty()) {
        doc["outcomes"] = nlohmann::json::array();
        for (const OptimizationOutcome& o : report.outcomes) {
            doc["outcomes"].push_back({{"class", o.class_label},
                                       {"techniques", o.chosen.to_string()},
                                       {"row", to_json(o.row)}});
        }
    }
    if (report.optimized_means) doc["optimized_means"] = to_json(*report.optimized_means);
    if (report.comparison) {
        doc["comparison"] = {{"individual", to_json(report.comparison->individual)},
                             {"combined", to_json(report.comparison->combined)},
                             {"optimized", to_json(report.comparison->optimized)}};
    }
    return doc;
}

EvaluationReport run_evaluation(const FeatureIndex& ix, const QueryAssignment& queries,
                                const ThresholdConfig& cfg, const EvalRequest& request) {
    if (!ix.labeled()) {
        throw InvalidArgument("evaluation needs a labeled index");
    }
    const std::vector<ClassSpec> classes = classes_from_index(ix);
    check_assignment(classes, queries);

    EvaluationReport report;
    report.mode = request.mode;
    report.time_source = request.options.time_source;

    auto table_for = [&](const TechniqueSet& ts) {
        return make_table(set_title(ts), ts,
                          evaluate_technique_set(ix, classes, queries, ts, cfg, request.options));
    };
    auto run_each = [&] {
        std::vector<Summary> means;
        for (Technique t : kAllTechniques) {
            report.tables.push_back(table_for(TechniqueSet{t}));
            means.push_back(report.tables.back().means);
        }
        report.individual_means = mean_of_summaries(means);
    };

    switch (request.mode) {
        case EvalMode::Techniques:
            if (request.techniques.empty()) {
                throw InvalidArgument("technique set must not be empty");
            }
            report.tables.push_back(table_for(request.techniques));
            break;
        case EvalMode::Each:
            run_each();
            break;
        case EvalMode::Combined:
            report.tables.push_back(table_for(TechniqueSet::all()));
            break;
        case EvalMode::Optimize: {
            run_each();
            report.tables.push_back(table_for(TechniqueSet::all()));
            report.outcomes = optimize_per_class(ix, classes, queries, cfg, request.options);
            std::vector<EvaluationRow> rows;
            for (const auto& o : report.outcomes) rows.push_back(o.row);
            report.optimized_means = mean_summary(rows);
            report.comparison = Comparison{*report.individual_means, report.tables.back().means,
                                           *report.optimized_means};
            break;
        }
    }
    return report;
}

}  // namespace cbir
