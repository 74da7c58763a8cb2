#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbir/features.hpp"
#include "cbir/index.hpp"
#include "cbir/matching.hpp"

namespace cbir {

inline constexpr std::size_t kDefaultAccuracyCap = 50;

// 100 * min(relevant, cap) / min(retrieved, cap); 0 when nothing was retrieved.
// An empty cap disables capping. Throws InvalidCounts when relevant > retrieved.
double accuracy(std::size_t relevant, std::size_t retrieved,
                std::optional<std::size_t> cap = kDefaultAccuracyCap);

// (retrieved - class_size) / class_size. 0 is ideal; -1 means nothing retrieved.
double redundancy_factor(std::size_t retrieved, std::size_t class_size);

struct EvaluationRow {
    std::string class_label;
    std::size_t images_retrieved = 0;
    double time = 0.0;  // seconds, or scans under TimeSource::ScanCount
    std::size_t relevant = 0;
    double accuracy = 0.0;
    double rf = 0.0;

    friend bool operator==(const EvaluationRow&, const EvaluationRow&) = default;
};

struct ClassSpec {
    std::string class_label;
    std::vector<std::string> member_ids;

    std::size_t size() const { return member_ids.size(); }
};

// One ClassSpec per distinct label, ordered naturally ("class2" before "class10").
// Throws InvalidArgument when any record is unlabeled.
std::vector<ClassSpec> classes_from_index(const FeatureIndex& ix);

// Natural ordering of labels: digit runs compare numerically.
bool natural_less(const std::string& a, const std::string& b);

// class label -> id of the indexed image used as that class's query.
using QueryAssignment = std::map<std::string, std::string>;

enum class TimeSource {
    WallClock,  // measured seconds
    ScanCount,  // record-vector comparisons; reproducible across runs
};

struct EvalOptions {
    std::optional<std::size_t> accuracy_cap = kDefaultAccuracyCap;
    TimeSource time_source = TimeSource::WallClock;
};

// One row per class that has a query, in class order. Queries must name indexed
// images that belong to the class they are assigned to.
std::vector<EvaluationRow> evaluate_technique_set(const FeatureIndex& ix,
                                                  const std::vector<ClassSpec>& classes,
                                                  const QueryAssignment& queries,
                                                  const TechniqueSet& ts,
                                                  const ThresholdConfig& cfg,
                                                  const EvalOptions& options = {});

struct Summary {
    double mean_time = 0.0;
    double mean_accuracy = 0.0;
    double mean_rf = 0.0;
};

// Arithmetic column means. Throws EmptyInput.
Summary mean_summary(std::span<const EvaluationRow> rows);
// Means of the per-table means, used for the "individual approach" column.
Summary mean_of_summaries(std::span<const Summary> summaries);

struct OptimizationOutcome {
    std::string class_label;
    TechniqueSet chosen;
    EvaluationRow row;
};

// True when candidate (a) ranks ahead of (b): higher accuracy, then lower time,
// then smaller |rf|, then the lexicographically smaller technique subset.
bool outcome_precedes(const EvaluationRow& a, const TechniqueSet& sa, const EvaluationRow& b,
                      const TechniqueSet& sb);

// Exhaustive search over all 63 non-empty technique subsets per class.
std::vector<OptimizationOutcome> optimize_per_class(const FeatureIndex& ix,
                                                    const std::vector<ClassSpec>& classes,
                                                    const QueryAssignment& queries,
                                                    const ThresholdConfig& cfg,
                                                    const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// Reports

struct EvaluationTable {
    std::string title;
    TechniqueSet techniques;
    std::vector<EvaluationRow> rows;
    Summary means;
};

struct Comparison {
    Summary individual;
    Summary combined;
    Summary optimized;
};

enum class EvalMode { Techniques, Each, Combined, Optimize };

struct EvaluationReport {
    EvalMode mode = EvalMode::Techniques;
    TimeSource time_source = TimeSource::WallClock;
    std::vector<EvaluationTable> tables;
    std::vector<OptimizationOutcome> outcomes;
    std::optional<Summary> individual_means;
    std::optional<Summary> optimized_means;
    std::optional<Comparison> comparison;
};

struct EvalRequest {
    EvalMode mode = EvalMode::Combined;
    TechniqueSet techniques = TechniqueSet::all();  // used by EvalMode::Techniques
    EvalOptions options;
};

// Shared by the CLI and the HTTP service so both emit the same content.
// Throws InvalidArgument for unlabeled indexes or bad query assignments.
EvaluationReport run_evaluation(const FeatureIndex& ix, const QueryAssignment& queries,
                                const ThresholdConfig& cfg, const EvalRequest& request);

EvaluationTable make_table(std::string title, const TechniqueSet& ts,
                           std::vector<EvaluationRow> rows);

std::string render_table_text(const EvaluationTable& table, TimeSource time_source);
std::string render_outcomes_text(std::span<const OptimizationOutcome> outcomes,
                                 TimeSource time_source);
std::string render_comparison_text(const Comparison& comparison, TimeSource time_source);
std::string render_report_text(const EvaluationReport& report);

nlohmann::json to_json(const EvaluationRow& row);
nlohmann::json to_json(const Summary& summary);
nlohmann::json to_json(const EvaluationReport& report);

std::string_view mode_name(EvalMode mode);
std::optional<EvalMode> parse_mode(std::string_view name);

// Fixed-point with two decimals, extended to three when the third is non-zero.
std::string format_number(double v);

}  // namespace cbir
