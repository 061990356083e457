#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosmos/types.hpp"

namespace cosmos {

inline constexpr const char* kJudgeFormatVersion = "cosmos-judge/1";

/// The six judge-produced leaf scores, each a percentage in [0, 100].
struct SubDimensionScores {
    double task_fulfillment = 0;
    double grounding = 0;
    double tool_appropriateness = 0;
    double param_accuracy = 0;
    double dep_awareness = 0;
    double parallel_efficiency = 0;

    bool operator==(const SubDimensionScores&) const = default;
};

void to_json(Json& j, const SubDimensionScores& v);
void from_json(const Json& j, SubDimensionScores& v);
void validate(const SubDimensionScores& v);

/// Cohort-wide min/max of per-config average tool calls; the normalization
/// anchors for Execution Quality.
struct CohortStats {
    double min_avg_calls = 0;
    double max_avg_calls = 0;
};

struct GroupScores {
    double task_completion = 0;
    double tool_selection = 0;
    double planning_effectiveness = 0;
};

/// Everything one configuration's row in the report carries. Fields stay
/// unset when their metric is undefined for the row (no judge scores, no
/// attempted calls).
struct MetricReport {
    std::optional<SubDimensionScores> sub;
    std::optional<GroupScores> groups;
    std::optional<double> tool_call_success;
    std::optional<double> avg_tool_calls;
    std::optional<double> normalized_calls;
    std::optional<double> execution_quality;
    std::optional<double> overall_orig;
    std::optional<double> overall_new;
};

/// 100 x successful / attempted over all runs. Throws MetricError when no
/// call was attempted (the metric is undefined, never silently 0 or 100).
double tool_call_success_rate(const std::vector<RunResult>& results);

/// Mean attempted calls per task. Throws MetricError on empty input.
double avg_tool_calls(const std::vector<RunResult>& results);

/// 100 x (max - agent) / (max - min); inverted so fewer calls score higher.
/// A degenerate cohort (max == min) scores 100 for every config. Throws
/// MetricError if agent_avg falls outside [min, max].
double normalize_avg_calls(double agent_avg, const CohortStats& cohort);

/// Mean of success rate and normalized calls; both must lie in [0, 100].
double execution_quality(double success_rate, double normalized_calls);

/// The three pairwise means over the six leaf scores.
GroupScores aggregate_groups(const SubDimensionScores& sub);

/// Mean of the three group scores.
double overall_original(double task_completion, double tool_selection,
                        double planning_effectiveness);

/// Mean of the three group scores and execution quality.
double overall_new(double task_completion, double tool_selection, double planning_effectiveness,
                   double execution_quality);

/// Key for judge-score rows: which configuration on which task.
struct JudgeKey {
    std::string config;
    std::string task_id;

    auto operator<=>(const JudgeKey&) const = default;
};

/// Loads a "cosmos-judge/1" score file. Throws ParseError / ValidationError
/// for missing dimensions or out-of-range values.
std::map<JudgeKey, SubDimensionScores> ingest_judge_scores(const std::filesystem::path& path);
std::map<JudgeKey, SubDimensionScores> parse_judge_scores(const Json& j);

/// Per-config token rollup mirroring the usage-table layout.
struct TokenRollup {
    double avg_prompt = 0;
    double avg_output = 0;
    double avg_total = 0;
    std::int64_t total_prompt = 0;
    std::int64_t total_output = 0;
    std::int64_t total_total = 0;
};

TokenRollup token_rollup(const std::vector<RunResult>& results);

/// Display rounding used by the report tables: half-up to one decimal.
double round1(double v);

} // namespace cosmos
