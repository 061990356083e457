#include "cosmos/metrics.hpp"

#include <cmath>
#include <fstream>

#include "cosmos/errors.hpp"

namespace cosmos {

namespace {

constexpr const char* kDimensionKeys[6] = {"task_fulfillment",  "grounding",
                                           "tool_appropriateness", "param_accuracy",
                                           "dep_awareness",     "parallel_efficiency"};

double* dimension_slot(SubDimensionScores& s, int i) {
    switch (i) {
        case 0: return &s.task_fulfillment;
        case 1: return &s.grounding;
        case 2: return &s.tool_appropriateness;
        case 3: return &s.param_accuracy;
        case 4: return &s.dep_awareness;
        default: return &s.parallel_efficiency;
    }
}

void check_percentage(double v, const std::string& name) {
    if (!(v >= 0.0 && v <= 100.0))
        throw ValidationError(name, "must be a percentage in [0,100], got " + std::to_string(v));
}

} // namespace

void to_json(Json& j, const SubDimensionScores& v) {
    j = Json{{"task_fulfillment", v.task_fulfillment},
             {"grounding", v.grounding},
             {"tool_appropriateness", v.tool_appropriateness},
             {"param_accuracy", v.param_accuracy},
             {"dep_awareness", v.dep_awareness},
             {"parallel_efficiency", v.parallel_efficiency}};
}

void from_json(const Json& j, SubDimensionScores& v) {
    for (int i = 0; i < 6; ++i) {
        if (!j.contains(kDimensionKeys[i]))
            throw ValidationError(kDimensionKeys[i], "missing sub-dimension");
        j.at(kDimensionKeys[i]).get_to(*dimension_slot(v, i));
    }
}

void validate(const SubDimensionScores& v) {
    SubDimensionScores copy = v;
    for (int i = 0; i < 6; ++i) check_percentage(*dimension_slot(copy, i), kDimensionKeys[i]);
}

double tool_call_success_rate(const std::vector<RunResult>& results) {
    std::int64_t attempted = 0;
    std::int64_t succeeded = 0;
    for (const auto& r : results) {
        attempted += static_cast<std::int64_t>(r.trajectory.attempted_calls());
        succeeded += static_cast<std::int64_t>(r.trajectory.entries.size());
    }
    if (attempted == 0)
        throw MetricError("tool_call_success_rate undefined: zero attempted calls");
    return 100.0 * static_cast<double>(succeeded) / static_cast<double>(attempted);
}

double avg_tool_calls(const std::vector<RunResult>& results) {
    if (results.empty()) throw MetricError("avg_tool_calls undefined: no results");
    double sum = 0;
    for (const auto& r : results) sum += static_cast<double>(r.trajectory.attempted_calls());
    return sum / static_cast<double>(results.size());
}

double normalize_avg_calls(double agent_avg, const CohortStats& cohort) {
    if (cohort.min_avg_calls > cohort.max_avg_calls)
        throw MetricError("cohort min_avg_calls exceeds max_avg_calls");
    if (agent_avg < cohort.min_avg_calls || agent_avg > cohort.max_avg_calls)
        throw MetricError("agent_avg_calls outside the cohort [min, max] range");
    if (cohort.max_avg_calls == cohort.min_avg_calls) return 100.0; // degenerate cohort
    return 100.0 * (cohort.max_avg_calls - agent_avg) /
           (cohort.max_avg_calls - cohort.min_avg_calls);
}

double execution_quality(double success_rate, double normalized_calls) {
    check_percentage(success_rate, "success_rate");
    check_percentage(normalized_calls, "normalized_calls");
    return (success_rate + normalized_calls) / 2.0;
}

GroupScores aggregate_groups(const SubDimensionScores& sub) {
    validate(sub);
    GroupScores g;
    g.task_completion = (sub.task_fulfillment + sub.grounding) / 2.0;
    g.tool_selection = (sub.tool_appropriateness + sub.param_accuracy) / 2.0;
    g.planning_effectiveness = (sub.dep_awareness + sub.parallel_efficiency) / 2.0;
    return g;
}

double overall_original(double task_completion, double tool_selection,
                        double planning_effectiveness) {
    check_percentage(task_completion, "task_completion");
    check_percentage(tool_selection, "tool_selection");
    check_percentage(planning_effectiveness, "planning_effectiveness");
    return (task_completion + tool_selection + planning_effectiveness) / 3.0;
}

double overall_new(double task_completion, double tool_selection, double planning_effectiveness,
                   double execution_quality_score) {
    check_percentage(task_completion, "task_completion");
    check_percentage(tool_selection, "tool_selection");
    check_percentage(planning_effectiveness, "planning_effectiveness");
    check_percentage(execution_quality_score, "execution_quality");
    return (task_completion + tool_selection + planning_effectiveness + execution_quality_score) /
           4.0;
}

std::map<JudgeKey, SubDimensionScores> parse_judge_scores(const Json& j) {
    std::map<JudgeKey, SubDimensionScores> out;
    try {
        if (j.at("format").get<std::string>() != kJudgeFormatVersion)
            throw ParseError("unsupported judge score format");
        for (const auto& row : j.at("scores")) {
            JudgeKey key{row.at("config").get<std::string>(), row.value("task_id", "*")};
            SubDimensionScores sub = row.get<SubDimensionScores>();
            validate(sub);
            if (out.count(key))
                throw ValidationError("judge scores",
                                      "duplicate row for " + key.config + "/" + key.task_id);
            out[key] = sub;
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("judge scores: ") + e.what());
    }
    return out;
}

std::map<JudgeKey, SubDimensionScores> ingest_judge_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open judge score file " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_judge_scores(j);
}

TokenRollup token_rollup(const std::vector<RunResult>& results) {
    if (results.empty()) throw MetricError("token_rollup undefined: empty group");
    TokenRollup r;
    for (const auto& result : results) {
        r.total_prompt += result.tokens.prompt;
        r.total_output += result.tokens.output;
        r.total_total += result.tokens.total;
    }
    const auto n = static_cast<double>(results.size());
    r.avg_prompt = static_cast<double>(r.total_prompt) / n;
    r.avg_output = static_cast<double>(r.total_output) / n;
    r.avg_total = static_cast<double>(r.total_total) / n;
    return r;
}

double round1(double v) { return std::floor(v * 10.0 + 0.5) / 10.0; }

} // namespace cosmos
