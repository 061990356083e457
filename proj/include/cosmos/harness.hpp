#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosmos/executor.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/sim_env.hpp"
#include "cosmos/types.hpp"
#include "cosmos/world_model.hpp"

namespace cosmos {

inline constexpr const char* kBenchFormatVersion = "cosmos-bench/1";
inline constexpr const char* kTaskFormatVersion = "cosmos-task/1";

enum class AgentKind { React, ReactPlanExec, SpiralExec };

AgentKind agent_kind_from_string(const std::string& s);
std::string to_string(AgentKind k);

/// How the planning policy is built per task:
///   scripted       — params.scripts_dir with <task_id>.json call lists, or
///                    params.scripts inline map
///   each-tool-once — one call per tool in listing order, arguments filled
///                    from schema defaults
///   remote         — params.endpoint/model/template_path
struct PolicyDescriptor {
    std::string kind = "each-tool-once";
    Json params = Json::object();
};

struct AgentConfiguration {
    std::string name;
    AgentKind agent = AgentKind::React;
    std::optional<WorldModelDescriptor> world_model;
    PolicyDescriptor planner;
    SelectStrategy selection = SelectStrategy::Passthrough;
    MctsConfig mcts;
    int max_rounds = 15;
};

struct BenchConfig {
    std::filesystem::path suite_path;
    std::filesystem::path servers_dir;
    std::vector<AgentConfiguration> configurations;
    int k = 1;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    FailurePolicy failure;
    int jobs = 1;
};

struct TaskSuite {
    std::vector<Task> tasks;
};

/// Loads a directory of "cosmos-task/1" files; ids must be unique. An empty
/// directory yields an empty suite (with a warning on stderr).
TaskSuite load_task_suite(const std::filesystem::path& path);

/// Loads a "cosmos-bench/1" file; relative paths resolve against its parent.
BenchConfig load_bench_config(const std::filesystem::path& path);

/// One configuration's aggregated cohort row.
struct ConfigRow {
    std::string name;
    std::vector<RunResult> results;
    int failed_runs = 0;
    std::optional<std::string> config_error;

    MetricReport metrics;
    std::optional<TokenRollup> tokens;
};

struct CohortResults {
    std::vector<ConfigRow> rows;
    CohortStats cohort{0, 0};
    int k = 1;
};

/// Computes normalized calls, execution quality, and (when judge scores are
/// supplied) the full metric set. Per-task metrics average over the k
/// repetitions before the cross-task mean.
CohortResults compute_cohort(std::vector<ConfigRow> rows,
                             const std::map<JudgeKey, SubDimensionScores>* judge_scores, int k);

/// Runs the (configuration x task x repetition) grid against the simulated
/// environment, persisting each run under
/// output_dir/runs/<config>/<task>/<rep>.traj. Existing trajectory files are
/// decoded instead of re-executed, so the grid is resumable. Task-level
/// failures are recorded as data, never abort the grid.
CohortResults run_benchmark(const BenchConfig& cfg,
                            const std::map<JudgeKey, SubDimensionScores>* judge_scores = nullptr);

/// Rebuilds cohort rows from a previously written runs directory.
std::vector<ConfigRow> load_runs(const std::filesystem::path& runs_dir);

enum class ReportFormat { Markdown, Csv };

std::string render_report(const CohortResults& cohort, ReportFormat format);

/// Writes reports/<cohort_name>.{md,csv}; returns the written paths.
std::vector<std::filesystem::path> emit_report(const CohortResults& cohort,
                                               const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& out_dir,
                                               const std::string& cohort_name = "cohort");

} // namespace cosmos
