#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cosmos {

// nlohmann::json keeps object keys in a sorted map, which makes every dump()
// canonical. The trajectory format relies on that for byte-identity checks.
using Json = nlohmann::json;

/// Prompt/output token counters attached to a call or rolled up per run.
struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t output = 0;
    std::int64_t total = 0;

    bool operator==(const TokenUsage&) const = default;

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt += other.prompt;
        output += other.output;
        total += other.total;
        return *this;
    }
};

/// One benchmark task: the user request plus the servers it may touch.
/// difficulty is the server count, the suite's difficulty proxy.
struct Task {
    std::string id;
    std::string instruction;
    std::vector<std::string> server_ids;
    int difficulty = 0;

    bool operator==(const Task&) const = default;
};

/// An action a_t: one tool invocation with bound arguments.
struct ToolCall {
    std::string call_id;
    std::string server;
    std::string tool_name;
    Json arguments = Json::object();

    bool operator==(const ToolCall&) const = default;
};

enum class ObsStatus { Success, Failure };

/// The environment's real feedback o_t for a tool call.
struct Observation {
    std::string call_id;
    ObsStatus status = ObsStatus::Success;
    Json payload;
    double latency_ms = 0.0;
    TokenUsage tokens;

    bool ok() const noexcept { return status == ObsStatus::Success; }
    bool operator==(const Observation&) const = default;
};

/// How a simulated observation approximates the real one.
enum class Fidelity { Summary, Exemplar, SyntheticData, Consequence };

/// A world-model pseudo observation o~_t.
struct SimulatedObservation {
    std::string call_id;
    Json payload;
    Fidelity fidelity = Fidelity::Summary;

    bool operator==(const SimulatedObservation&) const = default;
};

using AnyObservation = std::variant<SimulatedObservation, Observation>;

/// Agent state s_t: the task plus everything observed so far.
struct AgentState {
    Task task;
    std::vector<std::pair<ToolCall, AnyObservation>> history;
    std::size_t step = 0;

    bool operator==(const AgentState&) const = default;
};

enum class WmTermination { PolicyStop, MaxSteps };

/// The simulated exploration record tau_wm accumulated during planning.
struct WMTrajectory {
    std::vector<std::pair<ToolCall, SimulatedObservation>> entries;
    WmTermination terminated_by = WmTermination::PolicyStop;

    bool operator==(const WMTrajectory&) const = default;
};

/// One plan step: a group of calls that may execute in parallel.
struct PlanStep {
    std::vector<ToolCall> calls;

    bool operator==(const PlanStep&) const = default;
};

/// The committed execution plan P.
struct Plan {
    std::vector<PlanStep> steps;

    std::size_t call_count() const noexcept {
        std::size_t n = 0;
        for (const auto& s : steps) n += s.calls.size();
        return n;
    }
    bool operator==(const Plan&) const = default;
};

/// The real execution record tau. Only successful pairs enter entries;
/// failures are kept aside for metric computation.
struct ExecutionTrajectory {
    std::vector<std::pair<ToolCall, Observation>> entries;
    std::vector<std::pair<ToolCall, Observation>> failed_entries;

    std::size_t attempted_calls() const noexcept {
        return entries.size() + failed_entries.size();
    }
    bool operator==(const ExecutionTrajectory&) const = default;
};

/// Everything one run produces: answer, plan, both trajectories, usage.
struct RunResult {
    std::string task_id;
    std::map<std::string, std::string> agent_config;
    std::string answer;
    Plan plan;
    ExecutionTrajectory trajectory;
    std::optional<WMTrajectory> wm_trajectory;
    TokenUsage tokens;
    int rounds = 0;

    bool operator==(const RunResult&) const = default;
};

/// Generates "<run-seed>-<counter>" ids so reruns under one seed produce
/// identical call ids.
class CallIdGenerator {
public:
    explicit CallIdGenerator(std::uint64_t run_seed) : seed_(run_seed) {}

    std::string next() { return std::to_string(seed_) + "-" + std::to_string(counter_++); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// JSON conversions (keys come out sorted; see note on Json above).
void to_json(Json& j, const TokenUsage& v);
void from_json(const Json& j, TokenUsage& v);
void to_json(Json& j, const Task& v);
void from_json(const Json& j, Task& v);
void to_json(Json& j, const ToolCall& v);
void from_json(const Json& j, ToolCall& v);
void to_json(Json& j, const Observation& v);
void from_json(const Json& j, Observation& v);
void to_json(Json& j, const SimulatedObservation& v);
void from_json(const Json& j, SimulatedObservation& v);
void to_json(Json& j, const WMTrajectory& v);
void from_json(const Json& j, WMTrajectory& v);
void to_json(Json& j, const Plan& v);
void from_json(const Json& j, Plan& v);

std::string to_string(ObsStatus s);
std::string to_string(Fidelity f);
std::string to_string(WmTermination t);
ObsStatus obs_status_from_string(const std::string& s);
Fidelity fidelity_from_string(const std::string& s);
WmTermination wm_termination_from_string(const std::string& s);

/// Throws ValidationError naming the offending field if any invariant fails.
void validate(const TokenUsage& v, const std::string& where = "tokens");
void validate(const Task& v);
void validate(const ToolCall& v);
void validate(const Observation& v);
void validate(const SimulatedObservation& v);
void validate(const WMTrajectory& v);
void validate(const Plan& v);
void validate(const RunResult& v);

/// Canonical line-delimited encoding of a RunResult ("cosmos-traj/1").
/// Deterministic: the same value always encodes to the same bytes.
std::string encode_trajectory(const RunResult& result);

/// Inverse of encode_trajectory. Throws ParseError (with line number) on
/// malformed input and ValidationError if a decoded record breaks an
/// invariant.
RunResult decode_trajectory(const std::string& bytes);

inline constexpr const char* kTrajFormatVersion = "cosmos-traj/1";

} // namespace cosmos
