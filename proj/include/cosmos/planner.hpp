#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cosmos/errors.hpp"
#include "cosmos/types.hpp"
#include "cosmos/world_model.hpp"

namespace cosmos {

/// pi_plan: proposes the next action for a state, or Stop (nullopt).
class PlannerPolicy {
public:
    virtual ~PlannerPolicy() = default;

    virtual std::optional<ToolCall> next_action(const AgentState& state) = 0;

    /// Candidate actions for tree search. The default wraps next_action in a
    /// single-candidate list; search policies override this with a branching
    /// set. An empty optional inside the list is a Stop candidate.
    virtual std::vector<std::optional<ToolCall>> proposals(const AgentState& state) {
        return {next_action(state)};
    }
};

struct PlannerConfig {
    int max_steps = 15; // T_max; above the largest per-task rounds seen in practice
    // When false, context rendered for the policy omits simulated
    // observations (plan without mid-planning revision). State threading is
    // unaffected.
    bool revise_on_simulation = true;
    // On mid-planning simulation errors: abort with the partial trajectory
    // (default) or drop the failed step and keep going.
    bool skip_failed_simulations = false;
};

/// Raised when planning aborts mid-loop; carries the partial trajectory.
class PlanningError : public SimulationError {
public:
    PlanningError(const std::string& what, WMTrajectory partial)
        : SimulationError(what), partial_(std::move(partial)) {}

    const WMTrajectory& partial() const noexcept { return partial_; }

private:
    WMTrajectory partial_;
};

/// Returns a new state with the pair appended and step incremented; the
/// input state is untouched.
AgentState update_state(const AgentState& state, std::pair<ToolCall, AnyObservation> pair);

/// Text rendering of the interaction history, used as policy/world-model
/// context.
std::string render_history(const AgentState& state, bool include_observations = true);

/// Phase 1 of the run: iteratively generate actions, simulate each with the
/// world model, and accumulate the exploration trajectory until the policy
/// stops or max_steps entries exist.
WMTrajectory plan_with_simulation(const Task& task, PlannerPolicy& policy, WorldModel& wm,
                                  const PlannerConfig& cfg);

/// Deterministic test policy: emits the script in order, then Stop.
std::shared_ptr<PlannerPolicy> scripted_policy(std::vector<ToolCall> script);

/// Configuration for an LLM-backed policy speaking the chat-completions
/// wire format.
struct RemotePolicyConfig {
    std::string endpoint;
    std::string model;
    std::string template_path;  // prompt template file; optional
    int parse_retries = 2;
    std::vector<std::pair<std::string, ToolSpec>> tool_schemas;
};

/// Parses one model reply into an action or Stop. "FINISH" (alone on any
/// line) is the stop sentinel; otherwise the first JSON object found with
/// server/tool_name fields becomes the action. Returns nullopt for
/// unparseable replies so the caller can retry.
struct ParsedReply {
    bool stop = false;
    std::optional<ToolCall> action;
};
std::optional<ParsedReply> parse_policy_reply(const std::string& reply);

class RemotePolicy : public PlannerPolicy {
public:
    explicit RemotePolicy(RemotePolicyConfig cfg);

    std::optional<ToolCall> next_action(const AgentState& state) override;

    /// Warnings recorded on parse-retry exhaustion.
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

protected:
    /// Overridable transport so replies can come from fixtures in tests.
    virtual std::string complete(const std::string& prompt);

private:
    RemotePolicyConfig cfg_;
    std::vector<std::string> warnings_;
    std::uint64_t next_call_index_ = 0;
};

std::shared_ptr<PlannerPolicy> remote_policy(RemotePolicyConfig cfg);

} // namespace cosmos
