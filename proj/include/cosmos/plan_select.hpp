#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cosmos/planner.hpp"
#include "cosmos/types.hpp"
#include "cosmos/world_model.hpp"

namespace cosmos {

struct MctsConfig {
    int iterations = 128;
    int max_depth = 8;
    double exploration_c = 1.4142135623730951; // sqrt(2)
    std::uint64_t seed = 0;
    double length_penalty = 0.05; // reward deduction per plan step
};

/// Standard UCT bookkeeping.
struct MctsNode {
    AgentState state;
    std::optional<ToolCall> action_taken;       // nullopt at the root
    std::optional<SimulatedObservation> sim;    // simulation of action_taken
    bool terminal = false;                      // Stop was chosen here
    int visits = 0;
    double total_reward = 0.0;
    std::vector<std::unique_ptr<MctsNode>> children;
    std::vector<std::optional<ToolCall>> untried;
    bool expanded_once = false;
};

enum class SelectStrategy { Passthrough, JudgePolicy };

SelectStrategy select_strategy_from_string(const std::string& s);
std::string to_string(SelectStrategy s);

/// Reviews a simulated trajectory and returns the call_ids to keep, in
/// execution order.
class PlanJudge {
public:
    virtual ~PlanJudge() = default;
    virtual std::vector<std::string> select(const Task& task, const WMTrajectory& traj) = 0;
};

/// Judge with a canned reply, for replay tests and fixtures.
class FixtureJudge : public PlanJudge {
public:
    explicit FixtureJudge(std::vector<std::string> call_ids) : call_ids_(std::move(call_ids)) {}
    std::vector<std::string> select(const Task&, const WMTrajectory&) override { return call_ids_; }

private:
    std::vector<std::string> call_ids_;
};

/// Chat-endpoint judge: sends the rendered trajectory, expects a JSON array
/// of call_ids back.
class RemoteJudge : public PlanJudge {
public:
    RemoteJudge(std::string endpoint, std::string model);
    std::vector<std::string> select(const Task& task, const WMTrajectory& traj) override;

private:
    std::string endpoint_;
    std::string model_;
};

/// Algorithm line "select best plan from world-model explorations".
/// passthrough keeps the trajectory's actions in order, one call per step;
/// judge-policy lets the judge pick a subset/reordering, validated so only
/// vetted actions can execute.
Plan select_optimal_plan(const WMTrajectory& traj, SelectStrategy strategy,
                         PlanJudge* judge = nullptr, const Task* task = nullptr);

/// Plan score: fraction of simulated observations that are schema-conformant
/// and non-error, minus length_penalty per action. An empty plan scores 0.
/// schema_lookup may be null; conformance then reduces to the non-error
/// check.
using SchemaLookup = std::function<const Json*(const std::string& server, const std::string& tool)>;
double plan_reward(const std::vector<ToolCall>& plan_actions,
                   const std::vector<SimulatedObservation>& sims, const MctsConfig& cfg,
                   const SchemaLookup& schema_lookup = nullptr);

/// True when the simulated payload is non-error and (if a schema is given)
/// type-conformant.
bool sim_conformant(const ToolCall& call, const SimulatedObservation& sim,
                    const SchemaLookup& schema_lookup);

struct MctsResult {
    Plan plan;
    WMTrajectory trajectory; // concatenated simulated pairs from the search
};

/// Reward-based UCT search over policy proposals, simulating every explored
/// action with the world model. The returned plan follows the highest-visit
/// path and is grouped into parallel steps.
MctsResult mcts_select(const Task& task, PlannerPolicy& policy, WorldModel& wm,
                       const MctsConfig& cfg);

/// Groups a linear call sequence into parallel steps: adjacent calls join a
/// step unless an argument references the output of a call already in it.
/// A string argument containing "@{<call_id>}" references that call.
Plan group_parallel(const std::vector<ToolCall>& sequence);

/// All call_ids referenced by the call's arguments (the "@{...}" markers).
std::vector<std::string> argument_references(const ToolCall& call);

} // namespace cosmos
