#pragma once

#include <memory>
#include <string>

#include "cosmos/plan_select.hpp"
#include "cosmos/planner.hpp"
#include "cosmos/sim_env.hpp"
#include "cosmos/types.hpp"

namespace cosmos {

struct ExecOptions {
    // Algorithm default: failed actions are skipped, not revised.
    bool adjust_on_failure = false;
    bool parallel = true;
    int per_call_timeout_ms = 30000;
    int max_parallel = 4;
};

/// pi_final: turns the execution trajectory into the final answer.
class AnswerSynthesizer {
public:
    virtual ~AnswerSynthesizer() = default;
    virtual std::string synthesize(const Task& task, const ExecutionTrajectory& trajectory) = 0;
};

/// Deterministic templater: task id plus one-line digests per call. The
/// drop-in for runs that must stay model-free.
class TemplateSynthesizer : public AnswerSynthesizer {
public:
    std::string synthesize(const Task& task, const ExecutionTrajectory& trajectory) override;
};

/// LLM-backed synthesizer speaking the chat-completions wire format; falls
/// back to the deterministic templater on transport failure.
class RemoteSynthesizer : public AnswerSynthesizer {
public:
    RemoteSynthesizer(std::string endpoint, std::string model);
    std::string synthesize(const Task& task, const ExecutionTrajectory& trajectory) override;

private:
    std::string endpoint_;
    std::string model_;
    TemplateSynthesizer fallback_;
};

/// pi_plan_adjust: rewrites the remaining plan after a failure.
class PlanAdjuster {
public:
    virtual ~PlanAdjuster() = default;
    virtual Plan adjust(const Plan& remaining, const ToolCall& failed_call,
                        const Observation& failure) = 0;
};

/// Built-in adjuster: drops every remaining call whose arguments reference
/// the failed call's output. Also the fallback when a custom adjuster fails.
Plan adjust_plan(const Plan& remaining, const std::pair<ToolCall, Observation>& failure,
                 PlanAdjuster* adjuster = nullptr);

/// Phase 2 of the run: execute the committed plan step by step. Calls within
/// a step run concurrently under opts.parallel and commit in call_id order.
/// Failed calls land in failed_entries; execution continues (optionally
/// adjusting the remainder first).
RunResult execute_plan(const Task& task, const Plan& plan, Environment& env,
                       const ExecOptions& opts, AnswerSynthesizer& synth,
                       PlanAdjuster* adjuster = nullptr);

/// The no-world-model baseline: interleaves policy actions with real calls,
/// feeding each observation back into the state, until Stop or max_rounds.
RunResult run_react_baseline(const Task& task, Environment& env, PlannerPolicy& policy,
                             int max_rounds, AnswerSynthesizer& synth);

/// Plan-selection strategy for the composed agent.
struct WmAgentOptions {
    PlannerConfig planner;
    ExecOptions exec;
    bool use_mcts = false;             // false: plan_with_simulation + select_optimal_plan
    MctsConfig mcts;
    SelectStrategy selection = SelectStrategy::Passthrough;
    PlanJudge* judge = nullptr;
};

/// The composed world-model agent: plan in simulation, select a plan,
/// execute it for real. RunResult carries both trajectories. Errors from a
/// phase are re-thrown tagged with the phase name.
RunResult run_wm_agent(const Task& task, PlannerPolicy& policy, WorldModel& wm, Environment& env,
                       const WmAgentOptions& opts, AnswerSynthesizer& synth);

} // namespace cosmos
