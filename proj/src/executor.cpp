#include "cosmos/executor.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include "cosmos/chat_client.hpp"
#include "cosmos/errors.hpp"

namespace cosmos {

std::string TemplateSynthesizer::synthesize(const Task& task,
                                            const ExecutionTrajectory& trajectory) {
    if (trajectory.entries.empty())
        return "task " + task.id + ": no successful tool calls; no actions taken";

    std::ostringstream out;
    out << "task " << task.id << ": " << trajectory.entries.size() << " successful call(s)";
    for (const auto& [call, obs] : trajectory.entries) {
        std::string digest = obs.payload.dump();
        if (digest.size() > 120) digest = digest.substr(0, 117) + "...";
        out << "\n- " << call.server << "/" << call.tool_name << " => " << digest;
    }
    return out.str();
}

RemoteSynthesizer::RemoteSynthesizer(std::string endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::string RemoteSynthesizer::synthesize(const Task& task,
                                          const ExecutionTrajectory& trajectory) {
    Json observed = Json::array();
    for (const auto& [call, obs] : trajectory.entries)
        observed.push_back(Json{{"server", call.server},
                                {"tool", call.tool_name},
                                {"arguments", call.arguments},
                                {"result", obs.payload}});
    Json prompt{{"task", task.instruction},
                {"observed", observed},
                {"reply_with", "a concise final answer for the user"}};
    try {
        const std::string answer =
            chat_complete(endpoint_, model_.empty() ? "synthesizer" : model_, prompt.dump());
        if (!answer.empty()) return answer;
    } catch (const SimulationError&) {
        // fall through to the deterministic digest
    }
    return fallback_.synthesize(task, trajectory);
}

Plan adjust_plan(const Plan& remaining, const std::pair<ToolCall, Observation>& failure,
                 PlanAdjuster* adjuster) {
    if (failure.second.status != ObsStatus::Failure)
        throw ValidationError("adjust_plan", "failure observation must have failure status");

    if (adjuster) {
        try {
            return adjuster->adjust(remaining, failure.first, failure.second);
        } catch (const Error&) {
            // fall through to the built-in dependency drop
        }
    }

    Plan adjusted;
    for (const auto& step : remaining.steps) {
        PlanStep kept;
        for (const auto& call : step.calls) {
            const auto refs = argument_references(call);
            if (std::find(refs.begin(), refs.end(), failure.first.call_id) == refs.end())
                kept.calls.push_back(call);
        }
        if (!kept.calls.empty()) adjusted.steps.push_back(std::move(kept));
    }
    return adjusted;
}

namespace {

TokenUsage trajectory_tokens(const ExecutionTrajectory& t) {
    TokenUsage sum;
    for (const auto& [call, obs] : t.entries) sum += obs.tokens;
    for (const auto& [call, obs] : t.failed_entries) sum += obs.tokens;
    return sum;
}

std::vector<std::pair<ToolCall, Observation>> run_step(Environment& env,
                                                       const std::vector<ToolCall>& calls,
                                                       const ExecOptions& opts) {
    std::vector<std::pair<ToolCall, Observation>> results;
    if (opts.parallel && calls.size() > 1) {
        std::vector<std::future<Observation>> futures;
        futures.reserve(calls.size());
        for (const auto& call : calls)
            futures.push_back(
                std::async(std::launch::async, [&env, call] { return env.call_tool(call); }));
        for (std::size_t i = 0; i < calls.size(); ++i)
            results.emplace_back(calls[i], futures[i].get());
    } else {
        for (const auto& call : calls) results.emplace_back(call, env.call_tool(call));
    }
    // commit order is deterministic regardless of completion order
    std::sort(results.begin(), results.end(),
              [](const auto& a, const auto& b) { return a.first.call_id < b.first.call_id; });
    return results;
}

} // namespace

RunResult execute_plan(const Task& task, const Plan& plan, Environment& env,
                       const ExecOptions& opts, AnswerSynthesizer& synth, PlanAdjuster* adjuster) {
    validate(plan);
    if (opts.per_call_timeout_ms < 1) throw ConfigError("per_call_timeout_ms must be >= 1");
    env.set_call_timeout_ms(opts.per_call_timeout_ms);

    RunResult result;
    result.task_id = task.id;
    result.plan = plan;
    result.agent_config = {{"mode", "plan-exec"}};

    Plan pending = plan;
    std::size_t step_index = 0;
    while (step_index < pending.steps.size()) {
        const auto step_results = run_step(env, pending.steps[step_index].calls, opts);
        ++result.rounds;

        std::optional<std::pair<ToolCall, Observation>> first_failure;
        for (const auto& entry : step_results) {
            if (entry.second.ok()) {
                result.trajectory.entries.push_back(entry);
            } else {
                result.trajectory.failed_entries.push_back(entry);
                if (!first_failure) first_failure = entry;
            }
        }

        if (first_failure && opts.adjust_on_failure) {
            Plan remaining;
            remaining.steps.assign(pending.steps.begin() + static_cast<std::ptrdiff_t>(step_index) + 1,
                                   pending.steps.end());
            Plan rewritten = adjust_plan(remaining, *first_failure, adjuster);
            pending.steps.resize(step_index + 1);
            for (auto& s : rewritten.steps) pending.steps.push_back(std::move(s));
        }
        ++step_index;
    }

    result.answer = synth.synthesize(task, result.trajectory);
    result.tokens = trajectory_tokens(result.trajectory);
    return result;
}

RunResult run_react_baseline(const Task& task, Environment& env, PlannerPolicy& policy,
                             int max_rounds, AnswerSynthesizer& synth) {
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");

    RunResult result;
    result.task_id = task.id;
    result.agent_config = {{"agent", "react"}};

    AgentState state{task, {}, 0};
    while (result.rounds < max_rounds) {
        auto action = policy.next_action(state);
        if (!action) break;
        Observation obs = env.call_tool(*action);
        ++result.rounds;
        if (obs.ok())
            result.trajectory.entries.emplace_back(*action, obs);
        else
            result.trajectory.failed_entries.emplace_back(*action, obs);
        state = update_state(state, {*action, AnyObservation{obs}});
    }

    result.answer = synth.synthesize(task, result.trajectory);
    result.tokens = trajectory_tokens(result.trajectory);
    return result;
}

namespace {

[[noreturn]] void rethrow_tagged(const char* phase) {
    try {
        throw;
    } catch (const PlanningError& e) {
        throw PlanningError(std::string(phase) + ": " + e.what(), e.partial());
    } catch (const SimulationError& e) {
        throw SimulationError(std::string(phase) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(e.field(), std::string(phase) + ": " + e.what());
    } catch (const Error& e) {
        throw Error(std::string(phase) + ": " + e.what());
    }
}

} // namespace

RunResult run_wm_agent(const Task& task, PlannerPolicy& policy, WorldModel& wm, Environment& env,
                       const WmAgentOptions& opts, AnswerSynthesizer& synth) {
    WMTrajectory wm_traj;
    Plan plan;

    if (opts.use_mcts) {
        try {
            MctsResult search = mcts_select(task, policy, wm, opts.mcts);
            plan = std::move(search.plan);
            wm_traj = std::move(search.trajectory);
        } catch (...) {
            rethrow_tagged("planning");
        }
    } else {
        try {
            wm_traj = plan_with_simulation(task, policy, wm, opts.planner);
        } catch (...) {
            rethrow_tagged("planning");
        }
        try {
            plan = select_optimal_plan(wm_traj, opts.selection, opts.judge, &task);
        } catch (...) {
            rethrow_tagged("selection");
        }
    }

    RunResult result;
    try {
        result = execute_plan(task, plan, env, opts.exec, synth);
    } catch (...) {
        rethrow_tagged("execution");
    }
    result.agent_config = {{"agent", opts.use_mcts ? "spiral-exec" : "react-plan-exec"},
                           {"selection", opts.use_mcts ? "mcts" : to_string(opts.selection)},
                           {"world_model", to_string(wm.describe().kind)}};
    result.wm_trajectory = std::move(wm_traj);
    return result;
}

} // namespace cosmos
