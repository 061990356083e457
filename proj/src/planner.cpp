#include "cosmos/planner.hpp"

#include <fstream>
#include <sstream>

#include "cosmos/chat_client.hpp"

namespace cosmos {

AgentState update_state(const AgentState& state, std::pair<ToolCall, AnyObservation> pair) {
    AgentState next = state;
    next.history.push_back(std::move(pair));
    next.step = next.history.size();
    return next;
}

std::string render_history(const AgentState& state, bool include_observations) {
    std::ostringstream out;
    std::size_t i = 0;
    for (const auto& [call, obs] : state.history) {
        out << "step " << i++ << ": " << call.server << "/" << call.tool_name << "("
            << call.arguments.dump() << ")";
        if (include_observations) {
            if (const auto* sim = std::get_if<SimulatedObservation>(&obs))
                out << " ~> " << sim->payload.dump();
            else if (const auto* real = std::get_if<Observation>(&obs))
                out << " -> [" << to_string(real->status) << "] " << real->payload.dump();
        }
        out << '\n';
    }
    return out.str();
}

WMTrajectory plan_with_simulation(const Task& task, PlannerPolicy& policy, WorldModel& wm,
                                  const PlannerConfig& cfg) {
    if (cfg.max_steps < 1) throw ConfigError("planner max_steps must be >= 1");

    WMTrajectory traj;
    AgentState state{task, {}, 0};
    // policy_state mirrors state; with revise_on_simulation off the
    // simulated payloads the policy sees are withheld, so it plans from its
    // own actions alone while the trajectory keeps the real simulations.
    AgentState policy_state = state;
    traj.terminated_by = WmTermination::MaxSteps;

    while (static_cast<int>(traj.entries.size()) < cfg.max_steps) {
        auto action = policy.next_action(cfg.revise_on_simulation ? state : policy_state);
        if (!action) {
            traj.terminated_by = WmTermination::PolicyStop;
            break;
        }
        SimulatedObservation sim;
        try {
            sim = wm.simulate(*action, task.instruction, render_history(state));
        } catch (const SimulationError& e) {
            if (cfg.skip_failed_simulations) continue;
            throw PlanningError(std::string(e.what()) + " (at planning step " +
                                    std::to_string(traj.entries.size()) + ")",
                                traj);
        }
        traj.entries.emplace_back(*action, sim);
        state = update_state(state, {*action, AnyObservation{sim}});
        if (!cfg.revise_on_simulation) {
            SimulatedObservation hidden = sim;
            hidden.payload = "observation withheld (revise_on_simulation=false)";
            policy_state = update_state(policy_state, {*action, AnyObservation{hidden}});
        }
    }
    return traj;
}

namespace {

class ScriptedPolicy : public PlannerPolicy {
public:
    explicit ScriptedPolicy(std::vector<ToolCall> script) : script_(std::move(script)) {}

    std::optional<ToolCall> next_action(const AgentState&) override {
        if (cursor_ >= script_.size()) return std::nullopt;
        return script_[cursor_++];
    }

private:
    std::vector<ToolCall> script_;
    std::size_t cursor_ = 0;
};

} // namespace

std::shared_ptr<PlannerPolicy> scripted_policy(std::vector<ToolCall> script) {
    return std::make_shared<ScriptedPolicy>(std::move(script));
}

std::optional<ParsedReply> parse_policy_reply(const std::string& reply) {
    std::istringstream lines(reply);
    std::string line;
    while (std::getline(lines, line)) {
        // trim
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t\r");
        if (line.substr(begin, end - begin + 1) == "FINISH") return ParsedReply{true, std::nullopt};
    }

    const auto open = reply.find('{');
    if (open == std::string::npos) return std::nullopt;
    // widest parseable JSON object starting at the first brace
    for (auto close = reply.rfind('}'); close != std::string::npos && close > open;
         close = reply.rfind('}', close - 1)) {
        Json j = Json::parse(reply.substr(open, close - open + 1), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        if (!j.contains("tool_name") || !j.contains("server")) return std::nullopt;
        ToolCall call;
        call.server = j["server"].get<std::string>();
        call.tool_name = j["tool_name"].get<std::string>();
        call.arguments = j.value("arguments", Json::object());
        if (!call.arguments.is_object()) return std::nullopt;
        return ParsedReply{false, call};
    }
    return std::nullopt;
}

RemotePolicy::RemotePolicy(RemotePolicyConfig cfg) : cfg_(std::move(cfg)) {}

std::string RemotePolicy::complete(const std::string& prompt) {
    return chat_complete(cfg_.endpoint, cfg_.model.empty() ? "planner" : cfg_.model, prompt);
}

std::optional<ToolCall> RemotePolicy::next_action(const AgentState& state) {
    std::string system_text;
    if (!cfg_.template_path.empty()) {
        std::ifstream in(cfg_.template_path);
        if (!in) throw ConfigError("cannot read policy template " + cfg_.template_path);
        system_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    Json schemas = Json::array();
    for (const auto& [server, tool] : cfg_.tool_schemas)
        schemas.push_back(Json{{"server", server},
                               {"name", tool.name},
                               {"description", tool.description},
                               {"param_schema", tool.param_schema}});

    std::ostringstream prompt;
    if (!system_text.empty()) prompt << system_text << "\n\n";
    prompt << "task: " << state.task.instruction << "\n";
    prompt << "tools: " << schemas.dump() << "\n";
    prompt << "history:\n" << render_history(state) << "\n";
    prompt << "Reply with one tool call as JSON {\"server\":...,\"tool_name\":...,\"arguments\":{...}}"
           << " or the single word FINISH.\n";

    for (int attempt = 0; attempt <= cfg_.parse_retries; ++attempt) {
        const std::string reply = complete(prompt.str());
        if (auto parsed = parse_policy_reply(reply)) {
            if (parsed->stop) return std::nullopt;
            ToolCall call = *parsed->action;
            if (call.call_id.empty())
                call.call_id = "remote-" + std::to_string(next_call_index_++);
            return call;
        }
    }
    warnings_.push_back("unparseable policy reply after " + std::to_string(cfg_.parse_retries + 1) +
                        " attempts; treating as Stop");
    return std::nullopt;
}

std::shared_ptr<PlannerPolicy> remote_policy(RemotePolicyConfig cfg) {
    return std::make_shared<RemotePolicy>(std::move(cfg));
}

} // namespace cosmos
