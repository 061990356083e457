#include "cosmos/plan_select.hpp"

#include <algorithm>
#include <limits>

#include "cosmos/chat_client.hpp"
#include "cosmos/errors.hpp"
#include "cosmos/rng.hpp"

namespace cosmos {

SelectStrategy select_strategy_from_string(const std::string& s) {
    if (s == "passthrough") return SelectStrategy::Passthrough;
    if (s == "judge-policy") return SelectStrategy::JudgePolicy;
    throw ConfigError("unknown selection strategy '" + s + "'");
}

std::string to_string(SelectStrategy s) {
    return s == SelectStrategy::Passthrough ? "passthrough" : "judge-policy";
}

// ---------------------------------------------------------------------------
// Argument references and parallel grouping

namespace {

void collect_references(const Json& value, std::vector<std::string>& out) {
    if (value.is_string()) {
        const auto& text = value.get_ref<const std::string&>();
        std::size_t pos = 0;
        while ((pos = text.find("@{", pos)) != std::string::npos) {
            const auto close = text.find('}', pos + 2);
            if (close == std::string::npos) break;
            out.push_back(text.substr(pos + 2, close - pos - 2));
            pos = close + 1;
        }
    } else if (value.is_object() || value.is_array()) {
        for (const auto& v : value) collect_references(v, out);
    }
}

} // namespace

std::vector<std::string> argument_references(const ToolCall& call) {
    std::vector<std::string> refs;
    collect_references(call.arguments, refs);
    return refs;
}

Plan group_parallel(const std::vector<ToolCall>& sequence) {
    Plan plan;
    for (const auto& call : sequence) {
        const auto refs = argument_references(call);
        bool depends_on_group =
            !plan.steps.empty() &&
            std::any_of(plan.steps.back().calls.begin(), plan.steps.back().calls.end(),
                        [&](const ToolCall& prev) {
                            return std::find(refs.begin(), refs.end(), prev.call_id) != refs.end();
                        });
        if (plan.steps.empty() || depends_on_group)
            plan.steps.push_back(PlanStep{{call}});
        else
            plan.steps.back().calls.push_back(call);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Strategy selection

Plan select_optimal_plan(const WMTrajectory& traj, SelectStrategy strategy, PlanJudge* judge,
                         const Task* task) {
    Plan plan;
    if (strategy == SelectStrategy::Passthrough) {
        for (const auto& [call, sim] : traj.entries) plan.steps.push_back(PlanStep{{call}});
        return plan;
    }

    if (!judge) throw ConfigError("judge-policy selection requires a judge");
    static const Task empty_task;
    const auto selected = judge->select(task ? *task : empty_task, traj);

    for (const auto& id : selected) {
        const auto it = std::find_if(traj.entries.begin(), traj.entries.end(),
                                     [&](const auto& e) { return e.first.call_id == id; });
        if (it == traj.entries.end())
            throw ValidationError("plan", "judge selected call '" + id +
                                              "' that never appeared in the simulated trajectory");
        plan.steps.push_back(PlanStep{{it->first}});
    }
    return plan;
}

RemoteJudge::RemoteJudge(std::string endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::vector<std::string> RemoteJudge::select(const Task& task, const WMTrajectory& traj) {
    Json entries = Json::array();
    for (const auto& [call, sim] : traj.entries)
        entries.push_back(Json{{"call_id", call.call_id},
                               {"server", call.server},
                               {"tool", call.tool_name},
                               {"arguments", call.arguments},
                               {"simulated", sim.payload}});
    Json prompt{{"task", task.instruction},
                {"explored", entries},
                {"reply_with", "JSON array of call_ids to execute, in order"}};

    const std::string content =
        chat_complete(endpoint_, model_.empty() ? "judge" : model_, prompt.dump());
    try {
        Json ids = Json::parse(content);
        std::vector<std::string> out;
        for (const auto& id : ids) out.push_back(id.get<std::string>());
        return out;
    } catch (const Json::exception& e) {
        throw SimulationError(std::string("malformed judge reply: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Reward

bool sim_conformant(const ToolCall& call, const SimulatedObservation& sim,
                    const SchemaLookup& schema_lookup) {
    if (sim.payload.is_object() && sim.payload.contains("error")) return false;
    if (sim.payload.is_null()) return false;
    if (schema_lookup) {
        if (const Json* schema = schema_lookup(call.server, call.tool_name))
            return !schema_violation(sim.payload, *schema).has_value();
    }
    return true;
}

double plan_reward(const std::vector<ToolCall>& plan_actions,
                   const std::vector<SimulatedObservation>& sims, const MctsConfig& cfg,
                   const SchemaLookup& schema_lookup) {
    if (plan_actions.size() != sims.size())
        throw ValidationError("plan_reward", "actions and simulations must align");
    if (plan_actions.empty()) return 0.0;

    std::size_t conformant = 0;
    for (std::size_t i = 0; i < plan_actions.size(); ++i)
        if (sim_conformant(plan_actions[i], sims[i], schema_lookup)) ++conformant;

    return static_cast<double>(conformant) / static_cast<double>(plan_actions.size()) -
           cfg.length_penalty * static_cast<double>(plan_actions.size());
}

// ---------------------------------------------------------------------------
// MCTS

namespace {

struct SearchContext {
    const Task& task;
    PlannerPolicy& policy;
    WorldModel& wm;
    const MctsConfig& cfg;
    SchemaLookup schema_lookup;
    Rng rng;
};

double uct_score(const MctsNode& child, int parent_visits, double c) {
    if (child.visits == 0) return std::numeric_limits<double>::infinity();
    const double exploit = child.total_reward / child.visits;
    const double explore = c * std::sqrt(std::log(static_cast<double>(std::max(parent_visits, 1))) /
                                         child.visits);
    return exploit + explore;
}

MctsNode* best_uct_child(MctsNode& node, double c) {
    MctsNode* best = nullptr;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& child : node.children) {
        const double score = uct_score(*child, node.visits, c);
        if (score > best_score) {
            best_score = score;
            best = child.get();
        }
    }
    return best;
}

int path_depth(const std::vector<MctsNode*>& path) {
    int depth = 0;
    for (const auto* n : path)
        if (n->action_taken) ++depth;
    return depth;
}

} // namespace

MctsResult mcts_select(const Task& task, PlannerPolicy& policy, WorldModel& wm,
                       const MctsConfig& cfg) {
    if (cfg.iterations < 1 || cfg.max_depth < 1)
        throw ConfigError("mcts iterations and max_depth must be >= 1");

    SchemaLookup lookup;
    if (auto* aware = dynamic_cast<SchemaAware*>(&wm))
        lookup = [aware](const std::string& server, const std::string& tool) {
            return aware->output_schema(server, tool);
        };

    SearchContext ctx{task, policy, wm, cfg, lookup, Rng(cfg.seed)};

    auto root = std::make_unique<MctsNode>();
    root->state = AgentState{task, {}, 0};

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<MctsNode*> path{root.get()};
        MctsNode* node = root.get();

        // selection
        while (!node->terminal && node->expanded_once && node->untried.empty() &&
               !node->children.empty()) {
            node = best_uct_child(*node, cfg.exploration_c);
            path.push_back(node);
        }

        bool sim_failed = false;

        // expansion
        if (!node->terminal) {
            if (!node->expanded_once) {
                node->untried = ctx.policy.proposals(node->state);
                node->expanded_once = true;
            }
            if (!node->untried.empty()) {
                const std::size_t pick = ctx.rng.next_index(node->untried.size());
                auto proposal = node->untried[pick];
                node->untried.erase(node->untried.begin() +
                                    static_cast<std::ptrdiff_t>(pick));

                auto child = std::make_unique<MctsNode>();
                child->action_taken = proposal;
                if (!proposal) {
                    child->state = node->state;
                    child->terminal = true; // Stop: the plan ends here
                } else {
                    try {
                        child->sim = ctx.wm.simulate(*proposal, task.instruction,
                                                     render_history(node->state));
                        child->state =
                            update_state(node->state, {*proposal, AnyObservation{*child->sim}});
                        if (path_depth(path) + 1 >= cfg.max_depth)
                            child->terminal = true; // depth bound reached
                    } catch (const SimulationError&) {
                        child->state = node->state;
                        child->terminal = true;
                        sim_failed = true;
                    }
                }
                node = child.get();
                path.back()->children.push_back(std::move(child));
                path.push_back(node);
            }
        }

        // rollout + reward
        double reward = 0.0;
        if (!sim_failed) {
            std::vector<ToolCall> actions;
            std::vector<SimulatedObservation> sims;
            for (const auto* n : path) {
                if (n->action_taken && n->sim) {
                    actions.push_back(*n->action_taken);
                    sims.push_back(*n->sim);
                }
            }
            AgentState rollout_state = node->state;
            int depth = path_depth(path);
            bool rollout_ok = true;
            while (!node->terminal && depth < cfg.max_depth) {
                auto proposals = ctx.policy.proposals(rollout_state);
                if (proposals.empty()) break;
                const auto& proposal = proposals[ctx.rng.next_index(proposals.size())];
                if (!proposal) break; // Stop
                SimulatedObservation sim;
                try {
                    sim = ctx.wm.simulate(*proposal, task.instruction,
                                          render_history(rollout_state));
                } catch (const SimulationError&) {
                    rollout_ok = false;
                    break;
                }
                actions.push_back(*proposal);
                sims.push_back(sim);
                rollout_state = update_state(rollout_state, {*proposal, AnyObservation{sim}});
                ++depth;
            }
            reward = rollout_ok ? plan_reward(actions, sims, cfg, ctx.schema_lookup) : 0.0;
        }

        // backpropagation
        for (auto* n : path) {
            ++n->visits;
            n->total_reward += reward;
        }
    }

    // highest-visit (robust child) extraction
    MctsResult result;
    std::vector<ToolCall> selected;
    MctsNode* node = root.get();
    result.trajectory.terminated_by = WmTermination::MaxSteps;
    while (!node->children.empty()) {
        MctsNode* best = nullptr;
        for (const auto& child : node->children)
            if (!best || child->visits > best->visits) best = child.get();
        if (!best->action_taken || !best->sim) {
            result.trajectory.terminated_by = WmTermination::PolicyStop;
            break; // Stop node (or failed simulation) ends the plan
        }
        selected.push_back(*best->action_taken);
        result.trajectory.entries.emplace_back(*best->action_taken, *best->sim);
        node = best;
    }

    result.plan = group_parallel(selected);
    return result;
}

} // namespace cosmos
