#include "cosmos/types.hpp"

#include <sstream>

#include "cosmos/errors.hpp"

namespace cosmos {

void to_json(Json& j, const TokenUsage& v) {
    j = Json{{"prompt", v.prompt}, {"output", v.output}, {"total", v.total}};
}

void from_json(const Json& j, TokenUsage& v) {
    j.at("prompt").get_to(v.prompt);
    j.at("output").get_to(v.output);
    j.at("total").get_to(v.total);
}

void to_json(Json& j, const Task& v) {
    j = Json{{"id", v.id},
             {"instruction", v.instruction},
             {"server_ids", v.server_ids},
             {"difficulty", v.difficulty}};
}

void from_json(const Json& j, Task& v) {
    j.at("id").get_to(v.id);
    j.at("instruction").get_to(v.instruction);
    j.at("server_ids").get_to(v.server_ids);
    v.difficulty = j.value("difficulty", static_cast<int>(v.server_ids.size()));
}

void to_json(Json& j, const ToolCall& v) {
    j = Json{{"call_id", v.call_id},
             {"server", v.server},
             {"tool_name", v.tool_name},
             {"arguments", v.arguments}};
}

void from_json(const Json& j, ToolCall& v) {
    j.at("call_id").get_to(v.call_id);
    j.at("server").get_to(v.server);
    j.at("tool_name").get_to(v.tool_name);
    v.arguments = j.value("arguments", Json::object());
}

void to_json(Json& j, const Observation& v) {
    j = Json{{"call_id", v.call_id},
             {"status", to_string(v.status)},
             {"payload", v.payload},
             {"latency_ms", v.latency_ms},
             {"tokens", v.tokens}};
}

void from_json(const Json& j, Observation& v) {
    j.at("call_id").get_to(v.call_id);
    v.status = obs_status_from_string(j.at("status").get<std::string>());
    v.payload = j.at("payload");
    j.at("latency_ms").get_to(v.latency_ms);
    j.at("tokens").get_to(v.tokens);
}

void to_json(Json& j, const SimulatedObservation& v) {
    j = Json{{"call_id", v.call_id}, {"payload", v.payload}, {"fidelity", to_string(v.fidelity)}};
}

void from_json(const Json& j, SimulatedObservation& v) {
    j.at("call_id").get_to(v.call_id);
    v.payload = j.at("payload");
    v.fidelity = fidelity_from_string(j.at("fidelity").get<std::string>());
}

void to_json(Json& j, const WMTrajectory& v) {
    Json entries = Json::array();
    for (const auto& [call, sim] : v.entries) entries.push_back(Json{{"call", call}, {"sim", sim}});
    j = Json{{"entries", std::move(entries)}, {"terminated_by", to_string(v.terminated_by)}};
}

void from_json(const Json& j, WMTrajectory& v) {
    v.entries.clear();
    for (const auto& e : j.at("entries")) {
        v.entries.emplace_back(e.at("call").get<ToolCall>(), e.at("sim").get<SimulatedObservation>());
    }
    v.terminated_by = wm_termination_from_string(j.at("terminated_by").get<std::string>());
}

void to_json(Json& j, const Plan& v) {
    j = Json::array();
    for (const auto& step : v.steps) {
        Json calls = Json::array();
        for (const auto& c : step.calls) calls.push_back(c);
        j.push_back(std::move(calls));
    }
}

void from_json(const Json& j, Plan& v) {
    v.steps.clear();
    for (const auto& step : j) {
        PlanStep s;
        for (const auto& c : step) s.calls.push_back(c.get<ToolCall>());
        v.steps.push_back(std::move(s));
    }
}

std::string to_string(ObsStatus s) { return s == ObsStatus::Success ? "success" : "failure"; }

std::string to_string(Fidelity f) {
    switch (f) {
        case Fidelity::Summary: return "summary";
        case Fidelity::Exemplar: return "exemplar";
        case Fidelity::SyntheticData: return "synthetic-data";
        case Fidelity::Consequence: return "consequence";
    }
    return "summary";
}

std::string to_string(WmTermination t) {
    return t == WmTermination::PolicyStop ? "policy-stop" : "max-steps";
}

ObsStatus obs_status_from_string(const std::string& s) {
    if (s == "success") return ObsStatus::Success;
    if (s == "failure") return ObsStatus::Failure;
    throw ValidationError("status", "unknown status '" + s + "'");
}

Fidelity fidelity_from_string(const std::string& s) {
    if (s == "summary") return Fidelity::Summary;
    if (s == "exemplar") return Fidelity::Exemplar;
    if (s == "synthetic-data") return Fidelity::SyntheticData;
    if (s == "consequence") return Fidelity::Consequence;
    throw ValidationError("fidelity", "unknown fidelity '" + s + "'");
}

WmTermination wm_termination_from_string(const std::string& s) {
    if (s == "policy-stop") return WmTermination::PolicyStop;
    if (s == "max-steps") return WmTermination::MaxSteps;
    throw ValidationError("terminated_by", "unknown termination '" + s + "'");
}

void validate(const TokenUsage& v, const std::string& where) {
    if (v.prompt < 0 || v.output < 0 || v.total < 0)
        throw ValidationError(where, "token counts must be non-negative");
    if (v.total != v.prompt + v.output)
        throw ValidationError(where, "total (" + std::to_string(v.total) + ") != prompt + output (" +
                                         std::to_string(v.prompt + v.output) + ")");
}

void validate(const Task& v) {
    if (v.id.empty()) throw ValidationError("task.id", "must be non-empty");
    if (v.server_ids.empty()) throw ValidationError("task.server_ids", "must be non-empty");
    if (v.difficulty != static_cast<int>(v.server_ids.size()))
        throw ValidationError("task.difficulty", "must equal the number of servers");
}

void validate(const ToolCall& v) {
    if (v.call_id.empty()) throw ValidationError("call.call_id", "must be non-empty");
    if (v.tool_name.empty()) throw ValidationError("call.tool_name", "must be non-empty");
    if (!v.arguments.is_object()) throw ValidationError("call.arguments", "must be an object");
}

void validate(const Observation& v) {
    if (v.latency_ms < 0) throw ValidationError("observation.latency_ms", "must be >= 0");
    if (v.status == ObsStatus::Failure) {
        const bool has_text = v.payload.is_string()
                                  ? !v.payload.get<std::string>().empty()
                                  : v.payload.is_object() && v.payload.contains("error") &&
                                        !v.payload["error"].get<std::string>().empty();
        if (!has_text)
            throw ValidationError("observation.payload", "failure observations carry error text");
    }
    validate(v.tokens, "observation.tokens");
}

void validate(const SimulatedObservation& v) {
    const bool empty = v.payload.is_null() ||
                       (v.payload.is_string() && v.payload.get<std::string>().empty()) ||
                       (v.payload.is_object() && v.payload.empty());
    if (empty) throw ValidationError("simulated_observation.payload", "must be non-empty");
}

void validate(const WMTrajectory& v) {
    for (const auto& [call, sim] : v.entries) {
        validate(call);
        validate(sim);
        if (sim.call_id != call.call_id)
            throw ValidationError("wm_trajectory", "simulated observation call_id mismatch");
    }
}

void validate(const Plan& v) {
    std::map<std::string, int> seen;
    for (const auto& step : v.steps) {
        if (step.calls.empty()) throw ValidationError("plan.step", "every step must be non-empty");
        for (const auto& c : step.calls) {
            validate(c);
            if (++seen[c.call_id] > 1)
                throw ValidationError("plan", "call_id '" + c.call_id + "' repeats across the plan");
        }
    }
}

void validate(const RunResult& v) {
    if (v.task_id.empty()) throw ValidationError("result.task_id", "must be non-empty");
    if (v.answer.empty()) throw ValidationError("result.answer", "must be non-empty on completion");
    if (v.rounds < 0) throw ValidationError("result.rounds", "must be >= 0");
    validate(v.plan);
    TokenUsage sum;
    std::map<std::string, int> attempted_ids;
    for (const auto& [call, obs] : v.trajectory.entries) {
        validate(call);
        validate(obs);
        if (obs.status != ObsStatus::Success)
            throw ValidationError("trajectory.entries", "entries must contain only successes");
        sum += obs.tokens;
        ++attempted_ids[call.call_id];
    }
    for (const auto& [call, obs] : v.trajectory.failed_entries) {
        validate(call);
        validate(obs);
        if (obs.status != ObsStatus::Failure)
            throw ValidationError("trajectory.failed_entries", "must contain only failures");
        sum += obs.tokens;
        ++attempted_ids[call.call_id];
    }
    for (const auto& [id, count] : attempted_ids)
        if (count > 1)
            throw ValidationError("trajectory", "call_id '" + id + "' repeats within one run");
    if (v.wm_trajectory) validate(*v.wm_trajectory);
    validate(v.tokens, "result.tokens");
    if (v.tokens != sum)
        throw ValidationError("result.tokens", "totals must equal the sum over recorded calls");
}

namespace {

Json exec_entry_line(const std::pair<ToolCall, Observation>& e, bool failed) {
    return Json{{"type", "exec"}, {"failed", failed}, {"call", e.first}, {"obs", e.second}};
}

} // namespace

std::string encode_trajectory(const RunResult& result) {
    validate(result);

    std::ostringstream out;
    Json header{{"format", kTrajFormatVersion},
                {"task_id", result.task_id},
                {"agent_config", result.agent_config},
                {"plan", result.plan},
                {"rounds", result.rounds},
                {"tokens", result.tokens}};
    if (result.wm_trajectory)
        header["wm_terminated_by"] = to_string(result.wm_trajectory->terminated_by);
    out << header.dump() << '\n';
    out << Json{{"answer", result.answer}}.dump() << '\n';
    for (const auto& e : result.trajectory.entries) out << exec_entry_line(e, false).dump() << '\n';
    for (const auto& e : result.trajectory.failed_entries) out << exec_entry_line(e, true).dump() << '\n';
    if (result.wm_trajectory) {
        for (const auto& [call, sim] : result.wm_trajectory->entries)
            out << Json{{"type", "wm"}, {"call", call}, {"sim", sim}}.dump() << '\n';
    }
    return out.str();
}

RunResult decode_trajectory(const std::string& bytes) {
    if (bytes.empty()) throw ParseError("empty input", 1);

    std::istringstream in(bytes);
    std::string line;
    int line_no = 0;
    auto next_line = [&](bool required) -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty()) return true;
        }
        if (required) throw ParseError("unexpected end of input", line_no + 1);
        return false;
    };
    auto parse_line = [&]() -> Json {
        try {
            return Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(e.what(), line_no);
        }
    };

    RunResult result;
    bool wm_present = false;

    next_line(true);
    Json header = parse_line();
    try {
        if (header.at("format").get<std::string>() != kTrajFormatVersion)
            throw ParseError("unsupported format '" + header["format"].get<std::string>() + "'",
                             line_no);
        header.at("task_id").get_to(result.task_id);
        result.agent_config =
            header.value("agent_config", std::map<std::string, std::string>{});
        header.at("plan").get_to(result.plan);
        header.at("rounds").get_to(result.rounds);
        header.at("tokens").get_to(result.tokens);
        if (header.contains("wm_terminated_by")) {
            wm_present = true;
            result.wm_trajectory = WMTrajectory{};
            result.wm_trajectory->terminated_by =
                wm_termination_from_string(header["wm_terminated_by"].get<std::string>());
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line_no);
    }

    next_line(true);
    Json answer_line = parse_line();
    if (!answer_line.contains("answer"))
        throw ParseError("expected answer line", line_no);
    answer_line["answer"].get_to(result.answer);

    while (next_line(false)) {
        Json rec = parse_line();
        std::string type;
        try {
            type = rec.at("type").get<std::string>();
            if (type == "exec") {
                std::pair<ToolCall, Observation> e{rec.at("call").get<ToolCall>(),
                                                   rec.at("obs").get<Observation>()};
                if (rec.at("failed").get<bool>())
                    result.trajectory.failed_entries.push_back(std::move(e));
                else
                    result.trajectory.entries.push_back(std::move(e));
            } else if (type == "wm") {
                if (!wm_present)
                    throw ParseError("wm entry without wm_terminated_by in header", line_no);
                result.wm_trajectory->entries.emplace_back(
                    rec.at("call").get<ToolCall>(), rec.at("sim").get<SimulatedObservation>());
            } else {
                throw ParseError("unknown record type '" + type + "'", line_no);
            }
        } catch (const Json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_no);
        }
    }

    validate(result);
    return result;
}

} // namespace cosmos
