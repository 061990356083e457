#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cosmos/errors.hpp"
#include "cosmos/executor.hpp"
#include "cosmos/harness.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/planner.hpp"
#include "cosmos/world_model.hpp"

namespace py = pybind11;
using namespace cosmos;

namespace {

Json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        Json out = Json::object();
        for (const auto& item : obj.cast<py::dict>())
            out[item.first.cast<std::string>()] = py_to_json(item.second);
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        Json out = Json::array();
        for (const auto& item : obj.cast<py::sequence>()) out.push_back(py_to_json(item));
        return out;
    }
    throw py::type_error("unsupported value type for JSON conversion");
}

py::object json_to_py(const Json& j) {
    switch (j.type()) {
        case Json::value_t::null: return py::none();
        case Json::value_t::boolean: return py::bool_(j.get<bool>());
        case Json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case Json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case Json::value_t::number_float: return py::float_(j.get<double>());
        case Json::value_t::string: return py::str(j.get<std::string>());
        case Json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(json_to_py(v));
            return out;
        }
        case Json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = json_to_py(v);
            return out;
        }
        default: return py::none();
    }
}

ToolCall call_from_dict(const py::dict& d) {
    ToolCall call;
    call.call_id = d.contains("call_id") ? d["call_id"].cast<std::string>() : "";
    call.server = d["server"].cast<std::string>();
    call.tool_name = d["tool_name"].cast<std::string>();
    call.arguments = d.contains("arguments") ? py_to_json(d["arguments"]) : Json::object();
    return call;
}

Task task_from_dict(const py::dict& d) {
    Task task;
    task.id = d["id"].cast<std::string>();
    task.instruction = d.contains("instruction") ? d["instruction"].cast<std::string>() : "";
    for (const auto& s : d["server_ids"].cast<py::list>())
        task.server_ids.push_back(s.cast<std::string>());
    task.difficulty = d.contains("difficulty") ? d["difficulty"].cast<int>()
                                               : static_cast<int>(task.server_ids.size());
    return task;
}

Json run_result_to_json(const RunResult& r) {
    Json entries = Json::array();
    for (const auto& [call, obs] : r.trajectory.entries)
        entries.push_back(Json{{"call", call}, {"obs", obs}});
    Json failed = Json::array();
    for (const auto& [call, obs] : r.trajectory.failed_entries)
        failed.push_back(Json{{"call", call}, {"obs", obs}});

    Json out{{"task_id", r.task_id}, {"agent_config", r.agent_config},
             {"answer", r.answer},   {"plan", r.plan},
             {"rounds", r.rounds},   {"tokens", r.tokens},
             {"trajectory", Json{{"entries", entries}, {"failed_entries", failed}}}};
    if (r.wm_trajectory) out["wm_trajectory"] = *r.wm_trajectory;
    return out;
}

py::object run_and_convert(const py::dict& task_dict, const py::list& script,
                           const std::vector<std::string>& spec_paths, std::uint64_t seed,
                           bool use_mcts, bool react_only) {
    Task task = task_from_dict(task_dict);
    CallIdGenerator ids(seed);

    std::vector<ServerSpec> specs;
    for (const auto& p : spec_paths) {
        auto spec = load_server_spec(p);
        spec.seed ^= seed;
        specs.push_back(std::move(spec));
    }
    SimEnvironment env(specs);

    std::vector<ToolCall> calls;
    for (const auto& item : script) {
        ToolCall c = call_from_dict(item.cast<py::dict>());
        if (c.call_id.empty()) c.call_id = ids.next();
        calls.push_back(std::move(c));
    }
    auto policy = scripted_policy(calls);
    TemplateSynthesizer synth;

    RunResult result;
    if (react_only) {
        result = run_react_baseline(task, env, *policy, 15, synth);
    } else {
        Json servers = Json::array();
        for (const auto& p : spec_paths) servers.push_back(p);
        WorldModelDescriptor wm_desc;
        wm_desc.kind = WmKind::SchemaOracle;
        wm_desc.params = Json{{"server_specs", servers}, {"seed", seed}};
        auto wm = make_world_model(wm_desc);
        WmAgentOptions opts;
        opts.use_mcts = use_mcts;
        opts.mcts.seed = seed;
        result = run_wm_agent(task, *policy, *wm, env, opts, synth);
    }
    return json_to_py(run_result_to_json(result));
}

} // namespace

PYBIND11_MODULE(_cosmos, m) {
    m.doc() = "World-model-infused planning and execution over simulated tool servers";

    py::register_exception<Error>(m, "CosmosError");

    // metric pipeline
    m.def("aggregate_groups", [](const py::dict& sub) {
        SubDimensionScores s = py_to_json(sub).get<SubDimensionScores>();
        const auto g = aggregate_groups(s);
        return py::make_tuple(g.task_completion, g.tool_selection, g.planning_effectiveness);
    }, py::arg("sub_dimensions"),
       "The three pairwise group means over the six sub-dimension scores.");
    m.def("overall_original", &overall_original, py::arg("task_completion"),
          py::arg("tool_selection"), py::arg("planning_effectiveness"));
    m.def("overall_new", &overall_new, py::arg("task_completion"), py::arg("tool_selection"),
          py::arg("planning_effectiveness"), py::arg("execution_quality"));
    m.def("normalize_avg_calls",
          [](double agent_avg, double min_avg, double max_avg) {
              return normalize_avg_calls(agent_avg, CohortStats{min_avg, max_avg});
          },
          py::arg("agent_avg"), py::arg("min_avg"), py::arg("max_avg"),
          "Min-max normalized and inverted average tool calls, as a percentage.");
    m.def("execution_quality", &execution_quality, py::arg("success_rate"),
          py::arg("normalized_calls"));
    m.def("round1", &round1, py::arg("value"), "Display rounding: half-up to one decimal.");

    // world models
    py::class_<WorldModel, std::shared_ptr<WorldModel>>(m, "WorldModel")
        .def("simulate",
             [](WorldModel& wm, const py::dict& call, const std::string& user_request,
                const py::object& context) {
                 std::optional<std::string> ctx;
                 if (!context.is_none()) ctx = context.cast<std::string>();
                 const auto sim = wm.simulate(call_from_dict(call), user_request, ctx);
                 return json_to_py(Json(sim));
             },
             py::arg("tool_call"), py::arg("user_request"), py::arg("context") = py::none())
        .def("describe", [](const WorldModel& wm) { return json_to_py(Json(wm.describe())); });

    m.def("make_world_model",
          [](const py::dict& descriptor) {
              return make_world_model(py_to_json(descriptor).get<WorldModelDescriptor>());
          },
          py::arg("descriptor"));

    // simulated environment
    py::class_<SimEnvironment>(m, "SimEnv")
        .def(py::init([](const std::vector<std::string>& spec_paths, const py::object& failure) {
                 std::vector<ServerSpec> specs;
                 for (const auto& p : spec_paths) specs.push_back(load_server_spec(p));
                 FailurePolicy policy;
                 if (!failure.is_none())
                     policy = parse_failure_policy(py_to_json(failure.cast<py::dict>()));
                 return std::make_unique<SimEnvironment>(std::move(specs), std::move(policy));
             }),
             py::arg("spec_paths"), py::arg("failure") = py::none())
        .def("list_tools",
             [](SimEnvironment& env) {
                 py::list out;
                 for (const auto& [server, tool] : env.list_tools()) {
                     py::dict d;
                     d["server"] = server;
                     d["name"] = tool.name;
                     d["param_schema"] = json_to_py(tool.param_schema);
                     d["output_schema"] = json_to_py(tool.output_schema);
                     out.append(d);
                 }
                 return out;
             })
        .def("call_tool",
             [](SimEnvironment& env, const py::dict& call) {
                 return json_to_py(Json(env.call_tool(call_from_dict(call))));
             },
             py::arg("tool_call"))
        .def("counters", [](SimEnvironment& env) {
            py::dict out;
            for (const auto& [server, c] : env.counters()) {
                py::dict row;
                row["calls"] = c.calls;
                row["failures"] = c.failures;
                row["tokens"] = c.tokens;
                out[py::str(server)] = row;
            }
            return out;
        });

    // trajectory codec
    m.def("decode_trajectory",
          [](const py::bytes& data) {
              return json_to_py(run_result_to_json(decode_trajectory(data.cast<std::string>())));
          },
          py::arg("data"), "Decode a cosmos-traj/1 byte string into a dict.");

    // full pipeline demos
    m.def("run_wm_agent", &run_and_convert, py::arg("task"), py::arg("script"),
          py::arg("spec_paths"), py::arg("seed") = 0, py::arg("use_mcts") = false,
          py::arg("react_only") = false,
          "Run a scripted agent against the simulated environment; returns the run as a dict.");
    m.def("encode_run",
          [](const py::dict& task_dict, const py::list& script,
             const std::vector<std::string>& spec_paths, std::uint64_t seed) {
              Task task = task_from_dict(task_dict);
              CallIdGenerator ids(seed);
              std::vector<ServerSpec> specs;
              for (const auto& p : spec_paths) {
                  auto spec = load_server_spec(p);
                  spec.seed ^= seed;
                  specs.push_back(std::move(spec));
              }
              SimEnvironment env(specs);
              std::vector<ToolCall> calls;
              for (const auto& item : script) {
                  ToolCall c = call_from_dict(item.cast<py::dict>());
                  if (c.call_id.empty()) c.call_id = ids.next();
                  calls.push_back(std::move(c));
              }
              auto policy = scripted_policy(calls);
              TemplateSynthesizer synth;
              auto wm =
                  make_world_model(WorldModelDescriptor{WmKind::Echo, "echo", Json::object()});
              const auto result = run_wm_agent(task, *policy, *wm, env, WmAgentOptions{}, synth);
              return py::bytes(encode_trajectory(result));
          },
          py::arg("task"), py::arg("script"), py::arg("spec_paths"), py::arg("seed") = 0,
          "Run the scripted plan-then-execute agent and return the encoded trajectory bytes.");

    m.attr("TRAJ_FORMAT") = kTrajFormatVersion;
    m.attr("SPEC_FORMAT") = kSpecFormatVersion;
}
