#include "cosmos/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cosmos/errors.hpp"
#include "cosmos/planner.hpp"
#include "cosmos/rng.hpp"

namespace fs = std::filesystem;

namespace cosmos {

AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "react") return AgentKind::React;
    if (s == "react-plan-exec") return AgentKind::ReactPlanExec;
    if (s == "spiral-exec") return AgentKind::SpiralExec;
    throw ConfigError("unknown agent kind '" + s + "'");
}

std::string to_string(AgentKind k) {
    switch (k) {
        case AgentKind::React: return "react";
        case AgentKind::ReactPlanExec: return "react-plan-exec";
        case AgentKind::SpiralExec: return "spiral-exec";
    }
    return "react";
}

// ---------------------------------------------------------------------------
// Loading

TaskSuite load_task_suite(const fs::path& path) {
    if (!fs::is_directory(path)) throw ParseError("task suite directory not found: " + path.string());

    TaskSuite suite;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        std::ifstream in(file);
        Json j;
        try {
            in >> j;
        } catch (const Json::parse_error& e) {
            throw ParseError(file.string() + ": " + e.what());
        }
        if (j.value("format", "") != kTaskFormatVersion)
            throw ParseError(file.string() + ": expected format " + kTaskFormatVersion);
        Task task = j.get<Task>();
        validate(task);
        suite.tasks.push_back(std::move(task));
    }

    std::sort(suite.tasks.begin(), suite.tasks.end(),
              [](const Task& a, const Task& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < suite.tasks.size(); ++i)
        if (suite.tasks[i].id == suite.tasks[i - 1].id)
            throw ValidationError("suite", "duplicate task id '" + suite.tasks[i].id + "'");

    if (suite.tasks.empty())
        std::cerr << "warning: task suite " << path.string() << " is empty\n";
    return suite;
}

BenchConfig load_bench_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open bench config " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kBenchFormatVersion)
        throw ParseError(path.string() + ": expected format " + kBenchFormatVersion);

    const fs::path base = path.parent_path();
    auto resolve = [&base](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    BenchConfig cfg;
    try {
        cfg.suite_path = resolve(j.at("suite").get<std::string>());
        cfg.servers_dir = resolve(j.at("servers_dir").get<std::string>());
        cfg.k = j.value("k", 1);
        cfg.seed = j.value("seed", 0ULL);
        cfg.output_dir = resolve(j.value("output_dir", "out"));
        cfg.jobs = j.value("jobs", 1);
        if (j.contains("failure")) cfg.failure = parse_failure_policy(j["failure"]);

        for (const auto& cj : j.at("configurations")) {
            AgentConfiguration ac;
            ac.name = cj.at("name").get<std::string>();
            ac.agent = agent_kind_from_string(cj.at("agent").get<std::string>());
            if (cj.contains("world_model"))
                ac.world_model = cj["world_model"].get<WorldModelDescriptor>();
            if (cj.contains("planner")) {
                ac.planner.kind = cj["planner"].value("kind", "each-tool-once");
                ac.planner.params = cj["planner"].value("params", Json::object());
                if (ac.planner.params.contains("scripts_dir"))
                    ac.planner.params["scripts_dir"] =
                        resolve(ac.planner.params["scripts_dir"].get<std::string>()).string();
            }
            if (cj.contains("selection"))
                ac.selection = select_strategy_from_string(cj["selection"].get<std::string>());
            if (cj.contains("mcts")) {
                const auto& m = cj["mcts"];
                ac.mcts.iterations = m.value("iterations", ac.mcts.iterations);
                ac.mcts.max_depth = m.value("depth", ac.mcts.max_depth);
                ac.mcts.exploration_c = m.value("c", ac.mcts.exploration_c);
                ac.mcts.seed = m.value("seed", ac.mcts.seed);
                ac.mcts.length_penalty = m.value("length_penalty", ac.mcts.length_penalty);
            }
            ac.max_rounds = cj.value("max_rounds", 15);
            cfg.configurations.push_back(std::move(ac));
        }
    } catch (const Json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    if (cfg.k < 1) throw ConfigError("k must be >= 1");
    for (const auto& ac : cfg.configurations) {
        if (ac.agent == AgentKind::React && ac.world_model)
            throw ConfigError("configuration '" + ac.name + "': react takes no world model");
        if (ac.agent != AgentKind::React && !ac.world_model)
            throw ConfigError("configuration '" + ac.name + "': agent requires a world model");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Per-cell execution

namespace {

std::vector<ServerSpec> specs_for_task(const Task& task, const fs::path& servers_dir,
                                       std::uint64_t run_seed) {
    std::vector<ServerSpec> specs;
    for (const auto& server_id : task.server_ids) {
        const fs::path file = servers_dir / (server_id + ".json");
        if (!fs::exists(file))
            throw ConfigError("missing server mapping: no spec file for '" + server_id + "'");
        ServerSpec spec = load_server_spec(file);
        spec.seed ^= run_seed; // repetitions and seeds vary the generated data
        specs.push_back(std::move(spec));
    }
    return specs;
}

Json default_for_schema(const Json& prop) {
    if (prop.contains("default")) return prop["default"];
    const std::string type = prop.value("type", "string");
    if (type == "number" || type == "integer") return 1;
    if (type == "boolean") return true;
    if (type == "array") return Json::array();
    if (type == "object") return Json::object();
    return "sample";
}

std::vector<ToolCall> build_script(const AgentConfiguration& cfg, const Task& task,
                                   Environment& env, CallIdGenerator& ids) {
    std::vector<ToolCall> script;
    if (cfg.planner.kind == "scripted") {
        Json raw = Json::array();
        if (cfg.planner.params.contains("scripts") &&
            cfg.planner.params["scripts"].contains(task.id)) {
            raw = cfg.planner.params["scripts"][task.id];
        } else if (cfg.planner.params.contains("scripts_dir")) {
            const fs::path file =
                fs::path(cfg.planner.params["scripts_dir"].get<std::string>()) / (task.id + ".json");
            if (fs::exists(file)) {
                std::ifstream in(file);
                in >> raw;
            }
        }
        for (const auto& cj : raw) {
            ToolCall call;
            call.call_id = cj.value("call_id", "");
            if (call.call_id.empty()) call.call_id = ids.next();
            call.server = cj.at("server").get<std::string>();
            call.tool_name = cj.at("tool_name").get<std::string>();
            call.arguments = cj.value("arguments", Json::object());
            script.push_back(std::move(call));
        }
    } else if (cfg.planner.kind == "each-tool-once") {
        for (const auto& [server, tool] : env.list_tools()) {
            ToolCall call;
            call.call_id = ids.next();
            call.server = server;
            call.tool_name = tool.name;
            if (tool.param_schema.contains("properties"))
                for (const auto& [key, prop] : tool.param_schema["properties"].items())
                    call.arguments[key] = default_for_schema(prop);
            script.push_back(std::move(call));
        }
    } else {
        throw ConfigError("unsupported planner kind '" + cfg.planner.kind + "' for grid runs");
    }
    return script;
}

std::shared_ptr<WorldModel> world_model_for_task(const AgentConfiguration& cfg,
                                                 const std::vector<ServerSpec>& specs) {
    WorldModelDescriptor desc = *cfg.world_model;
    if (desc.kind == WmKind::SchemaOracle && !desc.params.contains("servers") &&
        !desc.params.contains("server_specs")) {
        // bind the oracle to the task's own servers
        Json servers = Json::array();
        for (const auto& s : specs) {
            Json tools = Json::array();
            for (const auto& t : s.tools)
                tools.push_back(Json{{"name", t.name},
                                     {"description", t.description},
                                     {"param_schema", t.param_schema},
                                     {"output_schema", t.output_schema},
                                     {"behavior", t.behavior == ToolBehavior::PureFunction
                                                      ? "pure-function"
                                                      : t.behavior == ToolBehavior::TableLookup
                                                            ? "table-lookup"
                                                            : "templated-random"},
                                     {"reference", t.reference}});
            servers.push_back(Json{{"format", kSpecFormatVersion},
                                   {"server_id", s.server_id},
                                   {"seed", s.seed},
                                   {"tools", std::move(tools)}});
        }
        desc.params["servers"] = std::move(servers);
    }
    return make_world_model(desc);
}

RunResult run_cell(const BenchConfig& bench, const AgentConfiguration& cfg, const Task& task,
                   int rep) {
    const std::uint64_t run_seed =
        mix_seed(bench.seed, cfg.name + "/" + task.id + "/" + std::to_string(rep));
    CallIdGenerator ids(run_seed);

    SimEnvironment env(specs_for_task(task, bench.servers_dir, run_seed), bench.failure);
    auto script = build_script(cfg, task, env, ids);
    auto policy = scripted_policy(script);
    TemplateSynthesizer synth;

    RunResult result;
    if (cfg.agent == AgentKind::React) {
        result = run_react_baseline(task, env, *policy, cfg.max_rounds, synth);
    } else {
        WmAgentOptions opts;
        opts.planner.max_steps = cfg.max_rounds;
        opts.selection = cfg.selection;
        opts.use_mcts = cfg.agent == AgentKind::SpiralExec;
        opts.mcts = cfg.mcts;
        opts.mcts.seed ^= run_seed;
        auto wm = world_model_for_task(cfg, env.servers());
        result = run_wm_agent(task, *policy, *wm, env, opts, synth);
    }
    result.agent_config["config"] = cfg.name;
    result.agent_config["agent"] = to_string(cfg.agent);
    result.agent_config["rep"] = std::to_string(rep);
    return result;
}

struct Cell {
    std::size_t config_index;
    const Task* task;
    int rep;
    fs::path file;
};

} // namespace

// ---------------------------------------------------------------------------
// Cohort metric assembly

CohortResults compute_cohort(std::vector<ConfigRow> rows,
                             const std::map<JudgeKey, SubDimensionScores>* judge_scores, int k) {
    CohortResults cohort;
    cohort.k = k;

    for (auto& row : rows) {
        if (!row.results.empty()) {
            // pass@k: average attempted calls per task over its repetitions
            std::map<std::string, std::pair<double, int>> per_task;
            std::int64_t attempted = 0;
            std::int64_t succeeded = 0;
            for (const auto& r : row.results) {
                auto& [sum, count] = per_task[r.task_id];
                sum += static_cast<double>(r.trajectory.attempted_calls());
                ++count;
                attempted += static_cast<std::int64_t>(r.trajectory.attempted_calls());
                succeeded += static_cast<std::int64_t>(r.trajectory.entries.size());
            }
            double task_mean_sum = 0;
            for (const auto& [task_id, acc] : per_task) task_mean_sum += acc.first / acc.second;
            row.metrics.avg_tool_calls = task_mean_sum / static_cast<double>(per_task.size());
            if (attempted > 0)
                row.metrics.tool_call_success =
                    100.0 * static_cast<double>(succeeded) / static_cast<double>(attempted);
            row.tokens = token_rollup(row.results);
        }

        if (judge_scores) {
            SubDimensionScores sum{};
            int n = 0;
            for (const auto& [key, sub] : *judge_scores) {
                if (key.config != row.name) continue;
                sum.task_fulfillment += sub.task_fulfillment;
                sum.grounding += sub.grounding;
                sum.tool_appropriateness += sub.tool_appropriateness;
                sum.param_accuracy += sub.param_accuracy;
                sum.dep_awareness += sub.dep_awareness;
                sum.parallel_efficiency += sub.parallel_efficiency;
                ++n;
            }
            if (n > 0) {
                sum.task_fulfillment /= n;
                sum.grounding /= n;
                sum.tool_appropriateness /= n;
                sum.param_accuracy /= n;
                sum.dep_awareness /= n;
                sum.parallel_efficiency /= n;
                row.metrics.sub = sum;
                row.metrics.groups = aggregate_groups(sum);
                row.metrics.overall_orig =
                    overall_original(row.metrics.groups->task_completion,
                                     row.metrics.groups->tool_selection,
                                     row.metrics.groups->planning_effectiveness);
            }
        }
    }

    // cohort normalization over exactly the configurations present
    bool have = false;
    for (const auto& row : rows) {
        const auto& avg = row.metrics.avg_tool_calls;
        if (!avg) continue;
        if (!have) {
            cohort.cohort.min_avg_calls = cohort.cohort.max_avg_calls = *avg;
            have = true;
        } else {
            cohort.cohort.min_avg_calls = std::min(cohort.cohort.min_avg_calls, *avg);
            cohort.cohort.max_avg_calls = std::max(cohort.cohort.max_avg_calls, *avg);
        }
    }

    for (auto& row : rows) {
        auto& m = row.metrics;
        if (m.avg_tool_calls) {
            m.normalized_calls = normalize_avg_calls(*m.avg_tool_calls, cohort.cohort);
            if (m.tool_call_success)
                m.execution_quality = execution_quality(*m.tool_call_success, *m.normalized_calls);
        }
        if (m.groups && m.execution_quality)
            m.overall_new =
                overall_new(m.groups->task_completion, m.groups->tool_selection,
                            m.groups->planning_effectiveness, *m.execution_quality);
    }

    cohort.rows = std::move(rows);
    return cohort;
}

// ---------------------------------------------------------------------------
// Grid driver

CohortResults run_benchmark(const BenchConfig& cfg,
                            const std::map<JudgeKey, SubDimensionScores>* judge_scores) {
    const TaskSuite suite = load_task_suite(cfg.suite_path);

    std::vector<ConfigRow> rows(cfg.configurations.size());
    std::vector<Cell> cells;
    for (std::size_t ci = 0; ci < cfg.configurations.size(); ++ci) {
        rows[ci].name = cfg.configurations[ci].name;
        for (const auto& task : suite.tasks) {
            for (int rep = 0; rep < cfg.k; ++rep) {
                const fs::path dir = cfg.output_dir / "runs" / cfg.configurations[ci].name / task.id;
                cells.push_back(Cell{ci, &task, rep, dir / (std::to_string(rep) + ".traj")});
            }
        }
    }

    std::mutex mutex;
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            const AgentConfiguration& ac = cfg.configurations[cell.config_index];

            try {
                RunResult result;
                if (fs::exists(cell.file)) {
                    std::ifstream in(cell.file, std::ios::binary);
                    std::stringstream buffer;
                    buffer << in.rdbuf();
                    result = decode_trajectory(buffer.str());
                } else {
                    result = run_cell(cfg, ac, *cell.task, cell.rep);
                    fs::create_directories(cell.file.parent_path());
                    std::ofstream out(cell.file, std::ios::binary);
                    out << encode_trajectory(result);
                }
                std::lock_guard<std::mutex> lock(mutex);
                rows[cell.config_index].results.push_back(std::move(result));
            } catch (const std::exception& e) {
                fs::create_directories(cell.file.parent_path());
                std::ofstream err(cell.file.string() + ".error");
                err << e.what() << '\n';
                std::lock_guard<std::mutex> lock(mutex);
                ++rows[cell.config_index].failed_runs;
            }
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // stable result order regardless of scheduling
    for (auto& row : rows) {
        std::sort(row.results.begin(), row.results.end(), [](const RunResult& a, const RunResult& b) {
            const auto ra = a.agent_config.count("rep") ? a.agent_config.at("rep") : "";
            const auto rb = b.agent_config.count("rep") ? b.agent_config.at("rep") : "";
            return a.task_id != b.task_id ? a.task_id < b.task_id : ra < rb;
        });
    }

    return compute_cohort(std::move(rows), judge_scores, cfg.k);
}

std::vector<ConfigRow> load_runs(const fs::path& runs_dir) {
    std::vector<ConfigRow> rows;
    if (!fs::is_directory(runs_dir)) throw ParseError("runs directory not found: " + runs_dir.string());

    std::vector<fs::path> config_dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir))
        if (entry.is_directory()) config_dirs.push_back(entry.path());
    std::sort(config_dirs.begin(), config_dirs.end());

    for (const auto& dir : config_dirs) {
        ConfigRow row;
        row.name = dir.filename().string();
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (entry.path().extension() == ".traj") {
                std::ifstream in(entry.path(), std::ios::binary);
                std::stringstream buffer;
                buffer << in.rdbuf();
                row.results.push_back(decode_trajectory(buffer.str()));
            } else if (entry.path().extension() == ".error") {
                ++row.failed_runs;
            }
        }
        std::sort(row.results.begin(), row.results.end(),
                  [](const RunResult& a, const RunResult& b) { return a.task_id < b.task_id; });
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

struct Column {
    const char* header;
    bool lower_is_better;
    int decimals;
    std::function<std::optional<double>(const ConfigRow&)> value;
};

std::string format_value(std::optional<double> v, int decimals) {
    if (!v) return "-";
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(decimals);
    // display rounding is half-up, matching round1
    const double scale = std::pow(10.0, decimals);
    out << std::floor(*v * scale + 0.5) / scale;
    return out.str();
}

const std::vector<Column>& report_columns() {
    static const std::vector<Column> columns = {
        {"Task Fulfil.", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->task_fulfillment) : std::nullopt;
         }},
        {"Grounding", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->grounding) : std::nullopt;
         }},
        {"Tool Approp.", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->tool_appropriateness) : std::nullopt;
         }},
        {"Param. Accuracy", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->param_accuracy) : std::nullopt;
         }},
        {"Dep. Awareness", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->dep_awareness) : std::nullopt;
         }},
        {"Parallel. Effic.", false, 1, [](const ConfigRow& r) {
             const auto& s = r.metrics.sub;
             return s ? std::optional<double>(s->parallel_efficiency) : std::nullopt;
         }},
        {"Tool Call Success", false, 1,
         [](const ConfigRow& r) { return r.metrics.tool_call_success; }},
        {"Avg Tool Calls", true, 2, [](const ConfigRow& r) { return r.metrics.avg_tool_calls; }},
        {"Norm. Calls", false, 1, [](const ConfigRow& r) { return r.metrics.normalized_calls; }},
        {"Task Compl.", false, 1, [](const ConfigRow& r) {
             const auto& g = r.metrics.groups;
             return g ? std::optional<double>(g->task_completion) : std::nullopt;
         }},
        {"Tool Sel.", false, 1, [](const ConfigRow& r) {
             const auto& g = r.metrics.groups;
             return g ? std::optional<double>(g->tool_selection) : std::nullopt;
         }},
        {"Planning Effec.", false, 1, [](const ConfigRow& r) {
             const auto& g = r.metrics.groups;
             return g ? std::optional<double>(g->planning_effectiveness) : std::nullopt;
         }},
        {"Exec. Quality", false, 1, [](const ConfigRow& r) { return r.metrics.execution_quality; }},
        {"Overall (orig)", false, 1, [](const ConfigRow& r) { return r.metrics.overall_orig; }},
        {"Overall", false, 1, [](const ConfigRow& r) { return r.metrics.overall_new; }},
    };
    return columns;
}

std::vector<const ConfigRow*> sorted_rows(const CohortResults& cohort) {
    std::vector<const ConfigRow*> rows;
    for (const auto& row : cohort.rows) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [](const ConfigRow* a, const ConfigRow* b) {
        const double ka =
            a->metrics.overall_new.value_or(a->metrics.execution_quality.value_or(-1.0));
        const double kb =
            b->metrics.overall_new.value_or(b->metrics.execution_quality.value_or(-1.0));
        if (ka != kb) return ka > kb;
        return a->name < b->name;
    });
    return rows;
}

} // namespace

std::string render_report(const CohortResults& cohort, ReportFormat format) {
    const auto& columns = report_columns();
    const auto rows = sorted_rows(cohort);

    // best value per column, for markdown flagging
    std::vector<std::optional<double>> best(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (const auto* row : rows) {
            const auto v = columns[c].value(*row);
            if (!v) continue;
            if (!best[c] || (columns[c].lower_is_better ? *v < *best[c] : *v > *best[c]))
                best[c] = *v;
        }
    }

    std::ostringstream out;
    if (format == ReportFormat::Csv) {
        out << "config";
        for (const auto& col : columns) out << ',' << col.header;
        out << '\n';
        for (const auto* row : rows) {
            out << row->name;
            for (const auto& col : columns) out << ',' << format_value(col.value(*row), col.decimals);
            out << '\n';
        }
        return out.str();
    }

    out << "| Config |";
    for (const auto& col : columns) out << ' ' << col.header << " |";
    out << "\n|---|";
    for (std::size_t c = 0; c < columns.size(); ++c) out << "---|";
    out << '\n';
    for (const auto* row : rows) {
        out << "| " << row->name << " |";
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto v = columns[c].value(*row);
            std::string cell = format_value(v, columns[c].decimals);
            if (v && best[c] && *v == *best[c]) cell = "**" + cell + "**";
            out << ' ' << cell << " |";
        }
        out << '\n';
    }
    out << "\nGroup scores are the mean of their two sub-dimensions. "
           "Execution Quality = (Tool Call Success + normalized Avg Tool Calls) / 2; "
           "Avg Tool Calls is min-max normalized over this cohort and inverted. "
           "Overall = (Task Completion + Tool Selection + Planning Effectiveness + Execution "
           "Quality) / 4.\n";
    out << "pass@k: per-task metrics are averaged over the k=" << cohort.k << " repetitions.\n";
    return out.str();
}

std::vector<fs::path> emit_report(const CohortResults& cohort,
                                  const std::vector<ReportFormat>& formats,
                                  const fs::path& out_dir, const std::string& cohort_name) {
    fs::create_directories(out_dir / "reports");
    std::vector<fs::path> written;
    for (const auto format : formats) {
        const fs::path file = out_dir / "reports" /
                              (cohort_name + (format == ReportFormat::Markdown ? ".md" : ".csv"));
        std::ofstream out(file, std::ios::binary);
        out << render_report(cohort, format);
        written.push_back(file);
    }
    return written;
}

} // namespace cosmos
