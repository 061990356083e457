#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cosmos/errors.hpp"
#include "cosmos/harness.hpp"
#include "cosmos/wire.hpp"

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_override, const std::string& judge_path, int jobs,
            const std::string& format) {
    cosmos::BenchConfig cfg = cosmos::load_bench_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (jobs > 0) cfg.jobs = jobs;

    std::map<cosmos::JudgeKey, cosmos::SubDimensionScores> judge;
    const bool have_judge = !judge_path.empty();
    if (have_judge) judge = cosmos::ingest_judge_scores(judge_path);

    const auto cohort = cosmos::run_benchmark(cfg, have_judge ? &judge : nullptr);

    std::vector<cosmos::ReportFormat> formats;
    if (format == "markdown-table" || format == "both")
        formats.push_back(cosmos::ReportFormat::Markdown);
    if (format == "csv" || format == "both") formats.push_back(cosmos::ReportFormat::Csv);
    const auto files = cosmos::emit_report(cohort, formats, cfg.output_dir);
    for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';

    int failed = 0;
    for (const auto& row : cohort.rows) failed += row.failed_runs;
    if (failed > 0)
        std::cout << failed << " run(s) failed; see .error files under "
                  << (cfg.output_dir / "runs").string() << '\n';
    return 0; // individual task failures are data, not process failures
}

int cmd_report(const std::string& runs_dir, const std::string& judge_path,
               const std::string& out_dir, const std::string& format, int k) {
    auto rows = cosmos::load_runs(runs_dir);

    std::map<cosmos::JudgeKey, cosmos::SubDimensionScores> judge;
    const bool have_judge = !judge_path.empty();
    if (have_judge) judge = cosmos::ingest_judge_scores(judge_path);

    const auto cohort = cosmos::compute_cohort(std::move(rows), have_judge ? &judge : nullptr, k);

    std::vector<cosmos::ReportFormat> formats;
    if (format == "markdown-table" || format == "both")
        formats.push_back(cosmos::ReportFormat::Markdown);
    if (format == "csv" || format == "both") formats.push_back(cosmos::ReportFormat::Csv);
    const auto files = cosmos::emit_report(cohort, formats, out_dir);
    for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    return 0;
}

int cmd_serve(const std::vector<std::string>& spec_paths, bool stdio, const std::string& http,
              std::optional<std::uint64_t> seed, const std::string& failure_json) {
    std::vector<cosmos::ServerSpec> specs;
    for (const auto& p : spec_paths) {
        auto spec = cosmos::load_server_spec(p);
        if (seed) spec.seed = *seed;
        specs.push_back(std::move(spec));
    }
    cosmos::FailurePolicy failure;
    if (!failure_json.empty())
        failure = cosmos::parse_failure_policy(cosmos::Json::parse(failure_json));
    cosmos::SimEnvironment env(std::move(specs), failure);

    if (!http.empty()) {
        const auto colon = http.rfind(':');
        const std::string host = colon == std::string::npos ? http : http.substr(0, colon);
        const int port = colon == std::string::npos ? 8080 : std::stoi(http.substr(colon + 1));
        cosmos::serve_http(env, host, port);
        return 0;
    }
    (void)stdio; // stdio is the default transport
    cosmos::serve_stdio(env, std::cin, std::cout);
    return 0;
}

int cmd_validate(const std::vector<std::string>& spec_paths, const std::string& config_path,
                 const std::string& suite_path, const std::string& judge_path) {
    int problems = 0;
    for (const auto& p : spec_paths) {
        try {
            const auto spec = cosmos::load_server_spec(p);
            std::cout << "ok: server spec " << p << " (" << spec.tools.size() << " tools)\n";
        } catch (const cosmos::Error& e) {
            std::cout << "invalid: " << p << ": " << e.what() << '\n';
            ++problems;
        }
    }
    if (!config_path.empty()) {
        try {
            const auto cfg = cosmos::load_bench_config(config_path);
            std::cout << "ok: bench config " << config_path << " (" << cfg.configurations.size()
                      << " configurations)\n";
        } catch (const cosmos::Error& e) {
            std::cout << "invalid: " << config_path << ": " << e.what() << '\n';
            ++problems;
        }
    }
    if (!suite_path.empty()) {
        try {
            const auto suite = cosmos::load_task_suite(suite_path);
            std::cout << "ok: task suite " << suite_path << " (" << suite.tasks.size()
                      << " tasks)\n";
        } catch (const cosmos::Error& e) {
            std::cout << "invalid: " << suite_path << ": " << e.what() << '\n';
            ++problems;
        }
    }
    if (!judge_path.empty()) {
        try {
            const auto scores = cosmos::ingest_judge_scores(judge_path);
            std::cout << "ok: judge scores " << judge_path << " (" << scores.size() << " rows)\n";
        } catch (const cosmos::Error& e) {
            std::cout << "invalid: " << judge_path << ": " << e.what() << '\n';
            ++problems;
        }
    }
    return problems == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cosmos: world-model-infused planning and execution over simulated tool servers"};
    app.require_subcommand(1);

    // run
    std::string run_config;
    std::optional<std::uint64_t> run_seed;
    std::string run_out;
    std::string run_judge;
    std::string run_format = "both";
    int run_jobs = 0;
    auto* run = app.add_subcommand("run", "execute a benchmark grid");
    run->add_option("--config", run_config, "cosmos-bench/1 config file")->required();
    run->add_option("--seed", run_seed, "override the config seed");
    run->add_option("--out", run_out, "override the output directory");
    run->add_option("--judge", run_judge, "cosmos-judge/1 score file to merge");
    run->add_option("--jobs", run_jobs, "task-level parallelism");
    run->add_option("--format", run_format, "report format: markdown-table, csv, both")
        ->check(CLI::IsMember({"markdown-table", "csv", "both"}));

    // report
    std::string report_runs;
    std::string report_judge;
    std::string report_out = ".";
    std::string report_format = "both";
    int report_k = 1;
    auto* report = app.add_subcommand("report", "recompute reports from stored trajectories");
    report->add_option("--runs", report_runs, "runs directory written by `run`")->required();
    report->add_option("--judge", report_judge, "cosmos-judge/1 score file to merge");
    report->add_option("--out", report_out, "output directory");
    report->add_option("--format", report_format, "report format: markdown-table, csv, both")
        ->check(CLI::IsMember({"markdown-table", "csv", "both"}));
    report->add_option("--k", report_k, "repetitions per task used in the runs");

    // serve-sim
    std::vector<std::string> serve_specs;
    bool serve_stdio_flag = false;
    std::string serve_http_addr;
    std::optional<std::uint64_t> serve_seed;
    std::string serve_failure;
    auto* serve = app.add_subcommand("serve-sim", "serve the simulated environment over JSON-RPC");
    serve->add_option("--spec", serve_specs, "server spec file (repeatable)")->required();
    serve->add_flag("--stdio", serve_stdio_flag, "newline-delimited JSON-RPC on stdin/stdout (default)");
    serve->add_option("--http", serve_http_addr, "serve HTTP JSON-RPC at host:port instead");
    serve->add_option("--seed", serve_seed, "override every spec's seed");
    serve->add_option("--failure", serve_failure, "failure policy as inline JSON");

    // validate
    std::vector<std::string> validate_specs;
    std::string validate_config;
    std::string validate_suite;
    std::string validate_judge;
    auto* validate = app.add_subcommand("validate", "lint spec, suite, judge, and config files");
    validate->add_option("--spec", validate_specs, "server spec file (repeatable)");
    validate->add_option("--config", validate_config, "bench config file");
    validate->add_option("--suite", validate_suite, "task suite directory");
    validate->add_option("--judge", validate_judge, "judge score file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_config, run_seed, run_out, run_judge, run_jobs, run_format);
        if (report->parsed())
            return cmd_report(report_runs, report_judge, report_out, report_format, report_k);
        if (serve->parsed())
            return cmd_serve(serve_specs, serve_stdio_flag, serve_http_addr, serve_seed,
                             serve_failure);
        if (validate->parsed())
            return cmd_validate(validate_specs, validate_config, validate_suite, validate_judge);
    } catch (const cosmos::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
