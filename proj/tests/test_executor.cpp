#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "cosmos/errors.hpp"
#include "cosmos/executor.hpp"

using namespace cosmos;

namespace {

const std::string kFixtures = COSMOS_FIXTURE_DIR;

Task math_task() { return Task{"calc_basic_000", "add and multiply", {"math"}, 1}; }

ToolCall add_call(const std::string& id, Json args = Json{{"a", 2}, {"b", 3}}) {
    return ToolCall{id, "math", "add", std::move(args)};
}

ToolCall mul_call(const std::string& id, Json args = Json{{"a", 2}, {"b", 4}}) {
    return ToolCall{id, "math", "mul", std::move(args)};
}

SimEnvironment math_env(FailurePolicy failure = FailurePolicy::none()) {
    return SimEnvironment({load_server_spec(kFixtures + "/servers/math.json")}, std::move(failure));
}

Plan singleton_plan(std::vector<ToolCall> calls) {
    Plan plan;
    for (auto& c : calls) plan.steps.push_back(PlanStep{{std::move(c)}});
    return plan;
}

Observation failure_obs(const std::string& id) {
    Observation obs;
    obs.call_id = id;
    obs.status = ObsStatus::Failure;
    obs.payload = Json{{"error", "injected failure"}};
    obs.tokens = TokenUsage{1, 1, 2};
    return obs;
}

} // namespace

TEST_CASE("empty plan still synthesizes an answer") {
    auto env = math_env();
    TemplateSynthesizer synth;
    const auto result = execute_plan(math_task(), Plan{}, env, ExecOptions{}, synth);
    CHECK(result.trajectory.entries.empty());
    CHECK(result.trajectory.failed_entries.empty());
    CHECK(result.answer.find("no actions taken") != std::string::npos);
    CHECK(result.rounds == 0);
}

TEST_CASE("two-step plan executes in order on an all-success environment") {
    auto env = math_env();
    TemplateSynthesizer synth;
    const auto plan = singleton_plan({add_call("1-0"), mul_call("1-1")});
    const auto result = execute_plan(math_task(), plan, env, ExecOptions{}, synth);

    REQUIRE(result.trajectory.entries.size() == 2);
    CHECK(result.trajectory.failed_entries.empty());
    CHECK(result.trajectory.entries[0].first.call_id == "1-0");
    CHECK(result.trajectory.entries[0].second.payload == Json{{"result", 5}});
    CHECK(result.trajectory.entries[1].first.call_id == "1-1");
    CHECK(result.trajectory.entries[1].second.payload == Json{{"result", 8}});
    CHECK(result.rounds == 2);
    CHECK(result.answer.find("2 successful call(s)") != std::string::npos);
}

TEST_CASE("a failed call lands in failed_entries and execution continues") {
    auto env = math_env();
    TemplateSynthesizer synth;
    // the first call violates the schema, the second is fine
    const auto plan = singleton_plan({add_call("1-0", Json{{"a", "bad"}}), mul_call("1-1")});
    const auto result = execute_plan(math_task(), plan, env, ExecOptions{}, synth);

    REQUIRE(result.trajectory.failed_entries.size() == 1);
    CHECK(result.trajectory.failed_entries[0].first.call_id == "1-0");
    REQUIRE(result.trajectory.entries.size() == 1);
    CHECK(result.trajectory.entries[0].first.call_id == "1-1");
}

TEST_CASE("attempted calls always equal plan calls with adjustment off") {
    auto env = math_env(FailurePolicy::every_nth(2));
    TemplateSynthesizer synth;
    const auto plan = singleton_plan({add_call("1-0"), add_call("1-1"), add_call("1-2"),
                                      add_call("1-3")});
    const auto result = execute_plan(math_task(), plan, env, ExecOptions{}, synth);
    CHECK(result.trajectory.attempted_calls() == plan.call_count());
    CHECK(result.trajectory.entries.size() == 2);
    CHECK(result.trajectory.failed_entries.size() == 2);
}

TEST_CASE("parallel step results commit in call_id order") {
    auto env = math_env();
    TemplateSynthesizer synth;
    Plan plan;
    plan.steps.push_back(PlanStep{{mul_call("1-2"), add_call("1-1")}});
    ExecOptions opts;
    opts.parallel = true;
    const auto result = execute_plan(math_task(), plan, env, opts, synth);
    REQUIRE(result.trajectory.entries.size() == 2);
    CHECK(result.trajectory.entries[0].first.call_id == "1-1");
    CHECK(result.trajectory.entries[1].first.call_id == "1-2");
    CHECK(result.rounds == 1);
}

TEST_CASE("adjust_plan drops dependents of the failed call") {
    const auto failed = std::make_pair(add_call("A"), failure_obs("A"));

    SUBCASE("independent remainder is unchanged") {
        const auto remaining = singleton_plan({mul_call("B")});
        const auto adjusted = adjust_plan(remaining, failed);
        CHECK(adjusted == remaining);
    }
    SUBCASE("a dependent call is dropped") {
        const auto remaining = singleton_plan({mul_call("B", Json{{"a", "@{A}"}, {"b", 1}})});
        const auto adjusted = adjust_plan(remaining, failed);
        CHECK(adjusted.steps.empty());
    }
    SUBCASE("only the dependent part of the remainder is dropped") {
        const auto remaining =
            singleton_plan({mul_call("B", Json{{"a", "@{A}"}, {"b", 1}}), mul_call("C")});
        const auto adjusted = adjust_plan(remaining, failed);
        REQUIRE(adjusted.steps.size() == 1);
        CHECK(adjusted.steps[0].calls[0].call_id == "C");
    }
    SUBCASE("a success observation is rejected") {
        Observation ok;
        ok.call_id = "A";
        ok.status = ObsStatus::Success;
        ok.payload = Json{{"result", 1}};
        CHECK_THROWS_AS(adjust_plan(Plan{}, {add_call("A"), ok}), ValidationError);
    }
    SUBCASE("a throwing adjuster falls back to the dependency drop") {
        class BrokenAdjuster : public PlanAdjuster {
        public:
            Plan adjust(const Plan&, const ToolCall&, const Observation&) override {
                throw ConfigError("adjuster endpoint down");
            }
        } broken;
        const auto remaining = singleton_plan({mul_call("B", Json{{"a", "@{A}", }, {"b", 1}})});
        const auto adjusted = adjust_plan(remaining, failed, &broken);
        CHECK(adjusted.steps.empty());
    }
}

TEST_CASE("execute_plan with adjustment removes downstream dependents") {
    auto env = math_env(FailurePolicy::by_name({"add"}));
    TemplateSynthesizer synth;
    const auto plan = singleton_plan(
        {add_call("1-0"), mul_call("1-1", Json{{"a", "@{1-0}"}, {"b", 1}}), mul_call("1-2")});
    ExecOptions opts;
    opts.adjust_on_failure = true;
    const auto result = execute_plan(math_task(), plan, env, opts, synth);

    // 1-0 fails, 1-1 is dropped by the adjuster, 1-2 still runs
    REQUIRE(result.trajectory.failed_entries.size() == 1);
    CHECK(result.trajectory.failed_entries[0].first.call_id == "1-0");
    REQUIRE(result.trajectory.entries.size() == 1);
    CHECK(result.trajectory.entries[0].first.call_id == "1-2");
    CHECK(result.trajectory.attempted_calls() == 2); // the dropped call was never attempted
}

TEST_CASE("react baseline with an immediate stop") {
    auto env = math_env();
    TemplateSynthesizer synth;
    auto policy = scripted_policy({});
    const auto result = run_react_baseline(math_task(), env, *policy, 10, synth);
    CHECK(result.rounds == 0);
    CHECK(result.trajectory.attempted_calls() == 0);
    CHECK_FALSE(result.answer.empty());
}

TEST_CASE("react baseline interleaves calls and observations") {
    auto env = math_env();
    TemplateSynthesizer synth;
    auto policy = scripted_policy({add_call("1-0"), mul_call("1-1")});
    const auto result = run_react_baseline(math_task(), env, *policy, 10, synth);
    CHECK(result.rounds == 2);
    CHECK(result.trajectory.entries.size() == 2);
    CHECK(env.counters().at("math").calls == 2);
}

TEST_CASE("react baseline honors max_rounds") {
    auto env = math_env();
    TemplateSynthesizer synth;
    auto policy = scripted_policy({add_call("1-0"), add_call("1-1"), add_call("1-2")});
    const auto result = run_react_baseline(math_task(), env, *policy, 2, synth);
    CHECK(result.rounds == 2);
    CHECK(result.trajectory.attempted_calls() == 2);
}

TEST_CASE("retry baseline reproduces the retry-overhead pattern") {
    // argument errors stand in for the flailing calls a reactive agent makes
    auto env = math_env();
    TemplateSynthesizer synth;
    auto policy = scripted_policy({add_call("1-0", Json{{"a", "x"}}),
                                   add_call("1-1", Json{{"a", 1}}),
                                   add_call("1-2", Json{{"a", 2}, {"b", 3}})});
    const auto result = run_react_baseline(math_task(), env, *policy, 10, synth);

    CHECK(result.rounds == 3);
    CHECK(result.trajectory.attempted_calls() == 3);
    REQUIRE(result.trajectory.entries.size() == 1); // only the final attempt succeeded
    CHECK(result.trajectory.entries[0].first.call_id == "1-2");
    CHECK(result.trajectory.failed_entries.size() == 2);
}

TEST_CASE("wm agent composes planning, selection, and execution") {
    const Task task = math_task();
    TemplateSynthesizer synth;

    SUBCASE("scripted policy + echo wm + passthrough + all-success env") {
        auto env = math_env();
        auto policy = scripted_policy({add_call("1-0"), mul_call("1-1")});
        auto wm = make_world_model(WorldModelDescriptor{WmKind::Echo, "echo", Json::object()});
        WmAgentOptions opts;
        const auto result = run_wm_agent(task, *policy, *wm, env, opts, synth);

        CHECK(result.plan.call_count() == 2);
        REQUIRE(result.wm_trajectory.has_value());
        CHECK(result.wm_trajectory->entries.size() == 2);
        CHECK(result.trajectory.entries.size() == 2);
        CHECK_FALSE(result.answer.empty());
        CHECK(result.agent_config.at("agent") == "react-plan-exec");
    }

    SUBCASE("every call failing still synthesizes an answer") {
        auto env = math_env(FailurePolicy::by_name({"add", "mul"}));
        auto policy = scripted_policy({add_call("1-0"), mul_call("1-1")});
        auto wm = make_world_model(WorldModelDescriptor{WmKind::Echo, "echo", Json::object()});
        WmAgentOptions opts;
        const auto result = run_wm_agent(task, *policy, *wm, env, opts, synth);

        CHECK(result.trajectory.entries.empty());
        CHECK(result.trajectory.failed_entries.size() == 2);
        CHECK_FALSE(result.answer.empty());
    }

    SUBCASE("mcts composition is transparent") {
        WorldModelDescriptor oracle;
        oracle.kind = WmKind::SchemaOracle;
        oracle.params =
            Json{{"server_specs", Json::array({kFixtures + "/servers/math.json"})}, {"seed", 7}};

        WmAgentOptions opts;
        opts.use_mcts = true;
        opts.mcts.iterations = 64;
        opts.mcts.max_depth = 2;
        opts.mcts.seed = 9;

        auto policy1 = scripted_policy({add_call("m-0")});
        auto wm1 = make_world_model(oracle);
        auto env1 = math_env();
        const auto agent_run = run_wm_agent(task, *policy1, *wm1, env1, opts, synth);

        // scripted_policy is stateful, so the reference search gets its own
        auto policy2 = scripted_policy({add_call("m-0")});
        auto wm2 = make_world_model(oracle);
        const auto search = mcts_select(task, *policy2, *wm2, opts.mcts);

        CHECK(agent_run.plan == search.plan);
        CHECK(agent_run.agent_config.at("agent") == "spiral-exec");
    }
}

TEST_CASE("planning failures are tagged with the phase") {
    class DeadWorldModel : public WorldModel {
    public:
        SimulatedObservation simulate(const ToolCall&, const std::string&,
                                      const std::optional<std::string>&) override {
            throw SimulationError("remote down");
        }
        WorldModelDescriptor describe() const override { return {}; }
    } wm;

    auto env = math_env();
    TemplateSynthesizer synth;
    auto policy = scripted_policy({add_call("1-0")});
    try {
        run_wm_agent(math_task(), *policy, wm, env, WmAgentOptions{}, synth);
        FAIL("expected PlanningError");
    } catch (const SimulationError& e) {
        CHECK(std::string(e.what()).find("planning:") != std::string::npos);
    }
}

TEST_CASE("remote synthesizer uses the endpoint and falls back when it is down") {
    auto env = math_env();
    ExecutionTrajectory traj;
    ToolCall call = add_call("x-0");
    Observation obs{call.call_id, ObsStatus::Success, Json{{"result", 5}}, 1.0,
                    TokenUsage{1, 1, 2}};
    traj.entries.emplace_back(call, obs);

    SUBCASE("happy path") {
        httplib::Server stub;
        stub.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            Json reply{{"choices",
                        Json::array({Json{{"message", Json{{"content", "The sum is 5."}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        const int port = stub.bind_to_any_port("127.0.0.1");
        std::thread server([&stub] { stub.listen_after_bind(); });

        RemoteSynthesizer synth("http://127.0.0.1:" + std::to_string(port) +
                                    "/v1/chat/completions",
                                "synth-model");
        CHECK(synth.synthesize(math_task(), traj) == "The sum is 5.");
        stub.stop();
        server.join();
    }

    SUBCASE("unreachable endpoint falls back to the digest") {
        RemoteSynthesizer synth("http://127.0.0.1:1/v1/chat/completions", "synth-model");
        const auto answer = synth.synthesize(math_task(), traj);
        CHECK(answer.find("1 successful call(s)") != std::string::npos);
    }
}

TEST_CASE("fixed seeds give byte-identical encoded results") {
    auto run_once = [&]() {
        auto env = math_env();
        TemplateSynthesizer synth;
        CallIdGenerator ids(42);
        auto policy = scripted_policy({add_call(ids.next()), mul_call(ids.next())});
        auto wm = make_world_model(WorldModelDescriptor{WmKind::Echo, "echo", Json::object()});
        auto result = run_wm_agent(math_task(), *policy, *wm, env, WmAgentOptions{}, synth);
        return encode_trajectory(result);
    };
    const auto first = run_once();
    for (int i = 0; i < 4; ++i) CHECK(run_once() == first);
}
