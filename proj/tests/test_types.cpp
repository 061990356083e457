#include <doctest.h>

#include "cosmos/errors.hpp"
#include "cosmos/rng.hpp"
#include "cosmos/types.hpp"

using namespace cosmos;

namespace {

ToolCall make_call(const std::string& id, const std::string& tool = "add",
                   Json args = Json{{"a", 2}, {"b", 3}}) {
    return ToolCall{id, "math", tool, std::move(args)};
}

Observation make_obs(const std::string& id, ObsStatus status = ObsStatus::Success) {
    Observation obs;
    obs.call_id = id;
    obs.status = status;
    obs.payload = status == ObsStatus::Success ? Json{{"result", 5}}
                                               : Json{{"error", "injected failure"}};
    obs.latency_ms = 12.0;
    obs.tokens = TokenUsage{4, 6, 10};
    return obs;
}

RunResult make_result() {
    RunResult r;
    r.task_id = "calc_basic_000";
    r.agent_config = {{"agent", "react"}, {"config", "react"}};
    r.answer = "task calc_basic_000: 2 successful call(s)";
    r.plan.steps = {PlanStep{{make_call("7-0")}}, PlanStep{{make_call("7-1", "mul")}}};
    r.trajectory.entries = {{make_call("7-0"), make_obs("7-0")},
                            {make_call("7-1", "mul"), make_obs("7-1")}};
    r.trajectory.failed_entries = {{make_call("7-2"), make_obs("7-2", ObsStatus::Failure)}};
    r.tokens = TokenUsage{12, 18, 30};
    r.rounds = 3;
    return r;
}

// independent generator for the property round-trip
RunResult random_result(Rng& rng) {
    RunResult r;
    r.task_id = "task-" + std::to_string(rng.next_int(0, 999));
    r.agent_config = {{"agent", rng.next_double() < 0.5 ? "react" : "spiral-exec"}};
    r.answer = "answer " + std::to_string(rng.next());
    r.rounds = static_cast<int>(rng.next_int(0, 9));

    const int n_success = static_cast<int>(rng.next_int(0, 4));
    const int n_failed = static_cast<int>(rng.next_int(0, 3));
    TokenUsage sum;
    int id = 0;
    for (int i = 0; i < n_success; ++i) {
        auto call = make_call("c-" + std::to_string(id++), "t" + std::to_string(rng.next_int(0, 3)),
                              Json{{"x", rng.next_int(-50, 50)}});
        Observation obs;
        obs.call_id = call.call_id;
        obs.status = ObsStatus::Success;
        obs.payload = Json{{"value", rng.next_int(0, 1000)}, {"note", "ok"}};
        obs.latency_ms = static_cast<double>(rng.next_int(0, 500));
        obs.tokens = TokenUsage{rng.next_int(0, 100), rng.next_int(0, 100), 0};
        obs.tokens.total = obs.tokens.prompt + obs.tokens.output;
        sum += obs.tokens;
        r.trajectory.entries.emplace_back(call, obs);
        if (rng.next_double() < 0.7) r.plan.steps.push_back(PlanStep{{call}});
    }
    for (int i = 0; i < n_failed; ++i) {
        auto call = make_call("c-" + std::to_string(id++));
        Observation obs = make_obs(call.call_id, ObsStatus::Failure);
        sum += obs.tokens;
        r.trajectory.failed_entries.emplace_back(call, obs);
    }
    if (rng.next_double() < 0.5) {
        WMTrajectory wm;
        const int n_sim = static_cast<int>(rng.next_int(0, 3));
        for (int i = 0; i < n_sim; ++i) {
            auto call = make_call("s-" + std::to_string(i));
            SimulatedObservation sim{call.call_id, Json{{"echo", "sim"}}, Fidelity::Exemplar};
            wm.entries.emplace_back(call, sim);
        }
        wm.terminated_by = rng.next_double() < 0.5 ? WmTermination::PolicyStop
                                                   : WmTermination::MaxSteps;
        r.wm_trajectory = std::move(wm);
    }
    r.tokens = sum;
    return r;
}

} // namespace

TEST_CASE("empty trajectory encodes to header plus answer line") {
    RunResult r;
    r.task_id = "t";
    r.answer = "no actions taken";
    const std::string bytes = encode_trajectory(r);

    int lines = 0;
    for (char c : bytes)
        if (c == '\n') ++lines;
    CHECK(lines == 2);
    CHECK(bytes.find("cosmos-traj/1") != std::string::npos);
    CHECK(decode_trajectory(bytes) == r);
}

TEST_CASE("entries and failed entries produce flagged lines") {
    const RunResult r = make_result();
    const std::string bytes = encode_trajectory(r);

    int entry_lines = 0;
    std::size_t pos = 0;
    while ((pos = bytes.find("\"type\":\"exec\"", pos)) != std::string::npos) {
        ++entry_lines;
        ++pos;
    }
    CHECK(entry_lines == 3);
    CHECK(bytes.find("\"failed\":true") != std::string::npos);
    CHECK(decode_trajectory(bytes) == r);
}

TEST_CASE("encoding is deterministic") {
    const RunResult r = make_result();
    CHECK(encode_trajectory(r) == encode_trajectory(r));
}

TEST_CASE("round trip holds for randomized results") {
    Rng rng(2024);
    for (int i = 0; i < 100; ++i) {
        const RunResult r = random_result(rng);
        CAPTURE(i);
        CHECK(decode_trajectory(encode_trajectory(r)) == r);
    }
}

TEST_CASE("decode rejects malformed input") {
    CHECK_THROWS_AS(decode_trajectory(""), ParseError);

    SUBCASE("bad json carries a line number") {
        const std::string bytes = encode_trajectory(make_result());
        const auto first_nl = bytes.find('\n');
        std::string broken = bytes.substr(0, first_nl + 1) + "{not json}\n";
        try {
            decode_trajectory(broken);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }

    SUBCASE("unsupported format version") {
        CHECK_THROWS_AS(decode_trajectory("{\"format\":\"cosmos-traj/9\"}\n{\"answer\":\"x\"}\n"),
                        ParseError);
    }
}

TEST_CASE("decode validates invariants") {
    RunResult r = make_result();

    SUBCASE("token total mismatch") {
        std::string bytes = encode_trajectory(r);
        // corrupt the rolled-up total in the header line
        const auto pos = bytes.find("\"total\":30");
        REQUIRE(pos != std::string::npos);
        bytes.replace(pos, 10, "\"total\":31");
        CHECK_THROWS_AS(decode_trajectory(bytes), ValidationError);
    }

    SUBCASE("failure observation inside entries") {
        std::string bytes = encode_trajectory(r);
        const auto pos = bytes.find("\"failed\":true");
        REQUIRE(pos != std::string::npos);
        bytes.replace(pos, 13, "\"failed\":false");
        CHECK_THROWS_AS(decode_trajectory(bytes), ValidationError);
    }
}

TEST_CASE("validate rejects invariant violations at the source") {
    SUBCASE("empty answer") {
        RunResult r = make_result();
        r.answer.clear();
        CHECK_THROWS_AS(encode_trajectory(r), ValidationError);
    }
    SUBCASE("tokens must sum") {
        CHECK_THROWS_AS(validate(TokenUsage{1, 2, 4}), ValidationError);
        CHECK_NOTHROW(validate(TokenUsage{1, 2, 3}));
    }
    SUBCASE("negative latency") {
        Observation obs = make_obs("x");
        obs.latency_ms = -1;
        CHECK_THROWS_AS(validate(obs), ValidationError);
    }
    SUBCASE("failure without error text") {
        Observation obs;
        obs.call_id = "x";
        obs.status = ObsStatus::Failure;
        obs.payload = Json::object();
        CHECK_THROWS_AS(validate(obs), ValidationError);
    }
    SUBCASE("plan with duplicate call ids") {
        Plan plan;
        plan.steps = {PlanStep{{make_call("a")}}, PlanStep{{make_call("a")}}};
        CHECK_THROWS_AS(validate(plan), ValidationError);
    }
    SUBCASE("plan with an empty step") {
        Plan plan;
        plan.steps = {PlanStep{}};
        CHECK_THROWS_AS(validate(plan), ValidationError);
    }
    SUBCASE("task difficulty must match server count") {
        Task t{"id", "text", {"a", "b"}, 3};
        CHECK_THROWS_AS(validate(t), ValidationError);
        t.difficulty = 2;
        CHECK_NOTHROW(validate(t));
    }
    SUBCASE("empty simulated payload") {
        SimulatedObservation sim{"x", Json::object(), Fidelity::Summary};
        CHECK_THROWS_AS(validate(sim), ValidationError);
    }
}

TEST_CASE("call id generator is seed deterministic") {
    CallIdGenerator a(99);
    CallIdGenerator b(99);
    CHECK(a.next() == "99-0");
    CHECK(a.next() == "99-1");
    CHECK(b.next() == "99-0");
}

TEST_CASE("encoded lines keep keys sorted") {
    const std::string bytes = encode_trajectory(make_result());
    const std::string header = bytes.substr(0, bytes.find('\n'));
    CHECK(header.find("\"agent_config\"") < header.find("\"format\""));
    CHECK(header.find("\"format\"") < header.find("\"plan\""));
    CHECK(header.find("\"plan\"") < header.find("\"rounds\""));
}
