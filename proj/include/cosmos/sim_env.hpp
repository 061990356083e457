#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cosmos/types.hpp"

namespace cosmos {

inline constexpr const char* kSpecFormatVersion = "cosmos-spec/1";

enum class ToolBehavior { PureFunction, TableLookup, TemplatedRandom };

/// One tool definition: schemas plus a deterministic response generator.
struct ToolSpec {
    std::string name;
    std::string description;
    Json param_schema = Json::object();
    Json output_schema = Json::object();
    ToolBehavior behavior = ToolBehavior::PureFunction;
    Json reference;

    bool operator==(const ToolSpec&) const = default;
};

struct ServerSpec {
    std::string server_id;
    std::vector<ToolSpec> tools;
    std::uint64_t seed = 0;

    const ToolSpec* find_tool(const std::string& name) const;
};

ServerSpec parse_server_spec(const Json& j);
ServerSpec load_server_spec(const std::filesystem::path& path);

enum class FailureMode { None, EveryNth, Probabilistic, ByName };

/// Injected-failure policy layered over the deterministic behaviors.
struct FailurePolicy {
    FailureMode mode = FailureMode::None;
    double parameter = 0.0;            // every-nth: n; probabilistic: p in [0,1]
    std::set<std::string> names;       // by-name: failing tool names
    std::uint64_t seed = 0;

    static FailurePolicy none() { return {}; }
    static FailurePolicy every_nth(int n);
    static FailurePolicy probabilistic(double p, std::uint64_t seed);
    static FailurePolicy by_name(std::set<std::string> names);
};

FailurePolicy parse_failure_policy(const Json& j);

struct ServerCounters {
    std::int64_t calls = 0;
    std::int64_t failures = 0;
    std::int64_t tokens = 0;

    bool operator==(const ServerCounters&) const = default;
};

/// Anything an executor can call tools against.
class Environment {
public:
    virtual ~Environment() = default;

    /// Stable (server_id, tool) listing.
    virtual std::vector<std::pair<std::string, ToolSpec>> list_tools() = 0;

    /// Never throws for unknown tools or bad arguments; those come back as
    /// failure observations so the metrics can count them.
    virtual Observation call_tool(const ToolCall& call) = 0;

    virtual std::map<std::string, ServerCounters> counters() = 0;

    virtual bool healthy() const { return true; }

    /// Per-call deadline for transports that have one; in-process
    /// environments ignore it.
    virtual void set_call_timeout_ms(int) {}
};

/// Argument validation against a parameter schema. Returns an error message,
/// or nullopt when the value conforms.
std::optional<std::string> schema_violation(const Json& value, const Json& schema,
                                            const std::string& path = "$");

/// Arithmetic over named arguments for pure-function tools
/// (+ - * / unary minus, parentheses, numbers, argument identifiers).
double eval_expression(const std::string& expr, const Json& args);

/// Deterministic multi-server environment. Thread-safe; counter updates are
/// serialized.
class SimEnvironment : public Environment {
public:
    explicit SimEnvironment(std::vector<ServerSpec> servers,
                            FailurePolicy failure = FailurePolicy::none());

    std::vector<std::pair<std::string, ToolSpec>> list_tools() override;
    Observation call_tool(const ToolCall& call) override;
    std::map<std::string, ServerCounters> counters() override;

    /// The response a tool produces for given arguments at a given repeat
    /// index, before failure injection. Exposed so the schema-oracle world
    /// model can replay it under its own seed.
    static Json generate_payload(const ServerSpec& server, const ToolSpec& tool, const Json& args,
                                 std::uint64_t seed, std::uint64_t repeat_index);

    const std::vector<ServerSpec>& servers() const { return servers_; }

private:
    Observation failure_observation(const ToolCall& call, const std::string& message);
    bool should_inject_failure(const ToolCall& call);

    std::vector<ServerSpec> servers_;
    FailurePolicy failure_;
    std::map<std::string, ServerCounters> counters_;
    std::map<std::string, std::uint64_t> repeat_counts_; // per (server/tool/args) fingerprint
    std::uint64_t injection_counter_ = 0;
    std::mutex mutex_;
};

/// Synthetic token charge: ceil(characters / 4) per direction.
TokenUsage synthetic_tokens(const Json& request_args, const Json& payload);

} // namespace cosmos
