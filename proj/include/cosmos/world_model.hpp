#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cosmos/sim_env.hpp"
#include "cosmos/types.hpp"

namespace cosmos {

enum class WmKind { Echo, SchemaOracle, Remote };

std::string to_string(WmKind k);
WmKind wm_kind_from_string(const std::string& s);

/// Serializable construction recipe for a world model.
///   echo          — no params
///   schema-oracle — params: server_specs (list of spec file paths) or
///                   servers (inline spec objects); seed (optional)
///   remote        — params: endpoint (required), model (optional),
///                   template_path, context_mode ("full-history" |
///                   "last-observation"), context_budget, max_in_flight
struct WorldModelDescriptor {
    WmKind kind = WmKind::Echo;
    std::string model_name;
    Json params = Json::object();

    bool operator==(const WorldModelDescriptor&) const = default;
};

void to_json(Json& j, const WorldModelDescriptor& v);
void from_json(const Json& j, WorldModelDescriptor& v);

/// The simulator P(s_{t+1} | s_t, a_t): predicts a tool call's outcome
/// without touching the real environment.
class WorldModel {
public:
    virtual ~WorldModel() = default;

    virtual SimulatedObservation simulate(const ToolCall& call, const std::string& user_request,
                                          const std::optional<std::string>& context = std::nullopt) = 0;

    /// The constructing descriptor; secrets redacted.
    virtual WorldModelDescriptor describe() const = 0;
};

/// Construction performs no network traffic for echo and schema-oracle.
/// Throws ConfigError for an unknown kind or missing required param.
std::shared_ptr<WorldModel> make_world_model(const WorldModelDescriptor& descriptor);

/// Implemented by world models that know tool schemas, so plan scoring can
/// check simulated payloads for conformance.
class SchemaAware {
public:
    virtual ~SchemaAware() = default;
    virtual const Json* output_schema(const std::string& server, const std::string& tool) const = 0;
};

/// Desk-scale stand-in for a trained world model: replays the sim servers'
/// own response generators under its own seed. Matching seeds give perfect
/// fidelity on first calls; different seeds give degraded simulations.
class SchemaOracleWorldModel : public WorldModel, public SchemaAware {
public:
    SchemaOracleWorldModel(std::vector<ServerSpec> servers, std::uint64_t seed,
                           WorldModelDescriptor descriptor);

    SimulatedObservation simulate(const ToolCall& call, const std::string& user_request,
                                  const std::optional<std::string>& context) override;
    WorldModelDescriptor describe() const override;
    const Json* output_schema(const std::string& server, const std::string& tool) const override;

private:
    std::vector<ServerSpec> servers_;
    std::uint64_t seed_;
    WorldModelDescriptor descriptor_;
};

/// Wire contract of the remote adapter, kept separate so tests can exercise
/// the request construction without a live endpoint.
struct RemoteWmRequest {
    std::string endpoint;
    Json body;
};

RemoteWmRequest build_remote_request(const WorldModelDescriptor& descriptor, const ToolCall& call,
                                     const std::string& user_request,
                                     const std::optional<std::string>& context,
                                     const std::vector<std::pair<std::string, ToolSpec>>& tools = {});

/// Truncation applied to simulation context before prompting (keeps the head).
std::string truncate_context(const std::string& context, std::size_t budget);

} // namespace cosmos
