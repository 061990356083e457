#include "cosmos/world_model.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include <httplib.h>

#include "cosmos/errors.hpp"
#include "cosmos/rng.hpp"

namespace cosmos {

std::string to_string(WmKind k) {
    switch (k) {
        case WmKind::Echo: return "echo";
        case WmKind::SchemaOracle: return "schema-oracle";
        case WmKind::Remote: return "remote";
    }
    return "echo";
}

WmKind wm_kind_from_string(const std::string& s) {
    if (s == "echo") return WmKind::Echo;
    if (s == "schema-oracle") return WmKind::SchemaOracle;
    if (s == "remote") return WmKind::Remote;
    throw ConfigError("unknown world model kind '" + s + "'");
}

void to_json(Json& j, const WorldModelDescriptor& v) {
    j = Json{{"kind", to_string(v.kind)}, {"model_name", v.model_name}, {"params", v.params}};
}

void from_json(const Json& j, WorldModelDescriptor& v) {
    v.kind = wm_kind_from_string(j.at("kind").get<std::string>());
    v.model_name = j.value("model_name", "");
    v.params = j.value("params", Json::object());
}

std::string truncate_context(const std::string& context, std::size_t budget) {
    if (context.size() <= budget) return context;
    return context.substr(0, budget);
}

namespace {

bool is_secret_key(const std::string& key) {
    std::string lower(key);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* marker : {"token", "secret", "key", "password", "authorization"})
        if (lower.find(marker) != std::string::npos) return true;
    return false;
}

Json redact_params(const Json& params) {
    Json out = Json::object();
    for (const auto& [key, value] : params.items())
        out[key] = is_secret_key(key) ? Json("<redacted>") : value;
    return out;
}

class EchoWorldModel : public WorldModel {
public:
    explicit EchoWorldModel(WorldModelDescriptor descriptor) : descriptor_(std::move(descriptor)) {}

    SimulatedObservation simulate(const ToolCall& call, const std::string&,
                                  const std::optional<std::string>&) override {
        SimulatedObservation sim;
        sim.call_id = call.call_id;
        sim.fidelity = Fidelity::Exemplar;
        sim.payload = Json{{"tool", call.tool_name},
                           {"server", call.server},
                           {"arguments", call.arguments},
                           {"echo", call.server + "/" + call.tool_name + "(" + call.arguments.dump() + ")"}};
        return sim;
    }

    WorldModelDescriptor describe() const override { return descriptor_; }

private:
    WorldModelDescriptor descriptor_;
};

class RemoteWorldModel : public WorldModel {
public:
    explicit RemoteWorldModel(WorldModelDescriptor descriptor)
        : descriptor_(std::move(descriptor)),
          in_flight_limit_(descriptor_.params.value("max_in_flight", 4)) {
        // optional schema knowledge so the prompt can carry the tool schema
        if (descriptor_.params.contains("servers"))
            for (const auto& sj : descriptor_.params["servers"])
                servers_.push_back(parse_server_spec(sj));
        if (descriptor_.params.contains("server_specs"))
            for (const auto& pj : descriptor_.params["server_specs"])
                servers_.push_back(load_server_spec(pj.get<std::string>()));
    }

    SimulatedObservation simulate(const ToolCall& call, const std::string& user_request,
                                  const std::optional<std::string>& context) override {
        std::vector<std::pair<std::string, ToolSpec>> schema;
        for (const auto& s : servers_) {
            if (s.server_id != call.server) continue;
            if (const ToolSpec* tool = s.find_tool(call.tool_name))
                schema.emplace_back(s.server_id, *tool);
        }
        const auto request = build_remote_request(descriptor_, call, user_request, context, schema);

        std::string scheme_host, path;
        split_endpoint(request.endpoint, scheme_host, path);

        httplib::Headers headers;
        if (const char* token = std::getenv("COSMOS_WM_TOKEN"))
            headers.emplace("Authorization", std::string("Bearer ") + token);

        InFlightGuard guard(*this);
        httplib::Client client(scheme_host);
        client.set_read_timeout(descriptor_.params.value("timeout_s", 60), 0);
        auto res = client.Post(path, headers, request.body.dump(), "application/json");
        if (!res)
            throw SimulationError("remote world model unreachable at " + request.endpoint);
        if (res->status != 200)
            throw SimulationError("remote world model returned HTTP " + std::to_string(res->status));

        SimulatedObservation sim;
        sim.call_id = call.call_id;
        sim.fidelity = Fidelity::Summary;
        try {
            Json reply = Json::parse(res->body);
            const std::string content = reply.at("choices").at(0).at("message").at("content");
            // prefer structured payloads when the model returns JSON
            try {
                sim.payload = Json::parse(content);
            } catch (const Json::parse_error&) {
                sim.payload = content;
            }
        } catch (const Json::exception& e) {
            throw SimulationError(std::string("malformed remote reply: ") + e.what());
        }
        return sim;
    }

    WorldModelDescriptor describe() const override {
        WorldModelDescriptor d = descriptor_;
        d.params = redact_params(d.params);
        return d;
    }

private:
    struct InFlightGuard {
        explicit InFlightGuard(RemoteWorldModel& wm) : wm_(wm) {
            std::unique_lock<std::mutex> lock(wm_.mutex_);
            wm_.cv_.wait(lock, [&] { return wm_.in_flight_ < wm_.in_flight_limit_; });
            ++wm_.in_flight_;
        }
        ~InFlightGuard() {
            {
                std::lock_guard<std::mutex> lock(wm_.mutex_);
                --wm_.in_flight_;
            }
            wm_.cv_.notify_one();
        }
        RemoteWorldModel& wm_;
    };

    static void split_endpoint(const std::string& endpoint, std::string& scheme_host,
                               std::string& path) {
        const auto scheme_end = endpoint.find("://");
        const auto path_start =
            endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start == std::string::npos) {
            scheme_host = endpoint;
            path = "/";
        } else {
            scheme_host = endpoint.substr(0, path_start);
            path = endpoint.substr(path_start);
        }
    }

    WorldModelDescriptor descriptor_;
    std::vector<ServerSpec> servers_;
    int in_flight_limit_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

} // namespace

SchemaOracleWorldModel::SchemaOracleWorldModel(std::vector<ServerSpec> servers, std::uint64_t seed,
                                               WorldModelDescriptor descriptor)
    : servers_(std::move(servers)), seed_(seed), descriptor_(std::move(descriptor)) {
    descriptor_.params["seed"] = seed_;
}

SimulatedObservation SchemaOracleWorldModel::simulate(const ToolCall& call, const std::string&,
                                                      const std::optional<std::string>&) {
    const ServerSpec* server = nullptr;
    for (const auto& s : servers_)
        if (s.server_id == call.server) server = &s;
    if (!server) throw UnknownToolError(call.server, call.tool_name);
    const ToolSpec* tool = server->find_tool(call.tool_name);
    if (!tool) throw UnknownToolError(call.server, call.tool_name);

    SimulatedObservation sim;
    sim.call_id = call.call_id;
    sim.fidelity = Fidelity::SyntheticData;
    if (auto err = schema_violation(call.arguments, tool->param_schema)) {
        // predicts the environment's rejection rather than failing the planner
        sim.payload = Json{{"error", "schema error: " + *err}};
        return sim;
    }
    try {
        sim.payload = SimEnvironment::generate_payload(*server, *tool, call.arguments, seed_, 0);
    } catch (const ValidationError& e) {
        sim.payload = Json{{"error", std::string("behavior error: ") + e.what()}};
    }
    return sim;
}

WorldModelDescriptor SchemaOracleWorldModel::describe() const { return descriptor_; }

const Json* SchemaOracleWorldModel::output_schema(const std::string& server,
                                                  const std::string& tool) const {
    for (const auto& s : servers_) {
        if (s.server_id != server) continue;
        if (const ToolSpec* t = s.find_tool(tool)) return &t->output_schema;
    }
    return nullptr;
}

RemoteWmRequest build_remote_request(const WorldModelDescriptor& descriptor, const ToolCall& call,
                                     const std::string& user_request,
                                     const std::optional<std::string>& context,
                                     const std::vector<std::pair<std::string, ToolSpec>>& tools) {
    if (!descriptor.params.contains("endpoint"))
        throw ConfigError("remote world model requires an endpoint param");

    std::string system_text;
    if (descriptor.params.contains("template_path")) {
        std::ifstream in(descriptor.params["template_path"].get<std::string>());
        if (!in)
            throw ConfigError("cannot read world model template " +
                              descriptor.params["template_path"].get<std::string>());
        system_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    std::string ctx = context.value_or("");
    if (descriptor.params.value("context_mode", "full-history") == "last-observation") {
        const auto nl = ctx.rfind('\n');
        if (nl != std::string::npos) ctx = ctx.substr(nl + 1);
    }
    ctx = truncate_context(ctx, descriptor.params.value("context_budget", std::size_t{8192}));

    Json user{{"user_request", user_request},
              {"context", ctx},
              {"tool_call",
               Json{{"server", call.server}, {"tool", call.tool_name}, {"arguments", call.arguments}}}};
    if (!tools.empty()) {
        Json schemas = Json::array();
        for (const auto& [server, tool] : tools) {
            if (server == call.server && tool.name == call.tool_name)
                schemas.push_back(Json{{"server", server},
                                       {"name", tool.name},
                                       {"param_schema", tool.param_schema},
                                       {"output_schema", tool.output_schema}});
        }
        user["tool_schema"] = schemas;
    }

    Json messages = Json::array();
    if (!system_text.empty()) messages.push_back(Json{{"role", "system"}, {"content", system_text}});
    messages.push_back(Json{{"role", "user"}, {"content", user.dump()}});

    RemoteWmRequest request;
    request.endpoint = descriptor.params["endpoint"].get<std::string>();
    request.body = Json{{"model", descriptor.model_name.empty() ? "world-model" : descriptor.model_name},
                        {"messages", messages},
                        {"temperature", 0}};
    return request;
}

std::shared_ptr<WorldModel> make_world_model(const WorldModelDescriptor& descriptor) {
    switch (descriptor.kind) {
        case WmKind::Echo:
            return std::make_shared<EchoWorldModel>(descriptor);
        case WmKind::SchemaOracle: {
            std::vector<ServerSpec> servers;
            if (descriptor.params.contains("servers")) {
                for (const auto& sj : descriptor.params["servers"])
                    servers.push_back(parse_server_spec(sj));
            } else if (descriptor.params.contains("server_specs")) {
                for (const auto& pj : descriptor.params["server_specs"])
                    servers.push_back(load_server_spec(pj.get<std::string>()));
            } else {
                throw ConfigError("schema-oracle world model requires servers or server_specs");
            }
            const std::uint64_t seed = descriptor.params.value("seed", 0ULL);
            return std::make_shared<SchemaOracleWorldModel>(std::move(servers), seed, descriptor);
        }
        case WmKind::Remote:
            if (!descriptor.params.contains("endpoint"))
                throw ConfigError("remote world model requires an endpoint param");
            return std::make_shared<RemoteWorldModel>(descriptor);
    }
    throw ConfigError("unknown world model kind");
}

} // namespace cosmos
