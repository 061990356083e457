#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "cosmos/sim_env.hpp"
#include "cosmos/types.hpp"

namespace cosmos {

inline constexpr const char* kRpcProtocolVersion = "cosmos-rpc/1";

/// Dispatches one JSON-RPC 2.0 request against an environment. Methods:
/// initialize, tools/list, tools/call, env/counters, shutdown.
Json handle_rpc_request(Environment& env, const Json& request, bool* shutdown = nullptr);

/// Newline-delimited JSON-RPC server loop over arbitrary streams; returns
/// when the peer disconnects or sends shutdown.
void serve_stdio(Environment& env, std::istream& in, std::ostream& out);

/// Blocking HTTP JSON-RPC server (one POST endpoint at /rpc).
void serve_http(Environment& env, const std::string& host, int port);

/// Transport abstraction under the wire client.
class RpcTransport {
public:
    virtual ~RpcTransport() = default;
    /// Sends one request line and returns the matching response line.
    /// Throws ProtocolError on transport failure.
    virtual std::string roundtrip(const std::string& request_line) = 0;
    virtual bool alive() const = 0;
    virtual void set_timeout_ms(int timeout_ms) = 0;
};

/// Spawns `command` (whitespace-split argv) and speaks newline-delimited
/// JSON-RPC over its stdin/stdout.
std::unique_ptr<RpcTransport> make_stdio_transport(const std::string& command);

/// POSTs JSON-RPC bodies to the given URL.
std::unique_ptr<RpcTransport> make_http_transport(const std::string& url);

/// Environment backed by a remote server. One client serves one server
/// process; not shareable across concurrent tasks.
class WireEnvironment : public Environment {
public:
    explicit WireEnvironment(std::unique_ptr<RpcTransport> transport);
    ~WireEnvironment() override;

    std::vector<std::pair<std::string, ToolSpec>> list_tools() override;
    Observation call_tool(const ToolCall& call) override;
    std::map<std::string, ServerCounters> counters() override;
    bool healthy() const override { return healthy_; }

    void set_call_timeout_ms(int timeout_ms) override;

    /// Raw JSON-RPC round trip; throws ProtocolError on mismatch or failure.
    Json request(const std::string& method, const Json& params);

private:
    std::unique_ptr<RpcTransport> transport_;
    std::uint64_t next_id_ = 1;
    bool healthy_ = true;
};

/// Connects to a server command (stdio) or http(s) URL and performs the
/// initialize handshake. Throws ProtocolError on handshake failure.
std::unique_ptr<WireEnvironment> wire_client_connect(const std::string& command_or_url);

} // namespace cosmos
