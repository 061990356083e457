#include "cosmos/wire.hpp"

#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "cosmos/errors.hpp"

namespace cosmos {

namespace {

Json rpc_error(const Json& id, int code, const std::string& message) {
    return Json{{"jsonrpc", "2.0"}, {"id", id}, {"error", Json{{"code", code}, {"message", message}}}};
}

Json rpc_result(const Json& id, Json result) {
    return Json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

} // namespace

Json handle_rpc_request(Environment& env, const Json& request, bool* shutdown) {
    const Json id = request.value("id", Json(nullptr));
    if (request.value("jsonrpc", "") != "2.0")
        return rpc_error(id, -32600, "expected jsonrpc 2.0");
    if (!request.contains("method") || !request["method"].is_string())
        return rpc_error(id, -32600, "missing method");
    const std::string method = request["method"];
    const Json params = request.value("params", Json::object());

    try {
        if (method == "initialize") {
            return rpc_result(id, Json{{"protocol", kRpcProtocolVersion},
                                       {"server", Json{{"name", "cosmos-sim"}}}});
        }
        if (method == "tools/list") {
            Json tools = Json::array();
            for (const auto& [server, tool] : env.list_tools())
                tools.push_back(Json{{"server", server},
                                     {"name", tool.name},
                                     {"description", tool.description},
                                     {"param_schema", tool.param_schema},
                                     {"output_schema", tool.output_schema},
                                     {"behavior", tool.behavior == ToolBehavior::PureFunction
                                                      ? "pure-function"
                                                      : tool.behavior == ToolBehavior::TableLookup
                                                            ? "table-lookup"
                                                            : "templated-random"}});
            return rpc_result(id, Json{{"tools", std::move(tools)}});
        }
        if (method == "tools/call") {
            ToolCall call = params.get<ToolCall>();
            Observation obs = env.call_tool(call);
            return rpc_result(id, Json(obs));
        }
        if (method == "env/counters") {
            Json out = Json::object();
            for (const auto& [server, c] : env.counters())
                out[server] =
                    Json{{"calls", c.calls}, {"failures", c.failures}, {"tokens", c.tokens}};
            return rpc_result(id, out);
        }
        if (method == "shutdown") {
            if (shutdown) *shutdown = true;
            return rpc_result(id, Json::object());
        }
        return rpc_error(id, -32601, "unknown method '" + method + "'");
    } catch (const Json::exception& e) {
        return rpc_error(id, -32602, std::string("invalid params: ") + e.what());
    } catch (const Error& e) {
        return rpc_error(id, -32000, e.what());
    }
}

void serve_stdio(Environment& env, std::istream& in, std::ostream& out) {
    std::string line;
    bool shutdown = false;
    while (!shutdown && std::getline(in, line)) {
        if (line.empty()) continue;
        Json request = Json::parse(line, nullptr, false);
        Json response;
        if (request.is_discarded())
            response = rpc_error(Json(nullptr), -32700, "parse error");
        else
            response = handle_rpc_request(env, request, &shutdown);
        out << response.dump() << '\n';
        out.flush();
    }
}

void serve_http(Environment& env, const std::string& host, int port) {
    httplib::Server server;
    server.Post("/rpc", [&env, &server](const httplib::Request& req, httplib::Response& res) {
        Json request = Json::parse(req.body, nullptr, false);
        bool shutdown = false;
        Json response = request.is_discarded()
                            ? rpc_error(Json(nullptr), -32700, "parse error")
                            : handle_rpc_request(env, request, &shutdown);
        res.set_content(response.dump(), "application/json");
        if (shutdown) server.stop();
    });
    server.listen(host, port);
}

// ---------------------------------------------------------------------------
// Stdio transport (subprocess over pipes)

namespace {

class StdioTransport : public RpcTransport {
public:
    explicit StdioTransport(const std::string& command) {
        std::vector<std::string> args;
        std::istringstream split(command);
        for (std::string a; split >> a;) args.push_back(a);
        if (args.empty()) throw ProtocolError("empty server command");

        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw ProtocolError("pipe failed: " + std::string(std::strerror(errno)));

        pid_ = fork();
        if (pid_ < 0) throw ProtocolError("fork failed: " + std::string(std::strerror(errno)));
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> argv;
            argv.reserve(args.size() + 1);
            for (auto& a : args) argv.push_back(a.data());
            argv.push_back(nullptr);
            execvp(argv[0], argv.data());
            std::perror("execvp");
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ~StdioTransport() override {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            // give the child a moment to exit after its stdin closes
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid_, &status, WNOHANG) == pid_) return;
                usleep(10000);
            }
            kill(pid_, SIGKILL);
            waitpid(pid_, &status, 0);
        }
    }

    std::string roundtrip(const std::string& request_line) override {
        if (!alive_) throw ProtocolError("transport is closed");
        std::string framed = request_line + "\n";
        std::size_t written = 0;
        while (written < framed.size()) {
            const ssize_t n = write(write_fd_, framed.data() + written, framed.size() - written);
            if (n <= 0) {
                alive_ = false;
                throw ProtocolError("server pipe closed while writing");
            }
            written += static_cast<std::size_t>(n);
        }
        return read_line();
    }

    bool alive() const override { return alive_; }
    void set_timeout_ms(int timeout_ms) override { timeout_ms_ = timeout_ms; }

private:
    std::string read_line() {
        const auto deadline =
            std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       deadline - std::chrono::steady_clock::now())
                                       .count();
            if (remaining <= 0) {
                alive_ = false;
                throw ProtocolError("timeout waiting for server response");
            }
            struct pollfd pfd{read_fd_, POLLIN, 0};
            const int rc = poll(&pfd, 1, static_cast<int>(remaining));
            if (rc <= 0) {
                alive_ = false;
                throw ProtocolError(rc == 0 ? "timeout waiting for server response"
                                            : "poll failed on server pipe");
            }
            char chunk[4096];
            const ssize_t n = read(read_fd_, chunk, sizeof(chunk));
            if (n <= 0) {
                alive_ = false;
                throw ProtocolError("server closed the pipe", buffer_);
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    int timeout_ms_ = 30000;
    bool alive_ = true;
    std::string buffer_;
};

class HttpTransport : public RpcTransport {
public:
    explicit HttpTransport(const std::string& url) {
        const auto scheme_end = url.find("://");
        const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        host_ = path_start == std::string::npos ? url : url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/rpc" : url.substr(path_start);
    }

    std::string roundtrip(const std::string& request_line) override {
        httplib::Client client(host_);
        client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        auto res = client.Post(path_, request_line, "application/json");
        if (!res) {
            alive_ = false;
            throw ProtocolError("http transport failed against " + host_);
        }
        if (res->status != 200) {
            alive_ = false;
            throw ProtocolError("http status " + std::to_string(res->status), res->body);
        }
        return res->body;
    }

    bool alive() const override { return alive_; }
    void set_timeout_ms(int timeout_ms) override { timeout_ms_ = timeout_ms; }

private:
    std::string host_;
    std::string path_;
    int timeout_ms_ = 30000;
    bool alive_ = true;
};

} // namespace

std::unique_ptr<RpcTransport> make_stdio_transport(const std::string& command) {
    return std::make_unique<StdioTransport>(command);
}

std::unique_ptr<RpcTransport> make_http_transport(const std::string& url) {
    return std::make_unique<HttpTransport>(url);
}

// ---------------------------------------------------------------------------
// Wire environment

WireEnvironment::WireEnvironment(std::unique_ptr<RpcTransport> transport)
    : transport_(std::move(transport)) {}

WireEnvironment::~WireEnvironment() {
    if (transport_ && transport_->alive()) {
        try {
            request("shutdown", Json::object());
        } catch (const Error&) {
            // the transport teardown reaps the process either way
        }
    }
}

void WireEnvironment::set_call_timeout_ms(int timeout_ms) {
    transport_->set_timeout_ms(timeout_ms);
}

Json WireEnvironment::request(const std::string& method, const Json& params) {
    const std::uint64_t id = next_id_++;
    Json req{{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
    const std::string raw = transport_->roundtrip(req.dump());

    Json response = Json::parse(raw, nullptr, false);
    if (response.is_discarded()) throw ProtocolError("malformed response", raw);
    if (!response.contains("id") || response["id"] != Json(id))
        throw ProtocolError("response id does not match request id " + std::to_string(id), raw);
    if (response.contains("error"))
        throw ProtocolError("server error: " + response["error"].value("message", "unknown"), raw);
    if (!response.contains("result")) throw ProtocolError("response carries no result", raw);
    return response["result"];
}

std::vector<std::pair<std::string, ToolSpec>> WireEnvironment::list_tools() {
    const Json result = request("tools/list", Json::object());
    std::vector<std::pair<std::string, ToolSpec>> out;
    for (const auto& tj : result.at("tools")) {
        ToolSpec tool;
        tool.name = tj.at("name").get<std::string>();
        tool.description = tj.value("description", "");
        tool.param_schema = tj.value("param_schema", Json::object());
        tool.output_schema = tj.value("output_schema", Json::object());
        out.emplace_back(tj.at("server").get<std::string>(), std::move(tool));
    }
    return out;
}

Observation WireEnvironment::call_tool(const ToolCall& call) {
    auto transport_failure = [&](const std::string& message) {
        healthy_ = false;
        Observation obs;
        obs.call_id = call.call_id;
        obs.status = ObsStatus::Failure;
        obs.payload = Json{{"error", message}};
        obs.latency_ms = 0.0;
        obs.tokens = synthetic_tokens(call.arguments, obs.payload);
        return obs;
    };

    if (!healthy_) return transport_failure("environment marked unhealthy");

    const auto start = std::chrono::steady_clock::now();
    Json result;
    try {
        result = request("tools/call", Json(call));
    } catch (const ProtocolError& e) {
        return transport_failure(e.what());
    }
    Observation obs;
    try {
        obs = result.get<Observation>();
    } catch (const Json::exception& e) {
        throw ProtocolError(std::string("malformed observation: ") + e.what(), result.dump());
    }
    obs.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start)
                         .count();
    return obs;
}

std::map<std::string, ServerCounters> WireEnvironment::counters() {
    const Json result = request("env/counters", Json::object());
    std::map<std::string, ServerCounters> out;
    for (const auto& [server, c] : result.items())
        out[server] = ServerCounters{c.at("calls").get<std::int64_t>(),
                                     c.at("failures").get<std::int64_t>(),
                                     c.at("tokens").get<std::int64_t>()};
    return out;
}

std::unique_ptr<WireEnvironment> wire_client_connect(const std::string& command_or_url) {
    std::unique_ptr<RpcTransport> transport;
    if (command_or_url.rfind("http://", 0) == 0 || command_or_url.rfind("https://", 0) == 0)
        transport = make_http_transport(command_or_url);
    else
        transport = make_stdio_transport(command_or_url);

    auto env = std::make_unique<WireEnvironment>(std::move(transport));
    Json hello;
    try {
        hello = env->request("initialize", Json::object());
    } catch (const ProtocolError& e) {
        throw ProtocolError("handshake failed: " + std::string(e.what()), e.raw());
    }
    if (hello.value("protocol", "") != kRpcProtocolVersion)
        throw ProtocolError("handshake failed: unexpected protocol '" +
                            hello.value("protocol", "") + "'");
    return env;
}

} // namespace cosmos
