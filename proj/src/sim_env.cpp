#include "cosmos/sim_env.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "cosmos/errors.hpp"
#include "cosmos/rng.hpp"

namespace cosmos {

const ToolSpec* ServerSpec::find_tool(const std::string& name) const {
    for (const auto& t : tools)
        if (t.name == name) return &t;
    return nullptr;
}

namespace {

ToolBehavior behavior_from_string(const std::string& s, const std::string& tool) {
    if (s == "pure-function") return ToolBehavior::PureFunction;
    if (s == "table-lookup") return ToolBehavior::TableLookup;
    if (s == "templated-random") return ToolBehavior::TemplatedRandom;
    throw ValidationError("tool '" + tool + "'", "unknown behavior '" + s + "'");
}

void check_schema_shape(const Json& schema, const std::string& tool, const char* which) {
    if (!schema.is_object())
        throw ValidationError("tool '" + tool + "'", std::string(which) + " schema must be an object");
    if (schema.contains("properties") && !schema["properties"].is_object())
        throw ValidationError("tool '" + tool + "'",
                              std::string(which) + " schema properties must be an object");
    if (schema.contains("required") && !schema["required"].is_array())
        throw ValidationError("tool '" + tool + "'",
                              std::string(which) + " schema required must be an array");
}

} // namespace

ServerSpec parse_server_spec(const Json& j) {
    ServerSpec spec;
    try {
        if (j.at("format").get<std::string>() != kSpecFormatVersion)
            throw ValidationError("format", "expected " + std::string(kSpecFormatVersion));
        j.at("server_id").get_to(spec.server_id);
        spec.seed = j.value("seed", 0ULL);
        for (const auto& tj : j.at("tools")) {
            ToolSpec tool;
            tj.at("name").get_to(tool.name);
            tool.description = tj.value("description", "");
            tool.param_schema = tj.value("param_schema", Json::object());
            tool.output_schema = tj.value("output_schema", Json::object());
            tool.behavior = behavior_from_string(tj.at("behavior").get<std::string>(), tool.name);
            tool.reference = tj.value("reference", Json());
            check_schema_shape(tool.param_schema, tool.name, "param");
            check_schema_shape(tool.output_schema, tool.name, "output");
            if (tool.behavior == ToolBehavior::PureFunction && !tool.reference.is_string())
                throw ValidationError("tool '" + tool.name + "'",
                                      "pure-function reference must be an expression string");
            if (tool.behavior == ToolBehavior::TableLookup &&
                (!tool.reference.is_object() || !tool.reference.contains("rows")))
                throw ValidationError("tool '" + tool.name + "'",
                                      "table-lookup reference must carry rows");
            spec.tools.push_back(std::move(tool));
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("server spec: ") + e.what());
    }
    std::set<std::string> names;
    for (const auto& t : spec.tools)
        if (!names.insert(t.name).second)
            throw ValidationError("tool '" + t.name + "'", "duplicate tool name");
    return spec;
}

ServerSpec load_server_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open server spec " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_server_spec(j);
}

FailurePolicy FailurePolicy::every_nth(int n) {
    if (n < 1) throw ConfigError("every-nth parameter must be >= 1");
    FailurePolicy p;
    p.mode = FailureMode::EveryNth;
    p.parameter = n;
    return p;
}

FailurePolicy FailurePolicy::probabilistic(double prob, std::uint64_t seed) {
    if (prob < 0.0 || prob > 1.0) throw ConfigError("probabilistic parameter must be in [0,1]");
    FailurePolicy p;
    p.mode = FailureMode::Probabilistic;
    p.parameter = prob;
    p.seed = seed;
    return p;
}

FailurePolicy FailurePolicy::by_name(std::set<std::string> names) {
    FailurePolicy p;
    p.mode = FailureMode::ByName;
    p.names = std::move(names);
    return p;
}

FailurePolicy parse_failure_policy(const Json& j) {
    const std::string mode = j.value("mode", "none");
    if (mode == "none") return FailurePolicy::none();
    if (mode == "every-nth") return FailurePolicy::every_nth(j.at("parameter").get<int>());
    if (mode == "probabilistic")
        return FailurePolicy::probabilistic(j.at("parameter").get<double>(), j.value("seed", 0ULL));
    if (mode == "by-name") {
        std::set<std::string> names;
        for (const auto& n : j.at("names")) names.insert(n.get<std::string>());
        return FailurePolicy::by_name(std::move(names));
    }
    throw ConfigError("unknown failure mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// Schema validation

namespace {

bool type_matches(const Json& value, const std::string& type) {
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "array") return value.is_array();
    if (type == "object") return value.is_object();
    if (type == "null") return value.is_null();
    return true; // unknown type names are not enforced
}

} // namespace

std::optional<std::string> schema_violation(const Json& value, const Json& schema,
                                            const std::string& path) {
    if (!schema.is_object() || schema.empty()) return std::nullopt;

    if (schema.contains("type")) {
        const auto type = schema["type"].get<std::string>();
        if (!type_matches(value, type))
            return path + ": expected " + type + ", got " + std::string(value.type_name());
    }
    if (schema.contains("enum")) {
        const auto& allowed = schema["enum"];
        if (std::find(allowed.begin(), allowed.end(), value) == allowed.end())
            return path + ": value not in enum";
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& req : schema["required"]) {
                const auto key = req.get<std::string>();
                if (!value.contains(key)) return path + ": missing required property '" + key + "'";
            }
        }
        if (schema.contains("properties")) {
            for (const auto& [key, sub] : schema["properties"].items()) {
                if (!value.contains(key)) continue;
                if (auto err = schema_violation(value[key], sub, path + "." + key)) return err;
            }
            if (schema.value("additionalProperties", true) == false) {
                for (const auto& [key, _] : value.items())
                    if (!schema["properties"].contains(key))
                        return path + ": unexpected property '" + key + "'";
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (auto err = schema_violation(value[i], schema["items"],
                                            path + "[" + std::to_string(i) + "]"))
                return err;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Expression evaluator for pure-function tools

namespace {

class ExprParser {
public:
    ExprParser(const std::string& text, const Json& args) : text_(text), args_(args) {}

    double parse() {
        double v = expression();
        skip_ws();
        if (pos_ != text_.size())
            throw ValidationError("expression", "trailing input at position " + std::to_string(pos_));
        return v;
    }

private:
    double expression() {
        double v = term();
        for (;;) {
            skip_ws();
            if (consume('+')) v += term();
            else if (consume('-')) v -= term();
            else return v;
        }
    }

    double term() {
        double v = factor();
        for (;;) {
            skip_ws();
            if (consume('*')) v *= factor();
            else if (consume('/')) {
                double d = factor();
                if (d == 0.0) throw ValidationError("expression", "division by zero");
                v /= d;
            } else return v;
        }
    }

    double factor() {
        skip_ws();
        if (consume('-')) return -factor();
        if (consume('(')) {
            double v = expression();
            skip_ws();
            if (!consume(')')) throw ValidationError("expression", "missing ')'");
            return v;
        }
        if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            return number();
        return identifier();
    }

    double number() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '+' || text_[end] == '-') && (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
            ++end;
        double v = std::stod(text_.substr(pos_, end - pos_));
        pos_ = end;
        return v;
    }

    double identifier() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
            ++end;
        if (end == pos_) throw ValidationError("expression", "unexpected character at " + std::to_string(pos_));
        const std::string name = text_.substr(pos_, end - pos_);
        pos_ = end;
        if (!args_.contains(name))
            throw ValidationError("expression", "unknown argument '" + name + "'");
        const Json& v = args_[name];
        if (!v.is_number()) throw ValidationError("expression", "argument '" + name + "' is not numeric");
        return v.get<double>();
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    const std::string& text_;
    const Json& args_;
    std::size_t pos_ = 0;
};

} // namespace

double eval_expression(const std::string& expr, const Json& args) {
    return ExprParser(expr, args).parse();
}

// ---------------------------------------------------------------------------
// Behavior payload generation

namespace {

// Number results come out as integers when they are whole, so payloads like
// {"result": 5} round-trip without a trailing ".0".
Json number_to_json(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15)
        return Json(static_cast<std::int64_t>(v));
    return Json(v);
}

bool subset_matches(const Json& when, const Json& args) {
    for (const auto& [key, expected] : when.items()) {
        if (!args.contains(key) || args[key] != expected) return false;
    }
    return true;
}

std::string render_placeholder(const std::string& body, const Json& args, Rng& rng, Json* typed_out);

// Expands {{...}} placeholders inside a template string. When the entire
// string is one placeholder the typed value is preserved.
Json expand_string(const std::string& text, const Json& args, Rng& rng) {
    const auto first = text.find("{{");
    if (first == std::string::npos) return Json(text);
    const auto last = text.rfind("}}");
    if (first == 0 && last == text.size() - 2 && text.find("}}", first) == last) {
        Json typed;
        const std::string body = text.substr(2, text.size() - 4);
        render_placeholder(body, args, rng, &typed);
        return typed;
    }
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, open - pos);
        const auto close = text.find("}}", open);
        if (close == std::string::npos) {
            out += text.substr(open);
            break;
        }
        out += render_placeholder(text.substr(open + 2, close - open - 2), args, rng, nullptr);
        pos = close + 2;
    }
    return Json(out);
}

std::string render_placeholder(const std::string& body, const Json& args, Rng& rng,
                               Json* typed_out) {
    std::istringstream in(body);
    std::string op;
    in >> op;
    Json typed;
    if (op == "int") {
        long long lo = 0, hi = 0;
        in >> lo >> hi;
        typed = rng.next_int(lo, hi);
    } else if (op == "real") {
        double lo = 0, hi = 1;
        in >> lo >> hi;
        // fixed 3-decimal grid keeps the rendering platform-independent
        const double raw = lo + rng.next_double() * (hi - lo);
        typed = number_to_json(std::round(raw * 1000.0) / 1000.0);
    } else if (op == "choice") {
        std::string rest;
        std::getline(in, rest);
        if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        std::vector<std::string> options;
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto bar = rest.find('|', pos);
            options.push_back(rest.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
            if (bar == std::string::npos) break;
            pos = bar + 1;
        }
        typed = options.empty() ? Json("") : Json(options[rng.next_index(options.size())]);
    } else if (op == "arg") {
        std::string name;
        in >> name;
        typed = args.contains(name) ? args[name] : Json(nullptr);
    } else {
        throw ValidationError("template", "unknown placeholder '" + op + "'");
    }
    if (typed_out) {
        *typed_out = typed;
        return {};
    }
    return typed.is_string() ? typed.get<std::string>() : typed.dump();
}

Json expand_template(const Json& tmpl, const Json& args, Rng& rng) {
    if (tmpl.is_string()) return expand_string(tmpl.get<std::string>(), args, rng);
    if (tmpl.is_object()) {
        Json out = Json::object();
        for (const auto& [key, value] : tmpl.items()) out[key] = expand_template(value, args, rng);
        return out;
    }
    if (tmpl.is_array()) {
        Json out = Json::array();
        for (const auto& value : tmpl) out.push_back(expand_template(value, args, rng));
        return out;
    }
    return tmpl;
}

std::string args_fingerprint(const std::string& server, const std::string& tool, const Json& args) {
    return server + "/" + tool + "#" + args.dump();
}

} // namespace

Json SimEnvironment::generate_payload(const ServerSpec& server, const ToolSpec& tool,
                                      const Json& args, std::uint64_t seed,
                                      std::uint64_t repeat_index) {
    switch (tool.behavior) {
        case ToolBehavior::PureFunction: {
            const double v = eval_expression(tool.reference.get<std::string>(), args);
            return Json{{"result", number_to_json(v)}};
        }
        case ToolBehavior::TableLookup: {
            for (const auto& row : tool.reference["rows"]) {
                if (subset_matches(row.value("when", Json::object()), args)) return row.at("output");
            }
            return Json{{"error", "no table entry for given arguments"}};
        }
        case ToolBehavior::TemplatedRandom: {
            const auto fp = args_fingerprint(server.server_id, tool.name, args);
            Rng rng(seed ^ fnv1a64(fp) ^ (0x5bd1e995ULL * (repeat_index + 1)));
            return expand_template(tool.reference, args, rng);
        }
    }
    return Json{{"error", "unreachable behavior"}};
}

SimEnvironment::SimEnvironment(std::vector<ServerSpec> servers, FailurePolicy failure)
    : servers_(std::move(servers)), failure_(std::move(failure)) {
    for (const auto& s : servers_) counters_[s.server_id] = ServerCounters{};
}

std::vector<std::pair<std::string, ToolSpec>> SimEnvironment::list_tools() {
    std::vector<std::pair<std::string, ToolSpec>> out;
    for (const auto& s : servers_)
        for (const auto& t : s.tools) out.emplace_back(s.server_id, t);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second.name < b.second.name;
    });
    return out;
}

Observation SimEnvironment::failure_observation(const ToolCall& call, const std::string& message) {
    Observation obs;
    obs.call_id = call.call_id;
    obs.status = ObsStatus::Failure;
    obs.payload = Json{{"error", message}};
    // latency depends only on the call identity, never on scheduling order
    obs.latency_ms = 1.0 + static_cast<double>(fnv1a64(call.call_id) % 50);
    obs.tokens = synthetic_tokens(call.arguments, obs.payload);
    return obs;
}

bool SimEnvironment::should_inject_failure(const ToolCall& call) {
    switch (failure_.mode) {
        case FailureMode::None: return false;
        case FailureMode::EveryNth: {
            const auto n = static_cast<std::uint64_t>(failure_.parameter);
            return (++injection_counter_) % n == 0;
        }
        case FailureMode::Probabilistic: {
            // pure function of (policy seed, call identity): no draw-order races
            Rng rng(failure_.seed ^ fnv1a64(call.call_id));
            return rng.next_double() < failure_.parameter;
        }
        case FailureMode::ByName:
            return failure_.names.count(call.tool_name) > 0 ||
                   failure_.names.count(call.server + "/" + call.tool_name) > 0;
    }
    return false;
}

Observation SimEnvironment::call_tool(const ToolCall& call) {
    std::lock_guard<std::mutex> lock(mutex_);

    auto& stats = counters_[call.server];
    ++stats.calls;

    auto fail = [&](const std::string& message) {
        Observation obs = failure_observation(call, message);
        ++stats.failures;
        stats.tokens += obs.tokens.total;
        return obs;
    };

    const ServerSpec* server = nullptr;
    for (const auto& s : servers_)
        if (s.server_id == call.server) server = &s;
    if (!server) return fail("unknown server '" + call.server + "'");

    const ToolSpec* tool = server->find_tool(call.tool_name);
    if (!tool) return fail("unknown tool '" + call.tool_name + "'");

    if (auto err = schema_violation(call.arguments, tool->param_schema))
        return fail("schema error: " + *err);

    if (should_inject_failure(call)) return fail("injected failure");

    const auto fp = args_fingerprint(call.server, call.tool_name, call.arguments);
    const std::uint64_t repeat_index = repeat_counts_[fp]++;

    Observation obs;
    obs.call_id = call.call_id;
    obs.status = ObsStatus::Success;
    try {
        obs.payload = generate_payload(*server, *tool, call.arguments, server->seed, repeat_index);
    } catch (const ValidationError& e) {
        return fail(std::string("behavior error: ") + e.what());
    }
    if (obs.payload.is_object() && obs.payload.contains("error")) {
        obs.status = ObsStatus::Failure;
        ++stats.failures;
    }
    obs.latency_ms = 1.0 + static_cast<double>(fnv1a64(call.call_id) % 50);
    obs.tokens = synthetic_tokens(call.arguments, obs.payload);
    stats.tokens += obs.tokens.total;
    return obs;
}

std::map<std::string, ServerCounters> SimEnvironment::counters() {
    std::lock_guard<std::mutex> lock(mutex_);
    return counters_;
}

TokenUsage synthetic_tokens(const Json& request_args, const Json& payload) {
    TokenUsage t;
    t.prompt = static_cast<std::int64_t>((request_args.dump().size() + 3) / 4);
    t.output = static_cast<std::int64_t>((payload.dump().size() + 3) / 4);
    t.total = t.prompt + t.output;
    return t;
}

} // namespace cosmos
