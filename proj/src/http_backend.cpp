#include "spiral/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

using nlohmann::json;

UsageCounters heuristic_usage(const std::string& prompt, const std::string& reply) {
    UsageCounters usage;
    usage.prompt_tokens = static_cast<long long>((prompt.size() + 3) / 4);
    usage.completion_tokens = static_cast<long long>((reply.size() + 3) / 4);
    usage.calls = 1;
    return usage;
}

} // namespace

std::string build_chat_request(const HttpBackendConfig& config, const std::string& prompt,
                               const SamplingParams& params) {
    json body;
    body["model"] = config.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_output;
    return body.dump();
}

Completion parse_chat_response(const std::string& body, const std::string& prompt) {
    json parsed;
    try {
        parsed = json::parse(body);
    } catch (const json::exception& error) {
        throw BackendError(BackendError::Kind::Malformed,
                           std::string("response is not JSON: ") + error.what());
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty())
        throw BackendError(BackendError::Kind::Malformed, "response has no choices");

    const json& first = parsed["choices"][0];
    std::string text;
    if (first.contains("message") && first["message"].contains("content") &&
        first["message"]["content"].is_string()) {
        text = first["message"]["content"].get<std::string>();
    } else if (first.contains("text") && first["text"].is_string()) {
        text = first["text"].get<std::string>();
    } else {
        throw BackendError(BackendError::Kind::Malformed, "choice has no content");
    }

    Completion completion;
    completion.text = text;
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        const json& usage = parsed["usage"];
        completion.usage.prompt_tokens = usage.value("prompt_tokens", 0LL);
        completion.usage.completion_tokens = usage.value("completion_tokens", 0LL);
        completion.usage.calls = 1;
    } else {
        completion.usage = heuristic_usage(prompt, text);
    }
    return completion;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    std::size_t scheme = config_.endpoint.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint must be a full URL: " + config_.endpoint);
    std::size_t slash = config_.endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) {
        host_ = config_.endpoint;
        path_ = "/v1/chat/completions";
    } else {
        host_ = config_.endpoint.substr(0, slash);
        path_ = config_.endpoint.substr(slash);
    }
}

SamplingParams HttpChatBackend::sampling_for(AgentRole role) const {
    switch (role) {
    case AgentRole::Planner: return config_.planner;
    case AgentRole::Simulator: return config_.simulator;
    case AgentRole::Critic: return config_.critic;
    }
    return config_.planner;
}

Completion HttpChatBackend::complete(AgentRole, const std::string& prompt,
                                     const SamplingParams& params) {
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
        const char* token = std::getenv(config_.auth_env.c_str());
        if (token != nullptr && *token != '\0')
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string body = build_chat_request(config_, prompt, params);
    httplib::Result result = client.Post(path_, headers, body, "application/json");
    if (!result) {
        auto err = result.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw BackendError(BackendError::Kind::Timeout,
                               "request timed out: " + httplib::to_string(err));
        throw BackendError(BackendError::Kind::Malformed,
                           "transport failure: " + httplib::to_string(err));
    }
    if (result->status != 200)
        throw BackendError(BackendError::Kind::HttpStatus,
                           "unexpected HTTP status " + std::to_string(result->status),
                           result->status);
    return parse_chat_response(result->body, prompt);
}

} // namespace spiral
