#pragma once

#include <string>

#include "spiral/agents.hpp"

namespace spiral {

struct HttpBackendConfig {
    std::string endpoint = "http://localhost:8000/v1/chat/completions";
    std::string model = "default";
    std::string auth_env; // name of the env var holding the bearer token
    SamplingParams planner = default_sampling(AgentRole::Planner);
    SamplingParams simulator = default_sampling(AgentRole::Simulator);
    SamplingParams critic = default_sampling(AgentRole::Critic);
    int timeout_seconds = 60;
};

/// Single-message chat-completion request body for one agent call.
std::string build_chat_request(const HttpBackendConfig& config, const std::string& prompt,
                               const SamplingParams& params);

/// Extracts the first choice text and usage from a chat-completion response
/// body. Falls back to the chars/4 token heuristic when the usage block is
/// absent. Throws BackendError(Malformed) on anything unexpected.
Completion parse_chat_response(const std::string& body, const std::string& prompt);

/// Generic chat-completion client. Never retries internally; the engine owns
/// the retry policy, so call counts stay comparable across backends.
class HttpChatBackend : public AgentBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);

    Completion complete(AgentRole role, const std::string& prompt,
                        const SamplingParams& params) override;

    SamplingParams sampling_for(AgentRole role) const override;

private:
    HttpBackendConfig config_;
    std::string host_; // scheme://host[:port]
    std::string path_;
};

} // namespace spiral
