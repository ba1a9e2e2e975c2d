#pragma once

#include <memory>
#include <string>

#include "ragforge/backend.hpp"
#include "ragforge/transport.hpp"

namespace ragforge::llm {

// OpenAI-compatible /chat/completions client.
class LiveBackend : public ChatBackend {
public:
    struct Config {
        std::string base_url = "http://localhost:8000/v1";
        std::string model;
        std::string api_key;  // sent as a Bearer token when non-empty
        RetryPolicy retry;
    };

    explicit LiveBackend(Config config);
    // Transport injection for tests.
    LiveBackend(Config config, std::shared_ptr<Transport> transport);

    ChatMessage complete(const ChatRequest& request) override;

    // Request body exactly as it goes over the wire; exposed for tests.
    Json build_request_body(const ChatRequest& request) const;

private:
    Config config_;
    std::shared_ptr<Transport> transport_;
    std::string path_prefix_;
};

}  // namespace ragforge::llm
