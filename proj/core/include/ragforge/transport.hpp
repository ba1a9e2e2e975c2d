#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ragforge {

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Minimal HTTP seam. Production code talks through it; tests substitute a
// fake to script failures without sockets.
class Transport {
public:
    virtual ~Transport() = default;

    // POSTs a JSON body. Throws TransportError when no response was obtained
    // at all (connect failure, timeout). HTTP error statuses are returned,
    // not thrown.
    virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                   const HttpHeaders& headers) = 0;
};

// cpp-httplib client pinned to one origin ("http://host:port" or
// "https://host"). Paths passed to post_json are absolute on that origin.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::string origin, int timeout_seconds = 120);
    ~HttpTransport() override;

    HttpResponse post_json(const std::string& path, const std::string& body,
                           const HttpHeaders& headers) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
    // Total attempts, first try included. 3 means: try, retry, retry, give up.
    int max_attempts = 3;
    // Sleep before retry n is backoff_base_ms << (n-1). Zero disables sleeping.
    int backoff_base_ms = 250;
};

// Retries transport failures and retryable statuses (429, 5xx) under the
// policy. Exhausted retries raise TransportError; other statuses are
// returned to the caller for protocol-level handling.
HttpResponse post_with_retries(Transport& transport, const std::string& path,
                               const std::string& body, const HttpHeaders& headers,
                               const RetryPolicy& policy);

// Splits "http://host:port/v1" into {"http://host:port", "/v1"}.
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

}  // namespace ragforge
