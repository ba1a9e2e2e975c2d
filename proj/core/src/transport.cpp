#include "ragforge/transport.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "ragforge/errors.hpp"

namespace ragforge {

struct HttpTransport::Impl {
    std::string origin;
    int timeout_seconds;
};

HttpTransport::HttpTransport(std::string origin, int timeout_seconds)
    : impl_(new Impl{std::move(origin), timeout_seconds}) {
    if (impl_->origin.find("://") == std::string::npos) {
        throw ValidationError("transport origin must include a scheme: " + impl_->origin);
    }
}

HttpTransport::~HttpTransport() = default;

HttpResponse HttpTransport::post_json(const std::string& path, const std::string& body,
                                      const HttpHeaders& headers) {
    // A fresh client per request keeps this object trivially thread-safe;
    // connection reuse is not worth the locking at desk scale.
    httplib::Client client(impl_->origin);
    client.set_connection_timeout(impl_->timeout_seconds, 0);
    client.set_read_timeout(impl_->timeout_seconds, 0);
    client.set_write_timeout(impl_->timeout_seconds, 0);

    httplib::Headers hl;
    for (const auto& [k, v] : headers) hl.emplace(k, v);

    httplib::Result res = client.Post(path, hl, body, "application/json");
    if (!res) {
        throw TransportError("POST " + impl_->origin + path + " failed: " +
                             httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
}

HttpResponse post_with_retries(Transport& transport, const std::string& path,
                               const std::string& body, const HttpHeaders& headers,
                               const RetryPolicy& policy) {
    const int attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1 && policy.backoff_base_ms > 0) {
            const int shift = attempt - 2;
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(policy.backoff_base_ms) << shift));
        }
        try {
            HttpResponse res = transport.post_json(path, body, headers);
            const bool retryable = res.status == 429 || (res.status >= 500 && res.status <= 599);
            if (!retryable) return res;
            last_error = "HTTP " + std::to_string(res.status) + ": " +
                         res.body.substr(0, 200);
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw TransportError("request failed after " + std::to_string(attempts) +
                         " attempts; last error: " + last_error);
}

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw ValidationError("base_url must include a scheme: " + base_url);
    }
    std::size_t slash = base_url.find('/', scheme + 3);
    if (slash == std::string::npos) return {base_url, ""};
    std::string origin = base_url.substr(0, slash);
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {origin, prefix};
}

}  // namespace ragforge
