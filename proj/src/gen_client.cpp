#include "gen_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "rng.hpp"
#include "sha256.hpp"

namespace lsi {

namespace {

const char *kVerbs[] = {"Implement", "Write", "Create", "Refactor", "Extend"};
const char *kSubjects[] = {"a utility module", "a data-access helper", "a validation routine",
                           "a configuration loader", "a collection builder"};

} // namespace

std::string MockGenClient::complete(const std::string &prompt, int max_tokens) {
    (void)max_tokens;
    auto digest = Sha256::hash(prompt.data(), prompt.size());
    uint64_t h = seed_;
    for (int i = 0; i < 8; i++) h = mix64(h ^ digest[i]);
    std::string tag = to_hex(digest).substr(0, 8);
    std::string verb = kVerbs[h % 5];
    std::string subject = kSubjects[(h >> 8) % 5];
    return verb + " " + subject + " in TypeScript matching variant " + tag + ".";
}

HttpGenClient::HttpGenClient(std::string endpoint, std::string token, int timeout_sec,
                             RetryPolicy retry)
    : endpoint_(std::move(endpoint)), token_(std::move(token)), timeout_sec_(timeout_sec),
      retry_(retry) {
    if (endpoint_.empty()) {
        fail(ErrorCode::invalid_argument, "generation endpoint is empty (set LSI_GEN_ENDPOINT)");
    }
}

HttpGenClient HttpGenClient::from_env(std::string endpoint, std::string token) {
    if (endpoint.empty()) {
        const char *e = std::getenv("LSI_GEN_ENDPOINT");
        if (e != nullptr) endpoint = e;
    }
    if (token.empty()) {
        const char *t = std::getenv("LSI_GEN_TOKEN");
        if (t != nullptr) token = t;
    }
    return HttpGenClient(std::move(endpoint), std::move(token));
}

std::string HttpGenClient::complete(const std::string &prompt, int max_tokens) {
    // split endpoint into host part and path
    std::string rest = endpoint_;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
    if (rest.rfind("https://", 0) == 0) {
        fail(ErrorCode::invalid_argument, "https endpoints are not supported, use http");
    }
    size_t slash = rest.find('/');
    std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);

    nlohmann::json body = {{"prompt", prompt}, {"max_tokens", max_tokens}};
    std::string payload = body.dump();

    std::string last_error;
    int delay_ms = retry_.initial_delay_ms;
    for (int attempt = 1; attempt <= retry_.attempts; attempt++) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = static_cast<int>(delay_ms * retry_.multiplier);
        }
        httplib::Client client(host);
        client.set_connection_timeout(timeout_sec_, 0);
        client.set_read_timeout(timeout_sec_, 0);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server returned status " + std::to_string(res->status);
            continue; // retryable
        }
        if (res->status != 200) {
            fail(ErrorCode::io, "generation endpoint returned status " +
                                    std::to_string(res->status));
        }
        try {
            auto parsed = nlohmann::json::parse(res->body);
            if (!parsed.contains("text") || !parsed["text"].is_string()) {
                fail(ErrorCode::parse, "generation response has no \"text\" field");
            }
            return parsed["text"].get<std::string>();
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorCode::parse, std::string("generation response is not JSON: ") + e.what());
        }
    }
    fail(ErrorCode::io, "generation request failed after " + std::to_string(retry_.attempts) +
                            " attempts: " + last_error);
}

std::string FailingGenClient::complete(const std::string &, int) {
    fail(ErrorCode::io, "client configured to fail");
}

} // namespace lsi
