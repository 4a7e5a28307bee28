#pragma once

#include <cstdint>
#include <string>

namespace lsi {

// Remote text-generation client used by the dataset pipeline.
class GenClient {
  public:
    virtual ~GenClient() = default;
    // Returns the completion text; throws Error on failure (after retries).
    virtual std::string complete(const std::string &prompt, int max_tokens) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    int initial_delay_ms = 1000; // doubles after each failed attempt
    double multiplier = 2.0;
};

// Pure function of (seed, prompt hash); no I/O. Returns recognizable
// instruction-shaped text so pipeline output stays human-readable.
class MockGenClient : public GenClient {
  public:
    explicit MockGenClient(uint64_t seed) : seed_(seed) {}
    std::string complete(const std::string &prompt, int max_tokens) override;

  private:
    uint64_t seed_;
};

// POSTs {"prompt": ..., "max_tokens": ...} as JSON and expects a JSON object
// with a "text" field back. The auth token, when non-empty, is sent as a
// bearer Authorization header. Plain http endpoints only.
class HttpGenClient : public GenClient {
  public:
    HttpGenClient(std::string endpoint, std::string token, int timeout_sec = 30,
                  RetryPolicy retry = {});
    std::string complete(const std::string &prompt, int max_tokens) override;

    // Reads LSI_GEN_ENDPOINT / LSI_GEN_TOKEN when the arguments are empty.
    static HttpGenClient from_env(std::string endpoint = "", std::string token = "");

  private:
    std::string endpoint_;
    std::string token_;
    int timeout_sec_;
    RetryPolicy retry_;
};

// One failure-injecting client for tests: throws on every call.
class FailingGenClient : public GenClient {
  public:
    std::string complete(const std::string &prompt, int max_tokens) override;
};

} // namespace lsi
