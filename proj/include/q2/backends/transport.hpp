#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace q2::backends {

// Moves one JSON request body to a capability endpoint and returns the JSON
// reply. Implementations must tolerate concurrent calls.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual nlohmann::json call(std::string_view capability, const nlohmann::json &request) = 0;
};

// POST <base_url>/<capability> with a JSON body.
class HttpTransport : public Transport {
  public:
    explicit HttpTransport(std::string base_url, double timeout_seconds = 300.0);

    nlohmann::json call(std::string_view capability, const nlohmann::json &request) override;

  private:
    std::string scheme_host_port_;
    std::string path_prefix_;
    double timeout_seconds_;
};

// Long-lived child process speaking newline-delimited JSON on stdin/stdout.
// Each request is written as {"capability": ..., "request": {...}} and the
// next stdout line is taken as the reply body. Calls are serialized.
class StdioTransport : public Transport {
  public:
    explicit StdioTransport(std::vector<std::string> argv);
    ~StdioTransport() override;

    StdioTransport(const StdioTransport &) = delete;
    StdioTransport &operator=(const StdioTransport &) = delete;

    nlohmann::json call(std::string_view capability, const nlohmann::json &request) override;

  private:
    std::string read_line();

    std::mutex mutex_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

} // namespace q2::backends
